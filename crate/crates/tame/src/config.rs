//! Flat `key = value` experiment spec. Blank lines and `#` comments are
//! ignored, unknown keys are rejected and later assignments (command-line
//! overrides) win.

use std::path::PathBuf;

use tame_core::engine::{EngineConfig, Mode};
use tame_core::metrics::AurocTiming;
use tame_core::similarity::SimilarityMetric;
use tame_core::task::SequencePlan;

use crate::error::{Error, Result};

/// Environment variable naming the default dataset root.
pub const DATA_DIR_ENV: &str = "TAME_DATA_DIR";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DatasetSpec {
    Synthetic,
    Path(PathBuf),
    /// Nothing configured and no environment default.
    Unset,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precision {
    F32,
    F64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub modes: Vec<Mode>,
    pub metrics: Vec<SimilarityMetric>,
    pub dataset: DatasetSpec,
    pub image_size: usize,
    pub n_experts: usize,
    pub n_sequences: usize,
    pub tasks_per_sequence: usize,
    pub init_per_class: usize,
    pub lifelong_per_class: usize,
    pub seeds: Vec<u64>,
    pub pretrain_epochs: usize,
    pub lifelong_epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub buffer_capacity: usize,
    pub eval_fraction: f64,
    pub replay: bool,
    pub auroc_timing: AurocTiming,
    pub precision: Precision,
    pub out: PathBuf,
    /// Checkpoint directory; defaults to `<out>/checkpoints`.
    pub checkpoints: Option<PathBuf>,
}

pub const KEYS: [&str; 21] = [
    "modes",
    "metrics",
    "dataset",
    "image_size",
    "n_experts",
    "n_sequences",
    "tasks_per_sequence",
    "init_per_class",
    "lifelong_per_class",
    "seeds",
    "pretrain_epochs",
    "lifelong_epochs",
    "batch_size",
    "learning_rate",
    "buffer_capacity",
    "eval_fraction",
    "replay",
    "auroc_timing",
    "precision",
    "out",
    "checkpoints",
];

impl Default for ExperimentSpec {
    fn default() -> Self {
        let engine = EngineConfig::default();
        let plan = SequencePlan::default();
        ExperimentSpec {
            modes: Mode::ALL.to_vec(),
            metrics: vec![SimilarityMetric::Fid, SimilarityMetric::Cosine],
            dataset: match std::env::var_os(DATA_DIR_ENV) {
                Some(p) if !p.is_empty() => DatasetSpec::Path(p.into()),
                _ => DatasetSpec::Unset,
            },
            image_size: 32,
            n_experts: plan.n_init,
            n_sequences: plan.n_sequences,
            tasks_per_sequence: plan.tasks_per_sequence,
            init_per_class: plan.init_per_class,
            lifelong_per_class: plan.lifelong_per_class,
            seeds: vec![0],
            pretrain_epochs: engine.pretrain_epochs,
            lifelong_epochs: engine.lifelong_epochs,
            batch_size: engine.batch_size,
            learning_rate: engine.learning_rate,
            buffer_capacity: engine.buffer_capacity,
            eval_fraction: engine.eval_fraction,
            replay: engine.replay,
            auroc_timing: AurocTiming::Diagonal,
            precision: Precision::F32,
            out: PathBuf::from("tame-out"),
            checkpoints: None,
        }
    }
}

fn list<T>(value: &str, parse: impl Fn(&str) -> Option<T>) -> Option<Vec<T>> {
    let items: Option<Vec<T>> = value.split(',').map(str::trim).filter(|s| !s.is_empty()).map(parse).collect();
    items.filter(|v| !v.is_empty())
}

fn positive(v: &str) -> Option<usize> {
    v.parse().ok().filter(|&n: &usize| n > 0)
}

pub fn parse_metric(s: &str) -> Option<SimilarityMetric> {
    match s {
        "fid" => Some(SimilarityMetric::Fid),
        "cosine" => Some(SimilarityMetric::Cosine),
        _ => None,
    }
}

impl ExperimentSpec {
    /// Parses a config file body on top of the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut spec = ExperimentSpec::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
            spec.set(key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("line {}: {}", lineno + 1, e.to_string().trim_start_matches("config: "))))?;
        }
        Ok(spec)
    }

    /// Applies one assignment; used for both file lines and overrides.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = || Error::Config(format!("invalid value {value:?} for {key}"));
        match key {
            "modes" => self.modes = list(value, Mode::parse).ok_or_else(bad)?,
            "metrics" => self.metrics = list(value, parse_metric).ok_or_else(bad)?,
            "dataset" => {
                self.dataset = match value {
                    "synthetic" => DatasetSpec::Synthetic,
                    "" => DatasetSpec::Unset,
                    p => DatasetSpec::Path(PathBuf::from(p)),
                }
            }
            "image_size" => self.image_size = positive(value).filter(|n| n % 8 == 0).ok_or_else(bad)?,
            "n_experts" => self.n_experts = positive(value).ok_or_else(bad)?,
            "n_sequences" => self.n_sequences = value.parse().map_err(|_| bad())?,
            "tasks_per_sequence" => self.tasks_per_sequence = positive(value).ok_or_else(bad)?,
            "init_per_class" => self.init_per_class = positive(value).ok_or_else(bad)?,
            "lifelong_per_class" => self.lifelong_per_class = positive(value).ok_or_else(bad)?,
            "seeds" => self.seeds = list(value, |s| s.parse().ok()).ok_or_else(bad)?,
            "pretrain_epochs" => self.pretrain_epochs = positive(value).ok_or_else(bad)?,
            "lifelong_epochs" => self.lifelong_epochs = positive(value).ok_or_else(bad)?,
            "batch_size" => self.batch_size = positive(value).ok_or_else(bad)?,
            "learning_rate" => {
                self.learning_rate = value.parse().ok().filter(|&v: &f64| v > 0.0 && v.is_finite()).ok_or_else(bad)?
            }
            "buffer_capacity" => self.buffer_capacity = positive(value).ok_or_else(bad)?,
            "eval_fraction" => {
                self.eval_fraction = value.parse().ok().filter(|v| (0.0..1.0).contains(v)).ok_or_else(bad)?
            }
            "replay" => self.replay = value.parse().map_err(|_| bad())?,
            "auroc_timing" => {
                self.auroc_timing = match value {
                    "diagonal" => AurocTiming::Diagonal,
                    "final" => AurocTiming::Final,
                    _ => return Err(bad()),
                }
            }
            "precision" => {
                self.precision = match value {
                    "f32" => Precision::F32,
                    "f64" => Precision::F64,
                    _ => return Err(bad()),
                }
            }
            "out" => self.out = PathBuf::from(value),
            "checkpoints" => self.checkpoints = (!value.is_empty()).then(|| PathBuf::from(value)),
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    pub fn checkpoint_dir(&self) -> PathBuf {
        self.checkpoints.clone().unwrap_or_else(|| self.out.join("checkpoints"))
    }

    pub fn results_dir(&self) -> PathBuf {
        self.out.join("results")
    }

    pub fn plan(&self) -> SequencePlan {
        SequencePlan {
            n_init: self.n_experts,
            n_sequences: self.n_sequences,
            tasks_per_sequence: self.tasks_per_sequence,
            init_per_class: self.init_per_class,
            lifelong_per_class: self.lifelong_per_class,
        }
    }

    pub fn engine(&self, mode: Mode, metric: SimilarityMetric, seed: u64) -> EngineConfig {
        EngineConfig {
            mode,
            metric,
            pretrain_epochs: self.pretrain_epochs,
            lifelong_epochs: self.lifelong_epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            buffer_capacity: self.buffer_capacity,
            master_seed: seed,
            eval_fraction: self.eval_fraction,
            replay: self.replay,
        }
    }

    /// Every key with its canonical value, in [`KEYS`] order.
    pub fn canonical(&self) -> Vec<(&'static str, String)> {
        let join = |v: Vec<String>| v.join(",");
        KEYS.iter()
            .map(|&k| {
                let v = match k {
                    "modes" => join(self.modes.iter().map(|m| m.name().to_string()).collect()),
                    "metrics" => join(self.metrics.iter().map(|m| m.name().to_string()).collect()),
                    "dataset" => match &self.dataset {
                        DatasetSpec::Synthetic => "synthetic".into(),
                        DatasetSpec::Path(p) => p.display().to_string(),
                        DatasetSpec::Unset => String::new(),
                    },
                    "image_size" => self.image_size.to_string(),
                    "n_experts" => self.n_experts.to_string(),
                    "n_sequences" => self.n_sequences.to_string(),
                    "tasks_per_sequence" => self.tasks_per_sequence.to_string(),
                    "init_per_class" => self.init_per_class.to_string(),
                    "lifelong_per_class" => self.lifelong_per_class.to_string(),
                    "seeds" => join(self.seeds.iter().map(u64::to_string).collect()),
                    "pretrain_epochs" => self.pretrain_epochs.to_string(),
                    "lifelong_epochs" => self.lifelong_epochs.to_string(),
                    "batch_size" => self.batch_size.to_string(),
                    "learning_rate" => format!("{:?}", self.learning_rate),
                    "buffer_capacity" => self.buffer_capacity.to_string(),
                    "eval_fraction" => format!("{:?}", self.eval_fraction),
                    "replay" => self.replay.to_string(),
                    "auroc_timing" => match self.auroc_timing {
                        AurocTiming::Diagonal => "diagonal".into(),
                        AurocTiming::Final => "final".into(),
                    },
                    "precision" => match self.precision {
                        Precision::F32 => "f32".into(),
                        Precision::F64 => "f64".into(),
                    },
                    "out" => self.out.display().to_string(),
                    "checkpoints" => self.checkpoints.as_ref().map(|p| p.display().to_string()).unwrap_or_default(),
                    _ => unreachable!("every key is listed"),
                };
                (k, v)
            })
            .collect()
    }

    /// Canonical `key = value` text; parsing it reproduces this spec.
    pub fn to_text(&self) -> String {
        self.canonical().into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_the_reference_setup() {
        let s = ExperimentSpec::default();
        assert_eq!((s.learning_rate, s.batch_size, s.buffer_capacity), (1e-3, 32, 1000));
        assert_eq!((s.n_experts, s.n_sequences, s.tasks_per_sequence), (5, 5, 10));
        assert_eq!((s.init_per_class, s.lifelong_per_class, s.lifelong_epochs), (200, 100, 3));
    }

    #[test]
    fn parse_overrides_and_round_trips() {
        let mut s = ExperimentSpec::parse("# demo\nmodes = tame, baseline\nseeds=1,2\ndataset = synthetic\nimage_size = 16\n").unwrap();
        assert_eq!(s.modes, vec![Mode::Tame, Mode::Baseline]);
        assert_eq!(s.seeds, vec![1, 2]);
        s.set("seeds", "9").unwrap();
        assert_eq!(s.seeds, vec![9]);
        assert_eq!(ExperimentSpec::parse(&s.to_text()).unwrap(), s);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        let e = ExperimentSpec::parse("modes = tame\nlearnin_rate = 0.1\n").unwrap_err();
        assert!(e.to_string().contains("line 2") && e.to_string().contains("unknown key"), "{e}");
        assert!(ExperimentSpec::parse("image_size = 12").is_err());
        assert!(ExperimentSpec::parse("modes = tame,nope").is_err());
        assert!(ExperimentSpec::parse("just text").is_err());
        assert!(ExperimentSpec::parse("eval_fraction = 1.0").is_err());
    }
}
