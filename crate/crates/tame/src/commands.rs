//! The four runner commands.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use tame_core::engine::{pretrain, run_sequence, run_shared_bottom, ExpertPool, Mode};
use tame_core::nn::CnnConfig;
use tame_core::similarity::SimilarityMetric;
use tame_core::task::{build_sequences, Sequence, Task, TaskSource};
use tame_core::Real;

use crate::cifar;
use crate::config::{ExperimentSpec, Precision};
use crate::container::{decode_expert, decode_stats, decode_task, encode_expert, encode_stats, encode_task, CKPT_MAGIC, TASK_MAGIC};
use crate::dataset::{task_block, Dataset, SeedData, TaskIndex, TaskIndexEntry, TASK_INDEX};
use crate::error::{Error, Result};
use crate::fsutil::{file_sha256, manifest_name, sha256_hex, write_atomic};
use crate::manifest::{seed_key, RunManifest, MANIFEST_FILE};
use crate::report::{cell_events, comparison_for_metric, curves_csv, parse_jsonl, to_jsonl, CellId, Event};

pub const EVENTS_FILE: &str = "events.jsonl";
pub const PROGRESS_FILE: &str = "progress.json";

pub fn summary_file(metric: SimilarityMetric) -> String {
    format!("summary_{}.csv", metric.name())
}

pub fn curves_file(metric: SimilarityMetric) -> String {
    format!("curves_{}.csv", metric.name())
}

fn cnn_config(init: &[Task]) -> Result<CnnConfig> {
    let t = init.first().ok_or_else(|| Error::Dataset("no initialization tasks".into()))?;
    if t.height != t.width || t.height % 8 != 0 {
        return Err(Error::Dataset(format!("images are {}x{}; square sides divisible by 8 are required", t.height, t.width)));
    }
    Ok(CnnConfig::default().with_image_size(t.height))
}

fn precision_name(p: Precision) -> &'static str {
    match p {
        Precision::F32 => "f32",
        Precision::F64 => "f64",
    }
}

/// Identity of a pretrained pool: everything that determines the checkpoint bytes.
pub fn pretrain_key(spec: &ExperimentSpec, seed: u64, data_sha256: &str, cnn: &CnnConfig) -> String {
    let text = format!(
        "seed={seed}\ndata={data_sha256}\nn_experts={}\ncnn={cnn:?}\npretrain_epochs={}\nbatch_size={}\nlearning_rate={:?}\nprecision={}\n",
        spec.n_experts,
        spec.pretrain_epochs,
        spec.batch_size,
        spec.learning_rate,
        precision_name(spec.precision)
    );
    sha256_hex(text.as_bytes())
}

fn expert_file(i: usize) -> String {
    format!("expert-{i}.ckpt")
}

const STATS_FILE: &str = "stats.ckpt";

// ---------------------------------------------------------------- pretrain

/// Pretrains and freezes one expert pool per seed and writes their checkpoints.
/// Nothing is written until every seed has finished.
pub fn cmd_pretrain(spec: &ExperimentSpec) -> Result<PathBuf> {
    match spec.precision {
        Precision::F32 => pretrain_impl::<f32>(spec),
        Precision::F64 => pretrain_impl::<f64>(spec),
    }
}

fn pretrain_impl<S: Real>(spec: &ExperimentSpec) -> Result<PathBuf> {
    let dataset = Dataset::open(spec)?;
    let dir = spec.checkpoint_dir();
    let mut manifest = RunManifest::new("pretrain", spec);
    let mut files: Vec<(PathBuf, Vec<u8>)> = Vec::new();
    for &seed in &spec.seeds {
        let started = Instant::now();
        let data = dataset.seed_data(spec, seed)?;
        let cnn = cnn_config(&data.init)?;
        let mut pool = ExpertPool::<S>::new(cnn, spec.n_experts, seed)?;
        let report = pretrain(&mut pool, &data.init, &spec.engine(Mode::Tame, SimilarityMetric::Fid, seed))?;
        log::info!("seed {seed}: experts pretrained, train accuracy {:?}", report.train_accuracy);
        let sub = dir.join(seed_key(seed));
        for (i, e) in pool.experts.iter().enumerate() {
            files.push((sub.join(expert_file(i)), encode_expert(e)));
        }
        files.push((sub.join(STATS_FILE), encode_stats(&pool.init_stats)));
        manifest.datasets.insert(seed_key(seed), data.sha256.clone());
        manifest.keys.insert(seed_key(seed), pretrain_key(spec, seed, &data.sha256, &cnn));
        manifest.timings.insert(format!("pretrain/{}", seed_key(seed)), started.elapsed().as_secs_f64());
    }
    for (path, bytes) in &files {
        write_atomic(path, bytes)?;
        manifest.checkpoints.insert(manifest_name(&dir, path), sha256_hex(bytes));
    }
    let path = dir.join(MANIFEST_FILE);
    manifest.save(&path)?;
    Ok(path)
}

fn read_checked(dir: &Path, rel: &str, manifest: &RunManifest) -> Result<Vec<u8>> {
    let path = dir.join(rel);
    let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
    match manifest.checkpoints.get(rel) {
        Some(sha) if *sha == sha256_hex(&bytes) => Ok(bytes),
        Some(_) => Err(Error::Mismatch(format!("{} does not match its recorded checksum", path.display()))),
        None => Err(Error::Mismatch(format!("{} is not listed in the pretraining manifest", path.display()))),
    }
}

/// Loads the frozen pool of `seed`, refusing checkpoints made for another spec or dataset.
fn load_pool<S: Real>(spec: &ExperimentSpec, seed: u64, data: &SeedData, cnn: CnnConfig) -> Result<(ExpertPool<S>, BTreeMap<String, String>)> {
    let dir = spec.checkpoint_dir();
    let mpath = dir.join(MANIFEST_FILE);
    if !mpath.is_file() {
        return Err(Error::Mismatch(format!(
            "no pretraining manifest at {}; run `tame pretrain` with the same spec first",
            mpath.display()
        )));
    }
    let manifest = RunManifest::load(&mpath)?;
    let key = pretrain_key(spec, seed, &data.sha256, &cnn);
    if manifest.keys.get(&seed_key(seed)) != Some(&key) {
        return Err(Error::Mismatch(format!(
            "checkpoints in {} were produced for a different spec or dataset (seed {seed})",
            dir.display()
        )));
    }
    let mut pool = ExpertPool::<S>::new(cnn, spec.n_experts, seed)?;
    let mut hashes = BTreeMap::new();
    for i in 0..spec.n_experts {
        let rel = format!("{}/{}", seed_key(seed), expert_file(i));
        let bytes = read_checked(&dir, &rel, &manifest)?;
        let expert = decode_expert::<S>(&dir.join(&rel), &bytes)?;
        if !expert.is_frozen() || *expert.config() != cnn {
            return Err(Error::Mismatch(format!("{rel} is not a frozen expert of the configured shape")));
        }
        pool.experts[i] = expert;
        hashes.insert(rel, sha256_hex(&bytes));
    }
    let rel = format!("{}/{STATS_FILE}", seed_key(seed));
    let bytes = read_checked(&dir, &rel, &manifest)?;
    pool.init_stats = decode_stats(&dir.join(&rel), &bytes)?;
    if pool.init_stats.len() != spec.n_experts {
        return Err(Error::Mismatch(format!("{rel} holds {} statistics for {} experts", pool.init_stats.len(), spec.n_experts)));
    }
    hashes.insert(rel, sha256_hex(&bytes));
    Ok((pool, hashes))
}

// --------------------------------------------------------------------- run

/// Test and tooling hooks for [`cmd_run_with`].
#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Abort with [`Error::Interrupted`] once this many cells have been computed.
    pub stop_after: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutputs {
    pub results_dir: PathBuf,
    pub events: PathBuf,
    pub summaries: Vec<PathBuf>,
    pub curves: Vec<PathBuf>,
    pub computed_cells: usize,
    pub reused_cells: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
struct Progress {
    run_key: String,
    /// Completed cell file stem -> SHA-256 of its event file.
    cells: BTreeMap<String, String>,
}

pub fn cmd_run(spec: &ExperimentSpec) -> Result<RunOutputs> {
    cmd_run_with(spec, RunOptions::default())
}

/// Runs every (seed, sequence, mode, metric) cell. Completed cells are
/// recorded in `progress.json`, so an interrupted run resumes where it
/// stopped and produces the same outputs as an uninterrupted one.
pub fn cmd_run_with(spec: &ExperimentSpec, options: RunOptions) -> Result<RunOutputs> {
    match spec.precision {
        Precision::F32 => run_impl::<f32>(spec, options),
        Precision::F64 => run_impl::<f64>(spec, options),
    }
}

struct SeedRun<S> {
    seed: u64,
    data: SeedData,
    cnn: CnnConfig,
    pool: Option<ExpertPool<S>>,
}

fn run_cell<S: Real>(spec: &ExperimentSpec, run: &SeedRun<S>, sequence: &Sequence, cell: &CellId, mode: Mode, metric: Option<SimilarityMetric>) -> Result<Vec<Event>> {
    let config = spec.engine(mode, metric.unwrap_or(SimilarityMetric::Fid), run.seed);
    let steps = if mode.uses_experts() {
        let pool = run.pool.as_ref().expect("pool loaded for expert modes");
        run_sequence(pool, sequence, &config)?.steps
    } else {
        run_shared_bottom::<S>(sequence, &run.data.init, &run.cnn, &config)?.steps
    };
    cell_events(cell, &steps, spec.auroc_timing)
}

fn run_impl<S: Real>(spec: &ExperimentSpec, options: RunOptions) -> Result<RunOutputs> {
    let started = Instant::now();
    let dataset = Dataset::open(spec)?;
    let results = spec.results_dir();
    let mut manifest = RunManifest::new("run", spec);
    let needs_experts = spec.modes.iter().any(|m| m.uses_experts());

    let mut seeds = Vec::with_capacity(spec.seeds.len());
    for &seed in &spec.seeds {
        let data = dataset.seed_data(spec, seed)?;
        let cnn = cnn_config(&data.init)?;
        let pool = if needs_experts {
            let (pool, hashes) = load_pool::<S>(spec, seed, &data, cnn)?;
            manifest.checkpoints.extend(hashes);
            Some(pool)
        } else {
            None
        };
        manifest.datasets.insert(seed_key(seed), data.sha256.clone());
        seeds.push(SeedRun { seed, data, cnn, pool });
    }
    manifest.timings.insert("load".into(), started.elapsed().as_secs_f64());

    // everything that determines the cell outputs, excluding output locations
    let mut identity: String = spec
        .canonical()
        .into_iter()
        .filter(|(k, _)| !matches!(*k, "out" | "checkpoints" | "dataset"))
        .map(|(k, v)| format!("{k}={v}\n"))
        .collect();
    for (k, v) in manifest.datasets.iter().chain(&manifest.checkpoints) {
        identity.push_str(&format!("{k}:{v}\n"));
    }
    let run_key = sha256_hex(identity.as_bytes());
    let progress_path = results.join(PROGRESS_FILE);
    let mut progress = if progress_path.is_file() {
        let bytes = fs::read(&progress_path).map_err(|e| Error::io(&progress_path, e))?;
        let p: Progress = serde_json::from_slice(&bytes).map_err(|e| Error::format(&progress_path, 0, e.to_string()))?;
        if p.run_key != run_key {
            return Err(Error::Mismatch(format!(
                "{} belongs to a different spec, dataset or checkpoint set; choose another --out",
                results.display()
            )));
        }
        p
    } else {
        Progress {
            run_key,
            cells: BTreeMap::new(),
        }
    };

    let multi_seed = spec.seeds.len() > 1;
    let (mut computed, mut reused) = (0, 0);
    let mut events = Vec::new();
    let cells_started = Instant::now();
    for run in &seeds {
        for sequence in &run.data.sequences {
            for &mode in &spec.modes {
                let metrics: Vec<Option<SimilarityMetric>> = if mode.uses_similarity() {
                    spec.metrics.iter().copied().map(Some).collect()
                } else {
                    vec![None]
                };
                for metric in metrics {
                    let cell = CellId {
                        seed: run.seed,
                        sequence_id: sequence.sequence_id.clone(),
                        mode: mode.name().into(),
                        metric: metric.map(|m| m.name().to_string()),
                    };
                    let stem = cell.file_stem();
                    let path = results.join("cells").join(format!("{stem}.jsonl"));
                    let done = progress.cells.get(&stem).filter(|sha| path.is_file() && file_sha256(&path).ok().as_ref() == Some(*sha));
                    let cell_events = if done.is_some() {
                        reused += 1;
                        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
                        parse_jsonl(&text)?
                    } else {
                        if options.stop_after == Some(computed) {
                            return Err(Error::Interrupted(computed));
                        }
                        let t = Instant::now();
                        let ev = run_cell(spec, run, sequence, &cell, mode, metric)?;
                        let text = to_jsonl(&ev);
                        write_atomic(&path, text.as_bytes())?;
                        progress.cells.insert(stem.clone(), sha256_hex(text.as_bytes()));
                        let mut bytes = serde_json::to_vec_pretty(&progress).expect("progress serializes");
                        bytes.push(b'\n');
                        write_atomic(&progress_path, &bytes)?;
                        computed += 1;
                        log::info!("cell {stem} finished in {:.1}s", t.elapsed().as_secs_f64());
                        ev
                    };
                    manifest.outputs.insert(manifest_name(&results, &path), progress.cells[&stem].clone());
                    events.extend(cell_events);
                }
            }
        }
    }
    manifest.timings.insert("cells".into(), cells_started.elapsed().as_secs_f64());

    let mut outputs: Vec<(PathBuf, String)> = vec![(results.join(EVENTS_FILE), to_jsonl(&events))];
    let mut summaries = Vec::new();
    let mut curves = Vec::new();
    for &metric in &spec.metrics {
        let table = comparison_for_metric(&events, &spec.modes, metric.name(), multi_seed)?;
        let s = results.join(summary_file(metric));
        let c = results.join(curves_file(metric));
        outputs.push((s.clone(), table.to_csv()));
        outputs.push((c.clone(), curves_csv(&events, metric.name(), multi_seed)));
        summaries.push(s);
        curves.push(c);
    }
    for (path, text) in &outputs {
        write_atomic(path, text.as_bytes())?;
        manifest.outputs.insert(manifest_name(&results, path), sha256_hex(text.as_bytes()));
    }
    manifest.timings.insert("total".into(), started.elapsed().as_secs_f64());
    manifest.save(&results.join(MANIFEST_FILE))?;
    Ok(RunOutputs {
        events: results.join(EVENTS_FILE),
        results_dir: results,
        summaries,
        curves,
        computed_cells: computed,
        reused_cells: reused,
    })
}

// ----------------------------------------------------------- gen-synthetic

/// Writes the synthetic initialization tasks and sequences of every seed as
/// `TAMETASK` files under `spec.out`, with a `tasks.json` index.
pub fn cmd_gen_synthetic(spec: &ExperimentSpec) -> Result<Vec<PathBuf>> {
    let started = Instant::now();
    let out = spec.out.clone();
    let mut index = TaskIndex { tasks: Vec::new() };
    let mut files: Vec<(PathBuf, Vec<u8>)> = Vec::new();
    for &seed in &spec.seeds {
        let (init, sequences) = build_sequences(TaskSource::Synthetic { image_size: spec.image_size }, &spec.plan(), seed)?;
        let named = init
            .iter()
            .enumerate()
            .map(|(i, t)| (None, format!("init-{i}"), t))
            .chain(sequences.iter().flat_map(|s| {
                s.tasks
                    .iter()
                    .enumerate()
                    .map(move |(k, t)| (Some(s.sequence_id.clone()), format!("{}-t{:02}", s.sequence_id, k + 1), t))
            }));
        for (sequence_id, name, task) in named {
            let rel = format!("{}/{name}.tametask", seed_key(seed));
            let bytes = encode_task(&task_block(task));
            index.tasks.push(TaskIndexEntry {
                seed,
                sequence_id,
                task_id: task.task_id.clone(),
                class_pair: task.class_pair,
                archetype: task.archetype,
                file: rel.clone(),
                sha256: sha256_hex(&bytes),
            });
            files.push((out.join(rel), bytes));
        }
    }
    let mut index_bytes = serde_json::to_vec_pretty(&index).expect("index serializes");
    index_bytes.push(b'\n');
    files.push((out.join(TASK_INDEX), index_bytes));

    let mut manifest = RunManifest::new("gen-synthetic", spec);
    for (path, bytes) in &files {
        write_atomic(path, bytes)?;
        manifest.outputs.insert(manifest_name(&out, path), sha256_hex(bytes));
    }
    manifest.timings.insert("total".into(), started.elapsed().as_secs_f64());
    manifest.save(&out.join(MANIFEST_FILE))?;
    Ok(files.into_iter().map(|(p, _)| p).filter(|p| p.extension().is_some_and(|e| e == "tametask")).collect())
}

// ------------------------------------------------------------------ verify

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerifyReport {
    pub ok: bool,
    pub lines: Vec<String>,
}

impl VerifyReport {
    fn pass(&mut self, line: String) {
        self.lines.push(format!("PASS {line}"));
    }

    fn fail(&mut self, line: String) {
        self.ok = false;
        self.lines.push(format!("FAIL {line}"));
    }
}

fn histogram_text(labels: impl Iterator<Item = u8>) -> String {
    let mut h = BTreeMap::<u8, usize>::new();
    labels.for_each(|l| *h.entry(l).or_default() += 1);
    if h.len() <= 4 {
        return h.iter().map(|(l, n)| format!("{l}:{n}")).collect::<Vec<_>>().join(" ");
    }
    let (min, max) = (h.values().min().copied().unwrap_or(0), h.values().max().copied().unwrap_or(0));
    format!("{} labels, {min}..{max} images each", h.len())
}

fn verify_cifar(path: &Path, report: &mut VerifyReport) {
    let bytes = match fs::read(path) {
        Ok(b) => b,
        Err(e) => return report.fail(format!("{}: {e}", path.display())),
    };
    let expected = if path.file_name().is_some_and(|n| n.to_string_lossy().contains("test")) {
        cifar::TEST_RECORDS
    } else {
        cifar::TRAIN_RECORDS
    };
    match cifar::parse_records(path, &bytes) {
        Err(e) => report.fail(e.to_string()),
        Ok(records) if records.len() != expected => report.fail(format!(
            "{}: {} records, expected {expected}",
            path.display(),
            records.len()
        )),
        Ok(records) => report.pass(format!(
            "{}: {} images 3x32x32; fine {}; coarse {}",
            path.display(),
            records.len(),
            histogram_text(records.iter().map(|r| r.fine)),
            histogram_text(records.iter().map(|r| r.coarse))
        )),
    }
}

fn verify_task_file(path: &Path, expected_sha: Option<&str>, report: &mut VerifyReport) {
    let bytes = match fs::read(path) {
        Ok(b) => b,
        Err(e) => return report.fail(format!("{}: {e}", path.display())),
    };
    if expected_sha.is_some_and(|s| s != sha256_hex(&bytes)) {
        return report.fail(format!("{}: checksum differs from {TASK_INDEX}", path.display()));
    }
    match decode_task(path, &bytes) {
        Err(e) => report.fail(e.to_string()),
        Ok(b) => report.pass(format!(
            "{}: {} images 3x{}x{}; labels {}",
            path.display(),
            b.len(),
            b.height,
            b.width,
            histogram_text(b.labels.iter().copied())
        )),
    }
}

/// Checks the byte layout of a CIFAR-100 file or directory, a `TAMETASK`
/// file, or a generated task directory. Never fails; the report carries
/// the verdict.
pub fn cmd_verify(path: &Path) -> VerifyReport {
    let mut report = VerifyReport {
        ok: true,
        lines: Vec::new(),
    };
    if path.is_dir() {
        let index_path = path.join(TASK_INDEX);
        if index_path.is_file() {
            let index: Result<TaskIndex> = fs::read(&index_path)
                .map_err(|e| Error::io(&index_path, e))
                .and_then(|b| serde_json::from_slice(&b).map_err(|e| Error::format(&index_path, 0, e.to_string())));
            match index {
                Err(e) => report.fail(e.to_string()),
                Ok(index) => index
                    .tasks
                    .iter()
                    .for_each(|e| verify_task_file(&path.join(&e.file), Some(&e.sha256), &mut report)),
            }
            return report;
        }
        match cifar::locate_train_file(path) {
            Ok(train) => {
                verify_cifar(&train, &mut report);
                let test = train.with_file_name("test.bin");
                if test.is_file() {
                    verify_cifar(&test, &mut report);
                }
            }
            Err(e) => report.fail(e.to_string()),
        }
        return report;
    }
    let head = fs::read(path).map(|b| b.iter().take(8).copied().collect::<Vec<u8>>());
    match head {
        Err(e) => report.fail(format!("{}: {e}", path.display())),
        Ok(h) if h == TASK_MAGIC || path.extension().is_some_and(|e| e == "tametask") => verify_task_file(path, None, &mut report),
        Ok(h) if h == CKPT_MAGIC => report.pass(format!("{}: TAMECKPT checkpoint", path.display())),
        Ok(_) => verify_cifar(path, &mut report),
    }
    report
}
