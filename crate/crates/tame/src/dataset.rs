//! Resolves the configured dataset into initialization tasks and sequences for one seed.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tame_core::task::{build_sequences, LabeledImages, Sequence, Task, TaskRole, TaskSource};

use crate::cifar;
use crate::config::{DatasetSpec, ExperimentSpec};
use crate::container::{decode_task, encode_task, TaskBlock};
use crate::error::{Error, Result};
use crate::fsutil::{file_sha256, sha256_hex};

/// Index written next to generated `TAMETASK` files.
pub const TASK_INDEX: &str = "tasks.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskIndexEntry {
    pub seed: u64,
    /// `None` for initialization tasks.
    pub sequence_id: Option<String>,
    pub task_id: String,
    pub class_pair: (u32, u32),
    pub archetype: Option<usize>,
    /// Path relative to the index file.
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskIndex {
    pub tasks: Vec<TaskIndexEntry>,
}

pub enum Dataset {
    Synthetic { image_size: usize },
    Cifar { images: LabeledImages, sha256: String },
    TaskDir { root: PathBuf, index: TaskIndex, sha256: String },
}

/// Tasks of one seed and a content hash identifying them.
pub struct SeedData {
    pub init: Vec<Task>,
    pub sequences: Vec<Sequence>,
    pub sha256: String,
}

pub fn task_block(task: &Task) -> TaskBlock {
    TaskBlock {
        height: task.height,
        width: task.width,
        labels: task.labels.clone(),
        pixels: task.pixels.clone(),
    }
}

fn hash_tasks(init: &[Task], sequences: &[Sequence]) -> String {
    let mut bytes = Vec::new();
    let all = init.iter().map(|t| ("init", t)).chain(sequences.iter().flat_map(|s| s.tasks.iter().map(move |t| (s.sequence_id.as_str(), t))));
    for (group, t) in all {
        bytes.extend_from_slice(format!("{group}/{}/{}:{}\n", t.task_id, t.class_pair.0, t.class_pair.1).as_bytes());
        bytes.extend(encode_task(&task_block(t)));
    }
    sha256_hex(&bytes)
}

impl Dataset {
    pub fn open(spec: &ExperimentSpec) -> Result<Self> {
        match &spec.dataset {
            DatasetSpec::Synthetic => Ok(Dataset::Synthetic {
                image_size: spec.image_size,
            }),
            DatasetSpec::Unset => Err(Error::Dataset(format!(
                "no dataset configured; pass --dataset <path|synthetic> or set {}",
                crate::config::DATA_DIR_ENV
            ))),
            DatasetSpec::Path(p) if p.join(TASK_INDEX).is_file() => {
                let index_path = p.join(TASK_INDEX);
                let bytes = fs::read(&index_path).map_err(|e| Error::io(&index_path, e))?;
                let index: TaskIndex = serde_json::from_slice(&bytes)
                    .map_err(|e| Error::format(&index_path, 0, format!("invalid task index: {e}")))?;
                Ok(Dataset::TaskDir {
                    root: p.clone(),
                    index,
                    sha256: sha256_hex(&bytes),
                })
            }
            DatasetSpec::Path(p) => {
                if !p.exists() {
                    return Err(Error::Dataset(format!(
                        "{} does not exist; point --dataset or {} at the extracted CIFAR-100 binary archive",
                        p.display(),
                        crate::config::DATA_DIR_ENV
                    )));
                }
                let file = cifar::locate_train_file(p)?;
                let images = cifar::load_train(p)?;
                Ok(Dataset::Cifar {
                    images,
                    sha256: file_sha256(&file)?,
                })
            }
        }
    }

    /// Human-readable identity recorded in manifests.
    pub fn describe(&self) -> String {
        match self {
            Dataset::Synthetic { image_size } => format!("synthetic-{image_size}"),
            Dataset::Cifar { sha256, .. } => format!("cifar100:{sha256}"),
            Dataset::TaskDir { sha256, .. } => format!("tametask:{sha256}"),
        }
    }

    pub fn seed_data(&self, spec: &ExperimentSpec, seed: u64) -> Result<SeedData> {
        let (init, sequences) = match self {
            Dataset::Synthetic { image_size } => build_sequences(TaskSource::Synthetic { image_size: *image_size }, &spec.plan(), seed)?,
            Dataset::Cifar { images, .. } => build_sequences(TaskSource::Cifar(images), &spec.plan(), seed)?,
            Dataset::TaskDir { root, index, .. } => load_task_dir(root, index, seed)?,
        };
        if init.len() != spec.n_experts {
            return Err(Error::Dataset(format!("{} initialization tasks for {} experts", init.len(), spec.n_experts)));
        }
        let sha256 = hash_tasks(&init, &sequences);
        Ok(SeedData { init, sequences, sha256 })
    }
}

fn load_task_dir(root: &Path, index: &TaskIndex, seed: u64) -> Result<(Vec<Task>, Vec<Sequence>)> {
    let mut init = Vec::new();
    let mut sequences: Vec<Sequence> = Vec::new();
    for e in index.tasks.iter().filter(|e| e.seed == seed) {
        let path = root.join(&e.file);
        let bytes = fs::read(&path).map_err(|err| Error::io(&path, err))?;
        if sha256_hex(&bytes) != e.sha256 {
            return Err(Error::Mismatch(format!("{} does not match its checksum in {TASK_INDEX}", path.display())));
        }
        let block = decode_task(&path, &bytes)?;
        let task = Task {
            task_id: e.task_id.clone(),
            role: if e.sequence_id.is_some() { TaskRole::Lifelong } else { TaskRole::Initialization },
            height: block.height,
            width: block.width,
            pixels: block.pixels,
            labels: block.labels,
            class_pair: e.class_pair,
            archetype: e.archetype,
        };
        task.validate()?;
        match &e.sequence_id {
            None => init.push(task),
            Some(id) => match sequences.iter_mut().find(|s| &s.sequence_id == id) {
                Some(s) => s.tasks.push(task),
                None => sequences.push(Sequence {
                    sequence_id: id.clone(),
                    tasks: vec![task],
                }),
            },
        }
    }
    if init.is_empty() {
        return Err(Error::Dataset(format!("{} lists no tasks for seed {seed}", root.join(TASK_INDEX).display())));
    }
    Ok((init, sequences))
}
