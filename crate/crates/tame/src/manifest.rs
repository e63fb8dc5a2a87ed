//! Run manifests: spec snapshot, content hashes and per-phase timings.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::ExperimentSpec;
use crate::error::{Error, Result};
use crate::fsutil::write_atomic;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    /// Canonical `key -> value` snapshot of the spec.
    pub spec: BTreeMap<String, String>,
    /// Dataset identity per seed (`seed-<n>` -> SHA-256 of the task bytes).
    pub datasets: BTreeMap<String, String>,
    /// Pretraining identity per seed, checked by `run` before using checkpoints.
    pub keys: BTreeMap<String, String>,
    /// Checkpoint files (relative path -> SHA-256).
    pub checkpoints: BTreeMap<String, String>,
    /// Every output file written by the command (relative path -> SHA-256).
    pub outputs: BTreeMap<String, String>,
    /// Wall-clock seconds per phase.
    pub timings: BTreeMap<String, f64>,
}

impl RunManifest {
    pub fn new(command: &str, spec: &ExperimentSpec) -> Self {
        RunManifest {
            command: command.into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            spec: spec.canonical().into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
            ..Default::default()
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_slice(&bytes).map_err(|e| Error::format(path, 0, format!("invalid manifest: {e}")))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(self).expect("manifest serializes");
        bytes.push(b'\n');
        write_atomic(path, &bytes)
    }
}

pub fn seed_key(seed: u64) -> String {
    format!("seed-{seed}")
}
