//! CIFAR-100 binary version: each record is one coarse-label byte, one
//! fine-label byte and 3072 pixel bytes (1024 red, 1024 green, 1024 blue,
//! row-major), i.e. already in `[3, 32, 32]` order.

use std::fs;
use std::path::{Path, PathBuf};

use tame_core::task::LabeledImages;

use crate::error::{Error, Result};

pub const SIDE: usize = 32;
pub const PIXELS: usize = 3 * SIDE * SIDE;
pub const RECORD_BYTES: usize = 2 + PIXELS;
pub const TRAIN_RECORDS: usize = 50_000;
pub const TEST_RECORDS: usize = 10_000;
pub const FINE_CLASSES: usize = 100;
pub const COARSE_CLASSES: usize = 20;

/// Name of the training file inside the extracted archive directory.
pub const TRAIN_FILE: &str = "train.bin";
pub const ARCHIVE_DIR: &str = "cifar-100-binary";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Record<'a> {
    pub coarse: u8,
    pub fine: u8,
    pub pixels: &'a [u8],
}

impl Record<'_> {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(RECORD_BYTES);
        out.push(self.coarse);
        out.push(self.fine);
        out.extend_from_slice(self.pixels);
        out
    }
}

/// Splits raw file bytes into records, rejecting empty or truncated input.
pub fn parse_records<'a>(path: &Path, bytes: &'a [u8]) -> Result<Vec<Record<'a>>> {
    if bytes.is_empty() {
        return Err(Error::format(path, 0, "empty CIFAR-100 file"));
    }
    let whole = bytes.len() / RECORD_BYTES;
    if bytes.len() % RECORD_BYTES != 0 {
        let offset = (whole * RECORD_BYTES) as u64;
        return Err(Error::format(
            path,
            offset,
            format!(
                "truncated record {whole}: {} of {RECORD_BYTES} bytes present",
                bytes.len() - whole * RECORD_BYTES
            ),
        ));
    }
    bytes
        .chunks_exact(RECORD_BYTES)
        .enumerate()
        .map(|(i, r)| {
            if r[1] as usize >= FINE_CLASSES || r[0] as usize >= COARSE_CLASSES {
                return Err(Error::format(
                    path,
                    (i * RECORD_BYTES) as u64,
                    format!("record {i} has labels coarse={} fine={}", r[0], r[1]),
                ));
            }
            Ok(Record {
                coarse: r[0],
                fine: r[1],
                pixels: &r[2..],
            })
        })
        .collect()
}

/// Finds the training file under a dataset root: the file itself, `root/train.bin`
/// or `root/cifar-100-binary/train.bin`.
pub fn locate_train_file(root: &Path) -> Result<PathBuf> {
    if root.is_file() {
        return Ok(root.to_path_buf());
    }
    for candidate in [root.join(TRAIN_FILE), root.join(ARCHIVE_DIR).join(TRAIN_FILE)] {
        if candidate.is_file() {
            return Ok(candidate);
        }
    }
    Err(Error::Dataset(format!(
        "no CIFAR-100 training file under {}; download the binary version from \
         https://www.cs.toronto.edu/~kriz/cifar-100-binary.tar.gz, extract it and pass \
         the directory with --dataset or the TAME_DATA_DIR environment variable",
        root.display()
    )))
}

/// Loads the 50,000-image training split with fine labels.
pub fn load_train(root: &Path) -> Result<LabeledImages> {
    let path = locate_train_file(root)?;
    let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
    let expected = TRAIN_RECORDS * RECORD_BYTES;
    if bytes.len() != expected {
        let records = parse_records(&path, &bytes)?;
        return Err(Error::format(
            &path,
            bytes.len() as u64,
            format!("{} records, expected {TRAIN_RECORDS} ({expected} bytes)", records.len()),
        ));
    }
    let records = parse_records(&path, &bytes)?;
    let mut pixels = Vec::with_capacity(records.len() * PIXELS);
    let mut labels = Vec::with_capacity(records.len());
    for r in &records {
        pixels.extend_from_slice(r.pixels);
        labels.push(r.fine);
    }
    Ok(LabeledImages {
        height: SIDE,
        width: SIDE,
        pixels,
        labels,
    })
}
