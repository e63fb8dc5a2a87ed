use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

/// Failures of the experiment runner. Each maps to a process exit code.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    /// Malformed on-disk data; `offset` is the first byte that could not be read.
    #[error("{}: {message} at byte offset {offset}", path.display())]
    Format {
        path: PathBuf,
        offset: u64,
        message: String,
    },
    #[error("dataset: {0}")]
    Dataset(String),
    #[error("config: {0}")]
    Config(String),
    /// Stored checkpoints or outputs do not belong to the requested spec.
    #[error("refusing to run: {0}")]
    Mismatch(String),
    #[error(transparent)]
    Core(#[from] tame_core::Error),
    #[error("interrupted after {0} completed cells")]
    Interrupted(usize),
    #[error("{0}")]
    Runtime(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn io(path: &Path, source: io::Error) -> Self {
        Error::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn format(path: &Path, offset: u64, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.to_path_buf(),
            offset,
            message: message.into(),
        }
    }

    /// 2 for input/ingestion problems, 1 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { source, .. } if source.kind() == io::ErrorKind::NotFound => 2,
            Error::Format { .. } | Error::Dataset(_) | Error::Config(_) | Error::Mismatch(_) => 2,
            Error::Core(tame_core::Error::InsufficientData(_)) => 2,
            _ => 1,
        }
    }
}
