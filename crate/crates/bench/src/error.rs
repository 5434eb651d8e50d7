use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = BenchError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("usage: {0}")]
    Usage(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Model(#[from] mfvi_core::Error),

    #[error("{failed} check(s) failed")]
    CheckFailed { failed: usize },
}

impl BenchError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        BenchError::Io {
            path: path.into(),
            source,
        }
    }

    /// 1 for failed checks and model errors, 2 for usage or config errors, 3 for IO.
    pub fn exit_code(&self) -> u8 {
        match self {
            BenchError::CheckFailed { .. } | BenchError::Model(_) => 1,
            BenchError::Usage(_) | BenchError::Config(_) => 2,
            BenchError::Io { .. } | BenchError::Csv(_) => 3,
        }
    }
}
