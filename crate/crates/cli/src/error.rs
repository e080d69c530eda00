use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Validation(String),

    #[error(transparent)]
    Engine(#[from] spinbath::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("sweep incomplete: {failed} of {total} points failed")]
    PartialSweep { failed: usize, total: usize },
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// 0 success, 1 validation, 2 numerical or I/O failure, 3 partial sweep.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Engine(e) if e.is_validation() => 1,
            CliError::Engine(_) | CliError::Io { .. } | CliError::Calibration(_) => 2,
            CliError::PartialSweep { .. } => 3,
        }
    }
}
