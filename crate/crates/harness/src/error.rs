//! Harness-level errors mapped onto process exit codes.

use masim_core::SimError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),

    #[error("{context}: {source}")]
    Sim {
        source: SimError,
        context: String,
    },

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("sweep completed partially: {failed} of {total} points failed")]
    PartialSweep { failed: usize, total: usize },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
}

impl HarnessError {
    pub fn sim(source: SimError, context: impl Into<String>) -> Self {
        Self::Sim { source, context: context.into() }
    }

    /// CLI exit code: 0 success, 2 config, 3 numeric, 4 partial sweep.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Calibration(_) => 3,
            HarnessError::Sim { source, .. } => match source {
                SimError::InvalidInput(_) | SimError::ShapeMismatch(_) => 2,
                _ => 3,
            },
            HarnessError::PartialSweep { .. } => 4,
            HarnessError::Io(_) | HarnessError::Csv(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
