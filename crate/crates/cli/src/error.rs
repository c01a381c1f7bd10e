use std::path::PathBuf;

use thiserror::Error;

/// Exit code for a run that finished but missed its numerical target.
pub const EXIT_FAILED: u8 = 1;
/// Exit code for bad flags, unreadable or malformed inputs.
pub const EXIT_USAGE: u8 = 2;
/// Exit code for a run whose result set is empty.
pub const EXIT_EMPTY: u8 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },

    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },

    #[error("max residual {max:e} is not below the tolerance {tol:e}")]
    Tolerance { max: f64, tol: f64 },

    #[error(transparent)]
    Core(#[from] ctcb::error::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        use ctcb::error::Error as E;
        match self {
            Self::Tolerance { .. } => EXIT_FAILED,
            Self::Core(E::Empty(_)) => EXIT_EMPTY,
            Self::Core(E::NoRoot { .. } | E::NonFinitePayoff { .. }) => EXIT_FAILED,
            _ => EXIT_USAGE,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

pub fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}
