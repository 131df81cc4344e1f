use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("non-finite value {value} produced by `{primitive}`")]
    ForwardDomain { primitive: &'static str, value: f64 },

    #[error("tape error: {0}")]
    Tape(String),

    #[error("invalid input `{field}`: {reason}")]
    InvalidInput { field: &'static str, reason: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parameter ledger: {0}")]
    Ledger(String),

    #[error("score undefined: {0}")]
    UndefinedScore(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("{0}")]
    Data(String),

    #[error("i/o error on {path}: {message}")]
    Io { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, err: impl std::fmt::Display) -> Self {
        Error::Io {
            path: path.into(),
            message: err.to_string(),
        }
    }

    pub(crate) fn input(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidInput {
            field,
            reason: reason.into(),
        }
    }
}
