use std::path::Path;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised while reading a serialized kernel bank.
#[derive(Debug, Error, PartialEq)]
pub enum FormatError {
    #[error("bad magic bytes {0:?}, expected \"CSKB\"")]
    BadMagic([u8; 4]),
    #[error("unsupported bank format version {0}")]
    UnsupportedVersion(u32),
    #[error("truncated payload: needed {needed} bytes, found {found}")]
    Truncated { needed: usize, found: usize },
    #[error("inconsistent dimensions: {0}")]
    Dimension(String),
    #[error("corrupt field: {0}")]
    Corrupt(String),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite kernel value at ({row}, {col})")]
    NonFiniteEntry { row: usize, col: usize },

    #[error("kernel trace must be positive, got {0}")]
    NonPositiveTrace(f64),

    #[error("length mismatch: expected {expected}, got {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("nu = {nu} is infeasible for this label balance (maximum {max})")]
    InfeasibleNu { nu: f64, max: f64 },

    #[error("SMO stopped after {iterations} iterations with KKT violation {violation:e}")]
    NonConvergence { iterations: usize, violation: f64 },

    #[error(transparent)]
    Format(#[from] FormatError),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

/// Coarse error classes, used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Validation,
    Io,
    Solver,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Format(_) | Error::Io { .. } => ErrorKind::Io,
            Error::NonConvergence { .. } => ErrorKind::Solver,
            _ => ErrorKind::Validation,
        }
    }
}
