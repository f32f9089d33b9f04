use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by mesh handling, assembly, and the solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("mesh validation failed: {0}")]
    MeshValidation(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("singular system: {0}")]
    SingularSystem(String),

    #[error("factorization failed: {0}")]
    Factorization(String),

    #[error("operator dump is corrupt: {0}")]
    CorruptDump(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
