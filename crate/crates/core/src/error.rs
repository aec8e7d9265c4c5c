use std::path::PathBuf;

/// Errors produced by the segmentation library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid shape: {0}")]
    InvalidShape(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },
    #[error("input contains non-finite values")]
    NonFinite,
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("cube is already normalized")]
    AlreadyNormalized,
    #[error("cube must be normalized first")]
    NotNormalized,
    #[error("malformed array file {path}: {reason}")]
    Format { path: PathBuf, reason: String },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("internal invariant violated: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;
