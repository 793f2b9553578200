use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("covariance factorization failed for n = {n} nodes, length scale {length} (last jitter {jitter:e})")]
    Factorization { n: usize, length: f64, jitter: f64 },

    #[error("coefficient field must be positive; found {value} at node {index}")]
    NonPositiveCoefficient { index: usize, value: f64 },

    #[error("singular system: zero pivot at row {row}")]
    Singular { row: usize },

    #[error("zero diagonal entry at row {row}")]
    ZeroDiagonal { row: usize },

    #[error("dense diagnostic refused: n = {n} exceeds cap {cap}")]
    SizeCap { n: usize, cap: usize },

    #[error("query coordinate {0} lies outside [0, 1]")]
    QueryOutOfDomain(f64),

    #[error("empty Anderson history")]
    EmptyHistory,

    #[error("zero search direction")]
    ZeroDirection,

    #[error("non-finite value in batch member {batch_index}")]
    NonFiniteGradient { batch_index: usize },

    #[error("non-finite iterate at unrolled cycle {cycle}")]
    NonFiniteIterate { cycle: usize },

    #[error("objective/dataset mismatch: {0}")]
    ObjectiveMismatch(String),

    #[error("bad file format in {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }
}
