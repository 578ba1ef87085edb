use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("vertex {0} has zero degree")]
    IsolatedVertex(usize),

    #[error("row {0} is a zero vector; cosine similarity is undefined")]
    ZeroVector(usize),

    #[error("symmetric eigensolver did not converge")]
    ConvergenceFailure,

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid range: {0}")]
    InvalidRange(String),

    #[error("invalid neighbour count k={k} for {n} vertices")]
    InvalidK { k: usize, n: usize },

    #[error("invalid size: {0}")]
    InvalidSize(String),

    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("class {0:?} has fewer than 2 samples")]
    ClassTooSmall(String),

    #[error("class {0:?} has no samples")]
    EmptyClass(String),

    #[error("feature pool cannot supply the requested episode: {0}")]
    InsufficientPool(String),

    #[error("need at least 2 values for a confidence interval, got {0}")]
    TooFewSamples(usize),

    #[error("{path}:{line}: {msg}")]
    ParseError { path: PathBuf, line: usize, msg: String },

    #[error("{path}:{line}: expected {expected} values, found {found}")]
    InconsistentDimension { path: PathBuf, line: usize, expected: usize, found: usize },

    #[error("{0}: bad magic, not a dense feature file")]
    BadMagic(PathBuf),

    #[error("{path}: truncated file ({msg})")]
    TruncatedFile { path: PathBuf, msg: String },

    #[error("invalid file: {0}")]
    InvalidFile(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
