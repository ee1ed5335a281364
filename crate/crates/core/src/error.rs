use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the detection pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("not an FVEC file")]
    BadMagic,

    #[error("unsupported FVEC version {0}")]
    BadVersion(u32),

    #[error("truncated payload: header declares {expected} values, found {found}")]
    TruncatedPayload { expected: u64, found: u64 },

    #[error("trailing bytes after FVEC payload ({0} bytes)")]
    TrailingBytes(u64),

    #[error("dimension overflow: {rows} x {cols}")]
    DimensionOverflow { rows: u64, cols: u64 },

    #[error("non-finite entry at ({row},{col})")]
    NonFinite { row: usize, col: usize },

    #[error("empty matrix: rows and cols must both be at least 1")]
    EmptyMatrix,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("manifest {path}: {msg}")]
    Manifest { path: PathBuf, msg: String },

    #[error("label count {labels} does not match feature rows {rows}")]
    LabelCount { labels: usize, rows: usize },

    #[error("class indices are not contiguous from 0: missing class {0}")]
    NonContiguousLabels(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("cluster {0} is empty")]
    EmptyCluster(usize),

    #[error(
        "Cholesky factorization failed at pivot {pivot} (value {value:e}); smallest eigenvalue estimate {min_eigenvalue:e}"
    )]
    NotPositiveDefinite {
        pivot: usize,
        value: f64,
        min_eigenvalue: f64,
    },

    #[error("zero-norm vector")]
    ZeroNorm,

    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("gradient shape mismatch: expected {expected} values, got {got}")]
    GradientShape { expected: usize, got: usize },

    #[error("evaluation: {0}")]
    Evaluation(String),

    #[error("model directory {path}: {msg}")]
    Model { path: PathBuf, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
