use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("band limit {band_limit} is not admissible for a {n_theta}x{n_phi} grid (need L <= min(n_theta - 1, (n_phi + 1) / 2))")]
    Inadmissible {
        n_theta: usize,
        n_phi: usize,
        band_limit: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("non-finite value at {context}")]
    NonFinite { context: String },

    #[error("malformed {kind} file: {reason}")]
    Format { kind: &'static str, reason: String },

    #[error("memory estimate of {needed} bytes exceeds the cap of {cap} bytes")]
    MemoryCap { needed: u64, cap: u64 },

    #[error("index out of range: {0}")]
    OutOfRange(String),

    #[error("insufficient forcing history: {0}")]
    Forcing(String),

    #[error("rank-deficient problem: {0}")]
    RankDeficient(String),

    #[error("non-positive pivot in POTRF of diagonal tile {tile} (global row {row})")]
    NotPositiveDefinite { tile: usize, row: usize },

    #[error("covariance could not be made positive definite (nugget cap {cap:e} reached)")]
    NuggetExhausted { cap: f64 },

    #[error("incomplete model: {0}")]
    IncompleteModel(String),

    #[error("time slice {index}: {source}")]
    Slice {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn at_stage(stage: &'static str) -> impl FnOnce(Error) -> Error {
        move |e| Error::Stage {
            stage,
            source: Box::new(e),
        }
    }
}
