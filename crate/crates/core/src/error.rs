use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dataset is empty")]
    EmptyDataset,

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("location ({s_h}, {s_v}) lies outside the unit square")]
    OutOfDomain { s_h: f64, s_v: f64 },

    #[error("grid resolution must be at least 1")]
    ZeroResolution,

    #[error("block graph is disconnected: {} components with sizes {sizes:?}", sizes.len())]
    Disconnected { sizes: Vec<usize> },

    #[error("edge {0} is not part of the spanning tree")]
    EdgeNotInTree(usize),

    #[error("weights cover {got} edges but the graph has {expected}")]
    WeightCount { expected: usize, got: usize },

    #[error("non-finite likelihood term in cluster {cluster}")]
    NonFinite { cluster: usize },

    #[error("sufficient statistics mismatch: {0}")]
    StatsMismatch(String),

    #[error("cluster has no observations")]
    EmptyCluster,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{0}")]
    Invalid(String),

    #[error("csv error at row {row}: {msg}")]
    Csv { row: usize, msg: String },

    #[error("samples line {line}: {msg}")]
    Record { line: usize, msg: String },
    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
