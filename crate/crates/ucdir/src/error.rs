//! One error type for the whole crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Structural problem while recording an op on the tape.
    #[error("node {node} ({op}): {detail}")]
    Shape {
        node: usize,
        op: &'static str,
        detail: String,
    },

    /// An op produced NaN or infinity.
    #[error("node {node} ({op}): produced non-finite values")]
    NonFinite { node: usize, op: &'static str },

    /// L2 normalization refused an input with vanishing norm.
    #[error("node {node}: l2-normalize input norm {norm:.3e} is below 1e-8 (row {row})")]
    DegenerateNorm { node: usize, row: usize, norm: f64 },

    #[error("backward requires a scalar root, got shape {shape}")]
    NonScalarRoot { shape: String },

    /// Finite differencing hit a non-finite loss at a perturbed point.
    #[error("gradient check: non-finite loss probing parameter {param}, coordinate {coord}")]
    NonFiniteProbe { param: usize, coord: usize },

    /// Encoder output norm vanished before normalization: representation collapse.
    #[error("encoder collapse: pre-normalization output norm {norm:.3e} is below 1e-8")]
    Collapse { norm: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("clustering: {0}")]
    Clustering(String),

    #[error("data: {0}")]
    Data(String),

    #[error("dataset line {line}: {msg}")]
    DatasetLine { line: usize, msg: String },

    #[error("no bank entry for sample id {0}")]
    MissingBankEntry(u64),

    #[error("training: {0}")]
    Training(String),

    #[error("evaluation: {0}")]
    Evaluation(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}
