use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: expected {expected}, got {got}")]
    DimensionMismatch {
        op: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("index {index} out of range for {what} of length {len}")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("bad magic: expected {expected}, found {found}")]
    BadMagic { expected: String, found: String },

    #[error("truncated data: {0}")]
    Truncated(String),

    #[error("manifest disagrees with blob: {0}")]
    ManifestMismatch(String),

    #[error("malformed JSON document: {0}")]
    Json(#[from] serde_json::Error),

    #[error("power iteration did not converge after {iterations} iterations (last L1 change {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("calibration set is empty")]
    EmptyCalibration,

    #[error("auxiliary node information sums to zero in layer {layer}")]
    ZeroBeta { layer: usize },

    #[error("method {0} requires calibration statistics")]
    MissingCalibration(&'static str),

    #[error("the final layer (index {0}) is not prunable")]
    FinalLayer(usize),

    #[error("plan does not match model: {0}")]
    StalePlan(String),

    #[error("overall sparsity {requested} is unachievable: needs local sparsity {local:.4} >= 1")]
    Unachievable { requested: f64, local: f64 },

    #[error("training diverged: loss is {loss} at step {step}")]
    NanLoss { step: usize, loss: f64 },

    #[error("token id {id} out of range for vocabulary of {vocab}")]
    TokenOutOfRange { id: usize, vocab: usize },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
