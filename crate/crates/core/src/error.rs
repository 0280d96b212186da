use thiserror::Error;

/// Errors produced by model construction, numerics, data loading and checkpoint I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value {value} at index {index}")]
    NonFinite { index: usize, value: f64 },

    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("operation requires the {expected} variant")]
    WrongVariant { expected: &'static str },

    #[error("sigma inverse target {target} at coordinate {coordinate} lies outside [{low}, {high}]")]
    SigmaOutOfRange {
        coordinate: usize,
        target: f64,
        low: f64,
        high: f64,
    },

    #[error("sigma map is not strictly increasing near s = {at}")]
    NonBijective { at: f64 },

    #[error("fixed-point iteration diverged at iteration {iteration}")]
    Diverged { iteration: usize },

    #[error("training diverged in epoch {epoch}, step {step}")]
    TrainingDiverged { epoch: usize, step: usize },

    #[error("non-finite adjoint at backward iteration {iteration} (max |u| = {max_abs})")]
    NonFiniteAdjoint { iteration: usize, max_abs: f64 },

    #[error("unknown map kind: {0}")]
    UnknownMapKind(String),

    #[error("idx parse error: {0}")]
    Idx(String),

    #[error("idx payload truncated: expected {expected} bytes, found {actual}")]
    IdxTruncated { expected: usize, actual: usize },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            what,
            expected,
            got,
        })
    }
}
