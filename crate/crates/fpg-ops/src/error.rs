//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by schedule construction, model queries, sampling,
/// world generation, and persistence.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("step index {t} out of range 1..={total}")]
    StepOutOfRange { t: usize, total: usize },

    #[error("world generation failed after {attempts} attempts (seed {seed})")]
    WorldGeneration { seed: u64, attempts: usize },

    #[error("checkpoint format error: {0}")]
    Checkpoint(String),

    #[error("dataset format error: {0}")]
    Dataset(String),

    #[error("training failed: {0}")]
    Training(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
