use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    /// More than the tolerated share of input records could not be parsed.
    #[error("{malformed} of {total} records malformed (first bad lines: {lines:?})")]
    TooManyMalformed {
        malformed: usize,
        total: usize,
        lines: Vec<usize>,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown player `{0}`")]
    UnknownPlayer(String),

    #[error("no intimacy rule for event type {0:?}")]
    MissingRule(crate::ingest::EventType),

    #[error("need at least {needed} points, got {got}")]
    NotEnoughPoints { needed: usize, got: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("training diverged at epoch {epoch}: loss {loss}")]
    Diverged { epoch: usize, loss: f64 },

    #[error("stage `{stage}` has not been run; run `{stage}` first")]
    MissingStage { stage: &'static str },

    #[error("corrupt store artifact {path}: {reason}")]
    CorruptArtifact { path: String, reason: String },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
