use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Failures raised by an answerer.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum ModelError {
    /// Network-level failure talking to a remote answerer. Safe to retry.
    #[error("transport error: {0}")]
    Transport(String),
    /// The answerer replied, but the payload broke the wire contract.
    #[error("protocol error ({check}): {detail}")]
    Protocol { check: &'static str, detail: String },
    #[error("invalid model input: {0}")]
    InvalidInput(String),
    #[error("model configuration error: {0}")]
    Config(String),
}

impl ModelError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, ModelError::Transport(_))
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("contract violation: {0}")]
    Contract(String),

    #[error(transparent)]
    Model(#[from] ModelError),

    /// A model call failed while scoring a perturbation sample.
    #[error("model failed on sample {sample} (mask {mask}): {source}")]
    Sample {
        sample: usize,
        mask: String,
        #[source]
        source: ModelError,
    },

    /// A model call failed part-way through a reduction trace. The completed
    /// steps are kept so the caller can still inspect them.
    #[error("reduction of {example_id} stopped after {} steps: {source}", completed.len())]
    PartialTrace {
        example_id: String,
        completed: Vec<crate::reducer::ReductionStep>,
        #[source]
        source: ModelError,
    },

    #[error("singular system: {0}; use ridge alpha > 0")]
    Singular(String),

    #[error("answer target not found: {0}")]
    TargetNotFound(String),

    #[error("dataset parse error at {path}: {message}")]
    Parse { path: String, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
