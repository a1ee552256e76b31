//! Crate-wide error type.
//!
//! Shape mismatches on numeric hot paths are treated as programmer error and
//! panic via `assert!`; everything that depends on runtime data (degenerate
//! inputs, malformed files, invalid configuration) is reported through
//! [`CoreError`].

use thiserror::Error;

pub type Result<T> = std::result::Result<T, CoreError>;

#[derive(Debug, Error)]
pub enum CoreError {
    /// A data column is constant (zero variance), so it cannot be standardized
    /// or ordered causally.
    #[error("degenerate input: column {column} has zero variance")]
    DegenerateColumn { column: String },

    /// Fewer samples than the operation requires.
    #[error("not enough samples: need at least {needed}, got {got}")]
    NotEnoughSamples { needed: usize, got: usize },

    /// The structural coefficient matrix induces a cycle.
    #[error("structural matrix is cyclic: no topological order exists")]
    CyclicSem,

    /// A gradient or loss turned non-finite; the update was rejected.
    #[error("non-finite {what} rejected")]
    NonFinite { what: String },

    /// Configuration field failed validation.
    #[error("invalid config field `{field}`: {message}")]
    InvalidConfig { field: String, message: String },

    /// Malformed row in a data file.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Malformed or incompatible binary checkpoint.
    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    /// A fatal sub-error aborted training; names the step and stage.
    #[error("training aborted at step {step} in stage {stage}: {source}")]
    Train {
        step: usize,
        stage: String,
        #[source]
        source: Box<CoreError>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CoreError {
    pub fn invalid_config(field: &str, message: impl Into<String>) -> Self {
        CoreError::InvalidConfig {
            field: field.to_string(),
            message: message.into(),
        }
    }
}
