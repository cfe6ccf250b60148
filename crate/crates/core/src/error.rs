use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the sensing library and the experiment harness.
#[derive(Debug, Error)]
pub enum SenseError {
    /// A configuration field failed validation.
    #[error("invalid config field `{field}`: {reason}")]
    Config { field: String, reason: String },

    /// An operation was called outside its precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The sample covariance is rank deficient (smallest eigenvalue ≤ 0).
    #[error("rank-deficient sample covariance: smallest eigenvalue {0:e}")]
    RankDeficient(f64),

    /// The population spectrum has a single distinct eigenvalue.
    #[error("population eigenvalues are all identical; no signal structure to detect")]
    IdenticalEigenvalues,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A table or config file could not be parsed.
    #[error("{path}: {reason}")]
    Parse { path: PathBuf, reason: String },
}

impl SenseError {
    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        SenseError::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn arg(msg: impl Into<String>) -> Self {
        SenseError::InvalidArgument(msg.into())
    }

    pub fn is_config(&self) -> bool {
        matches!(self, SenseError::Config { .. } | SenseError::Parse { .. })
    }
}

pub type Result<T> = std::result::Result<T, SenseError>;
