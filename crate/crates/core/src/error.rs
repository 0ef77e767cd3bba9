use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, HipError>;

#[derive(Debug, Error)]
pub enum HipError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("model file field `{field}`: {reason}")]
    ModelFormat { field: String, reason: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("sarsa diverged at episode {episode}: coefficient magnitude {magnitude:e}")]
    Divergence { episode: usize, magnitude: f64 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl HipError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        HipError::InvalidInput(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        HipError::NumericalFailure(msg.into())
    }

    pub(crate) fn format(field: impl Into<String>, reason: impl Into<String>) -> Self {
        HipError::ModelFormat {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HipError::Io {
            path: path.into(),
            source,
        }
    }
}
