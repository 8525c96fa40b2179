use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by the fitting pipeline.
#[derive(Debug, Error)]
pub enum FitError {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {msg}", path.display())]
    Format { path: PathBuf, msg: String },
}

impl FitError {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        FitError::Shape(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        FitError::Config(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        FitError::Domain(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        FitError::Numeric(msg.into())
    }

    /// Copy of the error with the same variant and message.
    pub(crate) fn clone_msg(&self) -> Self {
        match self {
            FitError::Shape(m) => FitError::Shape(m.clone()),
            FitError::Config(m) => FitError::Config(m.clone()),
            FitError::Domain(m) => FitError::Domain(m.clone()),
            FitError::Numeric(m) => FitError::Numeric(m.clone()),
            FitError::Io { path, source } => FitError::Io {
                path: path.clone(),
                source: std::io::Error::new(source.kind(), source.to_string()),
            },
            FitError::Format { path, msg } => FitError::Format { path: path.clone(), msg: msg.clone() },
        }
    }
}

pub type Result<T> = std::result::Result<T, FitError>;
