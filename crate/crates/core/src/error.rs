use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A quantity was requested outside the domain where it is defined.
    #[error("{0}")]
    Domain(String),

    /// A configuration value was rejected. `field` names the offending key.
    #[error("{field}: {message}")]
    Config { field: String, message: String },

    /// An estimator could not produce a value from the supplied data.
    #[error("estimation failed: {0}")]
    Estimation(String),

    /// A record in an input file could not be decoded.
    #[error("{path}: record {index}: {message}")]
    Format {
        path: PathBuf,
        index: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn estimation(msg: impl Into<String>) -> Self {
        Error::Estimation(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
