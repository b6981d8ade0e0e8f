//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// A malformed line in a text input (dataset, embedding, lexicon or
    /// config file). `line` is 1-based.
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    /// Inconsistent or unusable data that is not tied to a single line.
    #[error("{0}")]
    Data(String),

    /// A configuration that cannot be run (bad mode combination, bad flag
    /// value, shape mismatch between config and tables).
    #[error("{0}")]
    Config(String),

    /// Numeric failure: divergence during training or a failed check.
    #[error("{0}")]
    Numeric(String),
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
