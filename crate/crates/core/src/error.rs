use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The forward solver produced a non-finite value.
    #[error("numerical failure: non-finite temperature at node {node}, time level {level}")]
    NumericalFailure { node: usize, level: usize },

    /// A forward solve failed while perturbing one parameter.
    #[error("sensitivity solve failed for parameter {index}: {source}")]
    Sensitivity {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    /// A statistic is undefined for the given input (e.g. zero variance).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// A data file could not be parsed.
    #[error("{path}: row {row}: {message}")]
    Parse {
        path: PathBuf,
        row: usize,
        message: String,
    },

    /// A configuration key is missing or invalid.
    #[error("invalid configuration key `{key}`: {message}")]
    Config { key: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
