//! Error type shared across the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// Malformed input data. `row` is 1-based and counts the header as row 1;
    /// `column` is the variable name when known, otherwise a positional label.
    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A noisy-OR candidate whose likelihood is -inf: some record sets the
    /// child while every candidate parent is absent.
    #[error(
        "infeasible noisy-OR candidate: a record sets the child to 1 while \
         every candidate parent is 0"
    )]
    InfeasibleCandidate,

    #[error("{n} variables exceed the exact-search limit of {limit}")]
    Capacity { n: usize, limit: usize },

    #[error("evidence has zero probability under the network")]
    InconsistentEvidence,
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(row: usize, column: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            row,
            column: column.into(),
            message: message.into(),
        }
    }

    pub fn invalid(message: impl Into<String>) -> Self {
        Error::InvalidArgument(message.into())
    }
}
