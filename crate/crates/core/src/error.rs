use std::io;

use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Operand sizes do not agree.
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension { context: String, expected: usize, actual: usize },

    /// An argument is outside the domain of the operation.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// A NaN/inf appeared, or a factorization broke down.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A solver step failed at a given continuation level and iteration.
    #[error("at level {level}, iteration {iter}: {source}")]
    Step {
        level: usize,
        iter: usize,
        #[source]
        source: Box<Error>,
    },

    /// Malformed input while decoding a file format.
    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn dim(context: impl Into<String>, expected: usize, actual: usize) -> Self {
        Error::Dimension {
            context: context.into(),
            expected,
            actual,
        }
    }

    pub(crate) fn at(self, level: usize, iter: usize) -> Self {
        Error::Step {
            level,
            iter,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
