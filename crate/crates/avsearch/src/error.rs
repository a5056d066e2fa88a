//! Crate-wide error type.

use thiserror::Error;

/// Errors produced while parsing inputs or validating model state.
#[derive(Debug, Error)]
pub enum AvsError {
    /// A text input (scenario, filter bank, config) failed to parse.
    #[error("parse error at line {line}: {msg}")]
    Parse {
        /// 1-based line number in the offending input.
        line: usize,
        /// Human-readable description of the problem.
        msg: String,
    },

    /// Input parsed but violates a semantic requirement.
    #[error("validation error: {0}")]
    Validation(String),

    /// Two grids or images that must share dimensions do not.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// Underlying I/O failure.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl AvsError {
    /// Shorthand for a [`AvsError::Parse`] with formatted message.
    pub fn parse(line: usize, msg: impl Into<String>) -> Self {
        AvsError::Parse {
            line,
            msg: msg.into(),
        }
    }
}
