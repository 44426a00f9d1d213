use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the simulator, optimizer and harness.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration or preset parameter is out of range.
    #[error("invalid configuration: `{field}` {reason}")]
    Config { field: String, reason: String },

    /// A scenario value violates one of its invariants.
    #[error("scenario validation failed: {0}")]
    Validation(String),

    /// A scenario or config file could not be parsed.
    #[error("parse error in {path} at line {line}, column {column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    /// A caller broke a documented precondition.
    #[error("contract violated: {0}")]
    Contract(String),

    /// A grid position outside the world bounds.
    #[error("cell ({x}, {y}) is outside a {side}x{side} grid")]
    OutOfBounds { x: i64, y: i64, side: usize },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
