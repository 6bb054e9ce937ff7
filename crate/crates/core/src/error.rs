use std::io;

use thiserror::Error;

/// Errors produced by the library and surfaced by the `msbm` binary.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller violated an operation's precondition (bad mode, shape
    /// mismatch, rank too large, unknown scenario, ...).
    #[error("usage error: {0}")]
    Usage(String),

    #[error("I/O error: {0}")]
    Io(#[from] io::Error),

    /// Malformed input. `location` names a byte offset for binary files and a
    /// 1-based line number for text files.
    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    /// No candidate constant in the calibration grid met the acceptance level.
    #[error("calibration grid exhausted: best acceptance {best_acceptance:.3} < required {required:.3}; enlarge the grid")]
    GridExhausted { best_acceptance: f64, required: f64 },

    #[error("internal numerical error: {0}")]
    Numerical(String),
}

impl Error {
    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub(crate) fn parse_at_byte(offset: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            location: format!("byte {offset}"),
            message: msg.into(),
        }
    }

    pub(crate) fn parse_at_line(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            location: format!("line {line}"),
            message: msg.into(),
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 2,
            Error::Io(_) | Error::Parse { .. } => 3,
            Error::GridExhausted { .. } => 4,
            Error::Numerical(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
