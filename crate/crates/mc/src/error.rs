use std::io;
use std::path::PathBuf;

use thiserror::Error;

/// Exit status for usage and input errors.
pub const EXIT_USAGE: u8 = 2;
/// Exit status for numerical failures.
pub const EXIT_NUMERICAL: u8 = 3;

#[derive(Debug, Error)]
pub enum McError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}line {line}: {message}", file.as_ref().map(|p| format!("{}: ", p.display())).unwrap_or_default())]
    Parse {
        file: Option<PathBuf>,
        line: usize,
        message: String,
    },
    #[error("format error: {0}")]
    Format(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error(transparent)]
    Core(#[from] schatten_core::Error),
}

pub type Result<T, E = McError> = std::result::Result<T, E>;

impl McError {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        McError::Io {
            path: path.into(),
            source,
        }
    }

    /// Attaches a file name to a parse error.
    pub fn in_file(self, path: impl Into<PathBuf>) -> Self {
        match self {
            McError::Parse { line, message, .. } => McError::Parse {
                file: Some(path.into()),
                line,
                message,
            },
            other => other,
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            McError::Numerical(_) | McError::Core(schatten_core::Error::Numerical(_)) => EXIT_NUMERICAL,
            _ => EXIT_USAGE,
        }
    }
}
