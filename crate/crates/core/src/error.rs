use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid or inconsistent configuration. Maps to CLI exit code 2.
    #[error("configuration error: {0}")]
    Config(String),

    /// A value fed to the learner or coder was unusable (e.g. NaN).
    #[error("input error: {0}")]
    Input(String),

    /// A query or parameter outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("parse error in {path} at line {line}: {message}")]
    Parse { path: PathBuf, line: u64, message: String },

    /// The plant model produced a non-finite state.
    #[error("simulation fault at step {step}: {message}")]
    Simulation { step: u64, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors that should be reported before any computation starts.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Parse { .. })
    }
}
