use std::net::SocketAddr;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error(transparent)]
    Core(#[from] nextmon_core::Error),

    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: String,
        #[source]
        source: std::io::Error,
    },

    #[error("server on {addr} failed: {source}")]
    Serve {
        addr: SocketAddr,
        #[source]
        source: std::io::Error,
    },
}

impl ServiceError {
    /// True for errors that should be reported before the service starts.
    pub fn is_config(&self) -> bool {
        matches!(self, ServiceError::Core(e) if e.is_config())
    }
}

/// Why a command was refused.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CommandError {
    #[error("malformed command: {0}")]
    Malformed(String),

    #[error("setpoint {value} °C is outside the safe range {min}–{max} °C")]
    SetpointOutOfRange { value: f64, min: f64, max: f64 },

    #[error("unsupported speed {0}; choose one of 0, 1, 10, 60, 600")]
    UnsupportedSpeed(f64),

    #[error("unknown weather scenario '{0}'")]
    UnknownScenario(String),

    /// The simulation loop has stopped, so the command was not delivered.
    #[error("simulation loop is not running")]
    Stopped,
}
