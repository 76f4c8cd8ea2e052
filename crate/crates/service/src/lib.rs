//! Live operator loop for nextmon: one task steps the simulated house and
//! the learner at a selectable speed, applies operator commands between
//! steps and fans telemetry frames out to any number of subscribers.
//!
//! HTTP surface: `GET /stream` (newline-delimited JSON frames),
//! `POST /command`, `GET /state`, `GET /healthz`, and dashboard assets
//! under `/`.

mod error;
pub mod protocol;
mod server;
mod session;

pub use error::{CommandError, ServiceError};
pub use protocol::{
    Band, CommandAck, CommandRejection, ControlCommand, SessionStatus, StateView, TelemetryFrame, PROTOCOL_VERSION,
};
pub use server::{frames, router, serve, spawn, Service, ServiceHandle};
pub use session::Session;
