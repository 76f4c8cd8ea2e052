use nextmon_core::events::EventMarker;
use nextmon_core::nexting::PredictionRecord;
use nextmon_core::thermal::HouseState;
use serde::{Deserialize, Serialize};

/// Version of the JSON carried on `/stream`, `/state` and `/command`.
pub const PROTOCOL_VERSION: u32 = 1;

pub use nextmon_core::harness::SERVICE_SPEEDS as SPEEDS;

/// At or above this speed only every [`DECIMATION`]-th step is published.
pub const DECIMATION_SPEED: u32 = 600;
pub const DECIMATION: u64 = 10;

/// Operator request, e.g. `{"kind": "set-setpoint", "value": 20}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "kebab-case")]
pub enum ControlCommand {
    SetSetpoint(f64),
    SetSpeed(f64),
    Pause,
    Resume,
    SelectWeatherScenario(String),
}

/// Reply to an accepted command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommandAck {
    pub accepted: bool,
    /// First step simulated under the new settings.
    pub effective_step: u64,
    pub status: SessionStatus,
}

/// Reply to a rejected command; the session is unchanged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommandRejection {
    pub accepted: bool,
    pub error: String,
}

/// Relay thresholds the controller applies around the setpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub lower: f64,
    pub upper: f64,
}

/// Operator-visible settings, as of the next step to be simulated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionStatus {
    pub next_step: u64,
    pub speed: u32,
    pub paused: bool,
    pub setpoint: f64,
    pub band: Band,
    pub setpoint_range: [f64; 2],
    pub scenario: String,
    pub scenarios: Vec<String>,
    pub horizons: Vec<String>,
    pub dt: f64,
}

/// One published simulation step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelemetryFrame {
    pub schema_version: u32,
    pub step: u64,
    pub time_hours: f64,
    /// Unix time in milliseconds when the step was computed.
    pub wall_clock_ms: u64,
    pub state: HouseState,
    pub band: Band,
    /// Labels matching the order of the prediction vectors.
    pub horizons: Vec<String>,
    pub prediction: PredictionRecord,
    /// Markers confirmed since the previous published frame.
    pub markers: Vec<EventMarker>,
    pub speed: u32,
    pub scenario: String,
    /// Set on the first frame a subscriber receives after it fell behind
    /// and frames were dropped.
    pub gap: bool,
}

/// Body of `GET /state`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateView {
    pub schema_version: u32,
    pub status: SessionStatus,
    pub frame: Option<TelemetryFrame>,
}
