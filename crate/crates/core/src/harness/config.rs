use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::{EventParams, Prominence};
use crate::features::CoderConfig;
use crate::nexting::BankConfig;
use crate::thermal::{HouseParams, SetpointSchedule, DEFAULT_DT};

pub const SCHEMA_VERSION: u32 = 1;

/// Observation channels produced by the thermal plant.
pub const THERMAL_CHANNELS: [&str; 4] = ["t_in", "t_out", "heater", "t_set"];

/// Scenario id under which the service exposes the main `weather` file.
pub const DEFAULT_SCENARIO: &str = "default";

/// Playback speeds the service accepts; 0 pauses.
pub const SERVICE_SPEEDS: [u32; 5] = [0, 1, 10, 60, 600];

/// An alternative weather file the service operator can switch to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub id: String,
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    /// Seconds per step.
    pub dt: f64,
    pub initial_t_in: f64,
    /// `[start_hour, setpoint]` pairs.
    pub setpoints: Vec<(f64, f64)>,
    /// Hysteresis half-band in °C.
    pub hysteresis: f64,
    /// Defaults to the full span of the weather file.
    pub duration_hours: Option<f64>,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            dt: DEFAULT_DT,
            initial_t_in: 23.0,
            setpoints: vec![(0.0, 23.0)],
            hysteresis: 1.0,
            duration_hours: None,
        }
    }
}

impl SimulationConfig {
    pub fn schedule(&self) -> SetpointSchedule {
        SetpointSchedule(self.setpoints.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EventConfig {
    pub smoothing_window: usize,
    pub half_width: usize,
    pub prominence: Prominence,
    /// Label of the horizon whose normalized prediction is scanned.
    /// Defaults to the last configured horizon.
    pub horizon: Option<String>,
    /// How far ahead of an actual switch a marker may sit and still count.
    pub lead_steps: u64,
}

impl Default for EventConfig {
    fn default() -> Self {
        let p = EventParams::default();
        EventConfig {
            smoothing_window: p.smoothing_window,
            half_width: p.half_width,
            prominence: p.prominence,
            horizon: None,
            lead_steps: 30,
        }
    }
}

impl EventConfig {
    pub fn params(&self) -> EventParams {
        EventParams {
            smoothing_window: self.smoothing_window,
            half_width: self.half_width,
            prominence: self.prominence,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    pub burn_in_hours: f64,
    pub epsilon: f64,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        EvaluationConfig {
            burn_in_hours: 100.0,
            epsilon: crate::oracle::DEFAULT_EPSILON,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    /// Initial playback speed multiplier.
    pub speed: u32,
    pub setpoint_min: f64,
    pub setpoint_max: f64,
    /// Frames buffered per subscriber before the oldest are dropped.
    pub subscriber_queue: usize,
    /// Directory with dashboard assets served at `/`.
    pub assets_dir: Option<PathBuf>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            speed: 60,
            setpoint_min: 5.0,
            setpoint_max: 35.0,
            subscriber_queue: 256,
            assets_dir: None,
        }
    }
}

/// Everything needed to reproduce one thermal experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    pub weather: PathBuf,
    #[serde(default)]
    pub scenarios: Vec<Scenario>,
    #[serde(default)]
    pub house: HouseParams,
    #[serde(default)]
    pub simulation: SimulationConfig,
    pub coder: CoderConfig,
    pub learner: BankConfig,
    #[serde(default)]
    pub events: EventConfig,
    #[serde(default)]
    pub evaluation: EvaluationConfig,
    #[serde(default)]
    pub service: ServiceConfig,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("runs/latest")
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        Ok(cfg)
    }

    /// Reads a config file; relative paths inside it are resolved against
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.weather);
        fix(&mut self.output_dir);
        for s in &mut self.scenarios {
            fix(&mut s.path);
        }
        if let Some(dir) = &mut self.service.assets_dir {
            fix(dir);
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn event_horizon(&self) -> Result<usize> {
        match &self.events.horizon {
            None => Ok(self.learner.horizons.len().saturating_sub(1)),
            Some(label) => self
                .learner
                .horizons
                .iter()
                .position(|h| h.label() == label)
                .ok_or_else(|| Error::Config(format!("event horizon '{label}' is not a configured horizon"))),
        }
    }

    pub fn burn_in_steps(&self) -> usize {
        (self.evaluation.burn_in_hours * 3600.0 / self.simulation.dt).round() as usize
    }

    /// Checks everything that can be checked without running.
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported schema_version {}",
                self.schema_version
            )));
        }
        self.learner.validate()?;
        self.coder.validate()?;
        self.house.validate()?;
        self.simulation.schedule().validate()?;
        self.events.params().validate()?;
        self.event_horizon()?;

        let known = |c: &str| THERMAL_CHANNELS.contains(&c);
        if let Some(c) = self.coder.channels().find(|c| !known(c)) {
            return Err(Error::Config(format!(
                "coder channel '{c}' is not produced by the plant (expected one of {THERMAL_CHANNELS:?})"
            )));
        }
        if !known(&self.learner.pseudo_reward_channel) {
            return Err(Error::Config(format!(
                "pseudo reward channel '{}' is not produced by the plant",
                self.learner.pseudo_reward_channel
            )));
        }
        let sim = &self.simulation;
        if !(sim.dt.is_finite() && sim.dt > 0.0) {
            return Err(Error::Config(format!("simulation.dt must be positive, got {}", sim.dt)));
        }
        if !(sim.hysteresis.is_finite() && sim.hysteresis > 0.0) {
            return Err(Error::Config("simulation.hysteresis must be positive".into()));
        }
        if let Some(h) = sim.duration_hours {
            if !(h.is_finite() && h > 0.0) {
                return Err(Error::Config(format!(
                    "simulation.duration_hours must be positive, got {h}"
                )));
            }
        }
        let eval = &self.evaluation;
        if !(eval.burn_in_hours >= 0.0 && eval.epsilon > 0.0) {
            return Err(Error::Config(
                "evaluation needs burn_in_hours >= 0 and epsilon > 0".into(),
            ));
        }
        for p in std::iter::once(&self.weather).chain(self.scenarios.iter().map(|s| &s.path)) {
            if !p.is_file() {
                return Err(Error::Config(format!("weather file {} does not exist", p.display())));
            }
        }
        let mut ids = vec![DEFAULT_SCENARIO];
        for s in &self.scenarios {
            if s.id.is_empty() || ids.contains(&s.id.as_str()) {
                return Err(Error::Config(format!(
                    "scenario id '{}' is empty or already taken",
                    s.id
                )));
            }
            ids.push(&s.id);
        }
        let svc = &self.service;
        if !(svc.setpoint_min.is_finite() && svc.setpoint_max.is_finite() && svc.setpoint_min < svc.setpoint_max) {
            return Err(Error::Config("service setpoint range is empty".into()));
        }
        if !SERVICE_SPEEDS.contains(&svc.speed) {
            return Err(Error::Config(format!(
                "service.speed {} is not one of {SERVICE_SPEEDS:?}",
                svc.speed
            )));
        }
        if svc.subscriber_queue == 0 {
            return Err(Error::Config("service.subscriber_queue must be at least 1".into()));
        }
        Ok(())
    }
}
