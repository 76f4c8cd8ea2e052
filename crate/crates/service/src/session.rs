use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use nextmon_core::events::{EventMarker, StreamingEvents};
use nextmon_core::harness::{thermal_observation, Pipeline, RunConfig, StepLog, StepRow, DEFAULT_SCENARIO};
use nextmon_core::thermal::{load_weather, Hysteresis, Simulation, WeatherSeries};

use crate::error::{CommandError, ServiceError};
use crate::protocol::{
    Band, ControlCommand, SessionStatus, TelemetryFrame, DECIMATION, DECIMATION_SPEED, PROTOCOL_VERSION, SPEEDS,
};

/// Plant, learner and event detector advanced one step at a time, with
/// operator settings. Runs forever on cyclic weather. Speed only affects
/// which frames are published and how fast the caller steps; the
/// arithmetic is the same at every speed.
#[derive(Debug)]
pub struct Session {
    sim: Simulation,
    pipeline: Pipeline,
    events: StreamingEvents,
    event_horizon: usize,
    horizons: Vec<String>,
    half_band: f64,
    setpoint_range: [f64; 2],
    scenarios: Vec<(String, WeatherSeries)>,
    scenario: usize,
    speed: u32,
    paused: bool,
    pending: Vec<EventMarker>,
    log: Option<StepLog>,
}

impl Session {
    /// Validates the config and loads every weather scenario up front.
    pub fn new(config: &RunConfig) -> Result<Self, ServiceError> {
        config.validate()?;
        let mut scenarios = vec![(DEFAULT_SCENARIO.to_string(), load_weather(&config.weather)?)];
        for s in &config.scenarios {
            scenarios.push((s.id.clone(), load_weather(&s.path)?));
        }
        let s = &config.simulation;
        let sim = Simulation::new(
            config.house.clone(),
            scenarios[0].1.clone(),
            s.schedule(),
            s.initial_t_in,
            s.dt,
        )?
        .with_controller(Hysteresis {
            half_band: s.hysteresis,
        })
        .with_cyclic_weather(true);
        let pipeline = Pipeline::new(config.coder.clone(), config.learner.clone(), config.seed)?;
        let horizons = config.learner.horizons.iter().map(|h| h.label().to_string()).collect();
        let svc = &config.service;
        Ok(Session {
            sim,
            pipeline,
            events: StreamingEvents::new(config.events.params())?,
            event_horizon: config.event_horizon()?,
            horizons,
            half_band: s.hysteresis,
            setpoint_range: [svc.setpoint_min, svc.setpoint_max],
            scenarios,
            scenario: 0,
            speed: if svc.speed == 0 { 1 } else { svc.speed },
            paused: svc.speed == 0,
            pending: Vec::new(),
            log: None,
        })
    }

    /// Appends every simulated step to `steps.csv` and every confirmed
    /// marker to `events.csv` in `dir`, whatever the frame decimation.
    pub fn with_log(mut self, dir: &Path) -> Result<Self, ServiceError> {
        let specs: Vec<_> = self.pipeline.bank.horizons().cloned().collect();
        self.log = Some(StepLog::create(dir, &specs, self.sim.dt())?);
        Ok(self)
    }

    pub fn next_step(&self) -> u64 {
        self.sim.state().step
    }

    pub fn is_paused(&self) -> bool {
        self.paused
    }

    /// Last non-zero speed, kept while paused.
    pub fn speed(&self) -> u32 {
        self.speed
    }

    pub fn dt(&self) -> f64 {
        self.sim.dt()
    }

    fn band(&self, t_set: f64) -> Band {
        Band {
            lower: t_set - self.half_band,
            upper: t_set + self.half_band,
        }
    }

    pub fn status(&self) -> SessionStatus {
        let setpoint = self.sim.current_setpoint();
        SessionStatus {
            next_step: self.next_step(),
            speed: if self.paused { 0 } else { self.speed },
            paused: self.paused,
            setpoint,
            band: self.band(setpoint),
            setpoint_range: self.setpoint_range,
            scenario: self.scenarios[self.scenario].0.clone(),
            scenarios: self.scenarios.iter().map(|(id, _)| id.clone()).collect(),
            horizons: self.horizons.clone(),
            dt: self.dt(),
        }
    }

    /// Validates and applies a command; on error nothing changes.
    pub fn apply(&mut self, cmd: &ControlCommand) -> Result<(), CommandError> {
        match cmd {
            ControlCommand::SetSetpoint(v) => {
                let [min, max] = self.setpoint_range;
                if !(v.is_finite() && (min..=max).contains(v)) {
                    return Err(CommandError::SetpointOutOfRange { value: *v, min, max });
                }
                self.sim.set_setpoint(*v);
            }
            ControlCommand::SetSpeed(v) => {
                let speed = SPEEDS
                    .into_iter()
                    .find(|&s| s as f64 == *v)
                    .ok_or(CommandError::UnsupportedSpeed(*v))?;
                if speed == 0 {
                    self.paused = true;
                } else {
                    self.speed = speed;
                    self.paused = false;
                }
            }
            ControlCommand::Pause => self.paused = true,
            ControlCommand::Resume => self.paused = false,
            ControlCommand::SelectWeatherScenario(id) => {
                let i = self
                    .scenarios
                    .iter()
                    .position(|(s, _)| s == id)
                    .ok_or_else(|| CommandError::UnknownScenario(id.clone()))?;
                self.scenario = i;
                self.sim.set_weather(self.scenarios[i].1.clone());
            }
        }
        Ok(())
    }

    /// Simulates one step, whether or not paused. Returns the frame when
    /// this step is published at the current speed; markers confirmed on
    /// unpublished steps are carried to the next published frame.
    pub fn advance(&mut self) -> Result<Option<TelemetryFrame>, ServiceError> {
        let state = self.sim.step()?;
        let record = self.pipeline.step(&thermal_observation(&state))?;
        let markers = self.events.push(record.normalized[self.event_horizon]);
        if let Some(log) = &mut self.log {
            log.write_step(&StepRow {
                state,
                record: record.clone(),
            })?;
            log.write_markers(&markers)?;
        }
        self.pending.extend(markers);
        if self.speed >= DECIMATION_SPEED && state.step % DECIMATION != 0 {
            return Ok(None);
        }
        if let Some(log) = &mut self.log {
            log.flush()?;
        }
        let wall_clock_ms = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_millis() as u64);
        Ok(Some(TelemetryFrame {
            schema_version: PROTOCOL_VERSION,
            step: state.step,
            time_hours: state.step as f64 * self.dt() / 3600.0,
            wall_clock_ms,
            state,
            band: self.band(state.t_set),
            horizons: self.horizons.clone(),
            prediction: record,
            markers: std::mem::take(&mut self.pending),
            speed: self.speed,
            scenario: self.scenarios[self.scenario].0.clone(),
            gap: false,
        }))
    }
}
