//! One-room building heated by a hysteresis-controlled electric heater and
//! driven by recorded hourly outdoor temperatures.

mod control;
mod house;
pub mod weather;

pub use control::{control_hysteresis, Hysteresis};
pub use house::{step_house, HouseParams, HouseState};
pub use weather::{load_weather, sample_outdoor, WeatherSeries};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_DT: f64 = 60.0;

/// Piecewise-constant setpoint: `(start_hour, setpoint)` pairs sorted by hour.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetpointSchedule(pub Vec<(f64, f64)>);

impl SetpointSchedule {
    pub fn constant(t_set: f64) -> Self {
        SetpointSchedule(vec![(0.0, t_set)])
    }

    pub fn validate(&self) -> Result<()> {
        if self.0.is_empty() {
            return Err(Error::Config("setpoint schedule is empty".into()));
        }
        if self.0.iter().any(|(h, v)| !h.is_finite() || !v.is_finite()) {
            return Err(Error::Config("setpoint schedule has non-finite entries".into()));
        }
        if self.0.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::Config("setpoint schedule must be sorted by start hour".into()));
        }
        Ok(())
    }

    pub fn at(&self, hours: f64) -> f64 {
        self.0
            .iter()
            .take_while(|(h, _)| *h <= hours)
            .last()
            .unwrap_or(&self.0[0])
            .1
    }
}

impl Default for SetpointSchedule {
    fn default() -> Self {
        SetpointSchedule::constant(23.0)
    }
}

/// Mutable part of a [`Simulation`], for checkpoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationState {
    pub state: HouseState,
    pub setpoint_override: Option<f64>,
}

/// Fixed-step plant loop: weather → controller → Euler step.
#[derive(Debug, Clone)]
pub struct Simulation {
    params: HouseParams,
    controller: Hysteresis,
    weather: WeatherSeries,
    schedule: SetpointSchedule,
    dt: f64,
    substeps: u32,
    cyclic_weather: bool,
    setpoint_override: Option<f64>,
    state: HouseState,
}

impl Simulation {
    pub fn new(
        params: HouseParams,
        weather: WeatherSeries,
        schedule: SetpointSchedule,
        initial_t_in: f64,
        dt: f64,
    ) -> Result<Self> {
        params.validate()?;
        schedule.validate()?;
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::Config(format!("time step must be positive, got {dt}")));
        }
        if !initial_t_in.is_finite() {
            return Err(Error::Config("initial indoor temperature must be finite".into()));
        }
        let t_set = schedule.at(0.0);
        Ok(Simulation {
            state: HouseState {
                step: 0,
                t_in: initial_t_in,
                t_out: weather.temps[0],
                heater_on: false,
                t_set,
            },
            params,
            controller: Hysteresis::default(),
            weather,
            schedule,
            dt,
            substeps: 1,
            cyclic_weather: false,
            setpoint_override: None,
        })
    }

    /// Wrap around the end of the weather series instead of failing.
    pub fn with_cyclic_weather(mut self, cyclic: bool) -> Self {
        self.cyclic_weather = cyclic;
        self
    }

    /// Integrates each step with `n` Euler substeps of `dt / n` while the
    /// controller still decides once per step.
    pub fn with_substeps(mut self, n: u32) -> Self {
        self.substeps = n.max(1);
        self
    }

    pub fn with_controller(mut self, controller: Hysteresis) -> Self {
        self.controller = controller;
        self
    }

    pub fn params(&self) -> &HouseParams {
        &self.params
    }

    pub fn controller(&self) -> &Hysteresis {
        &self.controller
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// State at the start of the next step (heater shows the last command).
    pub fn state(&self) -> &HouseState {
        &self.state
    }

    pub fn weather(&self) -> &WeatherSeries {
        &self.weather
    }

    /// Swaps the outdoor temperature source; time keeps running.
    pub fn set_weather(&mut self, weather: WeatherSeries) {
        self.weather = weather;
    }

    /// Overrides the schedule from now on.
    pub fn set_setpoint(&mut self, t_set: f64) {
        self.setpoint_override = Some(t_set);
    }

    pub fn current_setpoint(&self) -> f64 {
        self.setpoint_override
            .unwrap_or_else(|| self.schedule.at(self.time_secs() / 3600.0))
    }

    pub fn time_secs(&self) -> f64 {
        self.state.step as f64 * self.dt
    }

    /// Steps that fit inside the weather series.
    pub fn steps_available(&self) -> u64 {
        (self.weather.duration_secs() / self.dt).floor() as u64
    }

    /// Samples the weather, applies the controller and integrates one step.
    /// Returns the state observed at the start of the step together with
    /// the heater command held during it.
    pub fn step(&mut self) -> Result<HouseState> {
        let secs = self.time_secs();
        let t_out = self.outdoor(secs)?;
        let t_set = self.current_setpoint();
        let heater_on = self.controller.command(self.state.t_in, t_set, self.state.heater_on);
        let observed = HouseState {
            step: self.state.step,
            t_in: self.state.t_in,
            t_out,
            heater_on,
            t_set,
        };
        let mut next = step_house(&self.params, &observed, self.dt / self.substeps as f64)?;
        for k in 1..self.substeps {
            let h = self.dt / self.substeps as f64;
            next.t_out = self.outdoor(secs + k as f64 * h)?;
            next = step_house(&self.params, &next, h)?;
        }
        self.state = HouseState {
            step: observed.step + 1,
            t_out,
            ..next
        };
        Ok(observed)
    }

    fn outdoor(&self, secs: f64) -> Result<f64> {
        if self.cyclic_weather {
            Ok(self.weather.sample_cyclic(secs))
        } else {
            self.weather.sample(secs)
        }
    }

    pub fn snapshot(&self) -> SimulationState {
        SimulationState {
            state: self.state,
            setpoint_override: self.setpoint_override,
        }
    }

    pub fn restore(&mut self, s: SimulationState) {
        self.state = s.state;
        self.setpoint_override = s.setpoint_override;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn weather(temps: Vec<f64>) -> WeatherSeries {
        WeatherSeries::new("2004-04-01T00:00:00".parse().unwrap(), temps).unwrap()
    }

    #[test]
    fn schedule_lookup() {
        let s = SetpointSchedule(vec![(0.0, 20.0), (10.0, 23.0), (20.0, 18.0)]);
        s.validate().unwrap();
        assert_eq!(s.at(0.0), 20.0);
        assert_eq!(s.at(9.99), 20.0);
        assert_eq!(s.at(10.0), 23.0);
        assert_eq!(s.at(100.0), 18.0);
        assert!(SetpointSchedule(vec![(5.0, 1.0), (5.0, 2.0)]).validate().is_err());
        assert!(SetpointSchedule(vec![]).validate().is_err());
    }

    #[test]
    fn step_records_pre_step_state() {
        let mut sim = Simulation::new(
            HouseParams::default(),
            weather(vec![10.0, 12.0, 14.0]),
            SetpointSchedule::constant(23.0),
            21.0,
            60.0,
        )
        .unwrap();
        let s0 = sim.step().unwrap();
        assert_eq!(s0.step, 0);
        assert_eq!(s0.t_in, 21.0);
        assert_eq!(s0.t_out, 10.0);
        assert!(s0.heater_on);
        let s1 = sim.step().unwrap();
        assert_eq!(s1.step, 1);
        assert!(s1.t_in > 21.0);
        assert!((s1.t_out - (10.0 + 2.0 / 60.0)).abs() < 1e-12);
        assert_eq!(sim.steps_available(), 120);
    }

    #[test]
    fn running_past_the_weather_is_a_domain_error_unless_cyclic() {
        let mk = || {
            Simulation::new(
                HouseParams::default(),
                weather(vec![10.0, 12.0]),
                SetpointSchedule::default(),
                20.0,
                600.0,
            )
            .unwrap()
        };
        let mut sim = mk();
        for _ in 0..=6 {
            sim.step().unwrap();
        }
        assert!(matches!(sim.step(), Err(Error::Domain(_))));
        let mut sim = mk().with_cyclic_weather(true);
        for _ in 0..20 {
            sim.step().unwrap();
        }
    }

    #[test]
    fn setpoint_override_takes_effect_next_step() {
        let mut sim = Simulation::new(
            HouseParams::default(),
            weather(vec![10.0; 10]),
            SetpointSchedule::constant(23.0),
            22.5,
            60.0,
        )
        .unwrap();
        assert!(!sim.step().unwrap().heater_on);
        sim.set_setpoint(25.0);
        let s = sim.step().unwrap();
        assert_eq!(s.t_set, 25.0);
        assert!(s.heater_on);
    }
}
