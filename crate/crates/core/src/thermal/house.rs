use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Single-room lumped-capacitance building with an electric heater.
///
/// Indoor temperature follows `dT/dt = −k_loss (T_in − T_out) + k_gain P`,
/// with `k_loss = (a_windows u_windows + a_walls u_walls) / C` and
/// `k_gain = η / C`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HouseParams {
    /// m²
    pub a_windows: f64,
    /// W/(m²K)
    pub u_windows: f64,
    /// m²
    pub a_walls: f64,
    /// W/(m²K)
    pub u_walls: f64,
    /// J/K
    pub c_air: f64,
    pub c_furniture: f64,
    pub c_walls: f64,
    /// W
    pub heater_power: f64,
    pub efficiency: f64,
}

impl Default for HouseParams {
    fn default() -> Self {
        HouseParams {
            a_windows: 2.0,
            u_windows: 50.0,
            a_walls: 10.0,
            u_walls: 1.0,
            c_air: 39_000.0,
            c_furniture: 840_000.0,
            c_walls: 9.0e6,
            heater_power: 2000.0,
            efficiency: 0.8,
        }
    }
}

impl HouseParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("a_windows", self.a_windows),
            ("u_windows", self.u_windows),
            ("a_walls", self.a_walls),
            ("u_walls", self.u_walls),
            ("c_air", self.c_air),
            ("c_furniture", self.c_furniture),
            ("c_walls", self.c_walls),
            ("heater_power", self.heater_power),
            ("efficiency", self.efficiency),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!(
                    "house parameter {name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Total heat capacity C in J/K.
    pub fn heat_capacity(&self) -> f64 {
        self.c_air + self.c_furniture + self.c_walls
    }

    /// Envelope conductance in W/K.
    pub fn conductance(&self) -> f64 {
        self.a_windows * self.u_windows + self.a_walls * self.u_walls
    }

    /// Heat-loss rate coefficient, 1/s.
    pub fn k_loss(&self) -> f64 {
        self.conductance() / self.heat_capacity()
    }

    /// Heater gain, K/J.
    pub fn k_gain(&self) -> f64 {
        self.efficiency / self.heat_capacity()
    }

    /// Steady-state `T_in − T_out` at full heater power.
    pub fn full_power_offset(&self) -> f64 {
        self.efficiency * self.heater_power / self.conductance()
    }

    /// Free-cooling e-folding time in seconds.
    pub fn time_constant(&self) -> f64 {
        1.0 / self.k_loss()
    }
}

/// Plant state at one simulation step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HouseState {
    pub step: u64,
    pub t_in: f64,
    pub t_out: f64,
    pub heater_on: bool,
    pub t_set: f64,
}

impl HouseState {
    pub fn heater_power(&self, params: &HouseParams) -> f64 {
        if self.heater_on {
            params.heater_power
        } else {
            0.0
        }
    }
}

/// One explicit Euler step of length `dt` seconds.
pub fn step_house(params: &HouseParams, state: &HouseState, dt: f64) -> Result<HouseState> {
    if !(state.t_in.is_finite() && state.t_out.is_finite()) {
        return Err(Error::Simulation {
            step: state.step,
            message: format!("non-finite temperatures (t_in={}, t_out={})", state.t_in, state.t_out),
        });
    }
    let rate = -params.k_loss() * (state.t_in - state.t_out) + params.k_gain() * state.heater_power(params);
    let t_in = state.t_in + dt * rate;
    if !t_in.is_finite() {
        return Err(Error::Simulation {
            step: state.step,
            message: "indoor temperature diverged".into(),
        });
    }
    Ok(HouseState {
        step: state.step + 1,
        t_in,
        ..*state
    })
}
