use serde::{Deserialize, Serialize};

use super::house::HouseState;

/// On-off relay: on at `T_set − half_band`, off at `T_set + half_band`,
/// unchanged in between.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hysteresis {
    pub half_band: f64,
}

impl Default for Hysteresis {
    fn default() -> Self {
        Hysteresis { half_band: 1.0 }
    }
}

impl Hysteresis {
    pub fn command(&self, t_in: f64, t_set: f64, previously_on: bool) -> bool {
        if t_in <= t_set - self.half_band {
            true
        } else if t_in >= t_set + self.half_band {
            false
        } else {
            previously_on
        }
    }
}

/// Heater command for `state` under the default 1 °C hysteresis.
pub fn control_hysteresis(state: &HouseState) -> bool {
    Hysteresis::default().command(state.t_in, state.t_set, state.heater_on)
}
