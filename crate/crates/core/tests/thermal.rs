mod common;

use common::{bundled_weather, indoor_trajectory, max_deviation, open_loop_trajectory};
use nextmon_core::thermal::{
    step_house, HouseParams, HouseState, Hysteresis, SetpointSchedule, Simulation, WeatherSeries,
};

fn state(t_in: f64, t_out: f64, heater_on: bool) -> HouseState {
    HouseState {
        step: 0,
        t_in,
        t_out,
        heater_on,
        t_set: 23.0,
    }
}

#[test]
fn derived_constants() {
    let p = HouseParams::default();
    assert_eq!(p.heat_capacity(), 9_879_000.0);
    assert_eq!(p.conductance(), 110.0);
    assert!((p.full_power_offset() - 1600.0 / 110.0).abs() < 1e-12);
    assert!((p.time_constant() - 9_879_000.0 / 110.0).abs() < 1e-6);
}

#[test]
fn full_power_settles_at_the_analytic_offset() {
    let p = HouseParams::default();
    let mut s = state(5.0, 5.0, true);
    for _ in 0..40_000 {
        s = step_house(&p, &s, 60.0).unwrap();
    }
    assert!((s.t_in - s.t_out - 14.545).abs() < 0.01, "offset {}", s.t_in - s.t_out);
}

#[test]
fn heater_off_decays_with_the_analytic_time_constant() {
    let p = HouseParams::default();
    let dt = 1.0;
    let mut s = state(20.0, 10.0, false);
    let steps = p.time_constant().round() as usize;
    for _ in 0..steps {
        let next = step_house(&p, &s, dt).unwrap();
        assert!(next.t_in < s.t_in);
        s = next;
    }
    let ratio = (s.t_in - 10.0) / 10.0;
    assert!((ratio - (-1.0f64).exp()).abs() < 1e-4, "ratio {ratio}");
}

#[test]
fn equilibrium_without_heating_is_unchanged() {
    let s = step_house(&HouseParams::default(), &state(12.5, 12.5, false), 60.0).unwrap();
    assert_eq!(s.t_in, 12.5);
    assert_eq!(s.step, 1);
}

#[test]
fn non_finite_state_is_a_simulation_fault() {
    let err = step_house(&HouseParams::default(), &state(f64::NAN, 1.0, false), 60.0).unwrap_err();
    assert!(matches!(err, nextmon_core::Error::Simulation { .. }));
}

#[test]
fn hysteresis_examples() {
    let h = Hysteresis::default();
    assert!(h.command(21.9, 23.0, false));
    assert!(!h.command(24.0, 23.0, true));
    assert!(h.command(23.0, 23.0, true));
    assert!(!h.command(23.0, 23.0, false));
}

#[test]
fn twenty_days_of_hourly_weather_give_28800_steps() {
    let w = bundled_weather();
    assert_eq!(w.temps.len(), 481);
    let sim = Simulation::new(HouseParams::default(), w, SetpointSchedule::constant(23.0), 23.0, 60.0).unwrap();
    assert_eq!(sim.steps_available(), 28_800);
}

#[test]
fn full_run_is_bounded_and_never_chatters() {
    let w = bundled_weather();
    let offset = HouseParams::default().full_power_offset();
    let states = indoor_trajectory(60.0, 1);
    assert!(states
        .iter()
        .all(|s| s.t_in >= w.min() && s.t_in <= w.max() + offset + 1e-3));
    // energy sign: heater off and warmer inside → strictly cooling
    for pair in states.windows(2) {
        if !pair[0].heater_on && pair[0].t_in > pair[0].t_out {
            assert!(pair[1].t_in < pair[0].t_in);
        }
    }
    // between two switches the temperature crosses the full 2 °C band
    let switches: Vec<usize> = (1..states.len())
        .filter(|&i| states[i].heater_on != states[i - 1].heater_on)
        .collect();
    assert!(switches.len() > 10);
    for pair in switches.windows(2) {
        let (a, b) = (&states[pair[0]], &states[pair[1]]);
        assert!(
            (a.t_in - b.t_in).abs() >= 2.0 - 1e-9,
            "switches at {} and {}",
            pair[0],
            pair[1]
        );
    }
}

#[test]
fn euler_converges_for_a_fixed_heater_schedule() {
    let heater: Vec<bool> = indoor_trajectory(60.0, 1).iter().map(|s| s.heater_on).collect();
    let one = open_loop_trajectory(&heater, 1);
    let two = open_loop_trajectory(&heater, 2);
    let four = open_loop_trajectory(&heater, 4);
    let dev = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let (d12, d24) = (dev(&one, &two), dev(&two, &four));
    assert!(d12 < 0.01, "halving dt moved the trajectory by {d12} °C");
    // first-order method: halving again roughly halves the change
    assert!(d24 < 0.6 * d12, "{d24} vs {d12}");
}

#[test]
fn one_substep_is_the_plain_simulation() {
    let sim = indoor_trajectory(60.0, 1);
    let heater: Vec<bool> = sim.iter().map(|s| s.heater_on).collect();
    let replayed = open_loop_trajectory(&heater, 1);
    assert!(sim.iter().zip(&replayed).all(|(s, t)| s.t_in == *t));
}

#[test]
fn closed_loop_halving_deviates_by_a_few_switch_quanta_at_most() {
    // With the relay in the loop, a tiny integration difference can move a
    // threshold crossing by a step, which is worth k_gain · P · 60 s.
    let coarse = indoor_trajectory(60.0, 1);
    let quantum = HouseParams::default().k_gain() * HouseParams::default().heater_power * 60.0;
    let by_substeps = max_deviation(&coarse, &indoor_trajectory(60.0, 2), 1);
    let by_dt = max_deviation(&coarse, &indoor_trajectory(30.0, 1), 2);
    assert!(by_substeps < 3.0 * quantum, "{by_substeps}");
    assert!(by_dt < 3.0 * quantum, "{by_dt}");
}

#[test]
fn setpoint_override_moves_the_thresholds_on_the_next_step() {
    let w = WeatherSeries::new("2004-04-01T00:00:00".parse().unwrap(), vec![5.0; 10]).unwrap();
    let mut sim = Simulation::new(HouseParams::default(), w, SetpointSchedule::constant(23.0), 22.5, 60.0).unwrap();
    assert!(!sim.step().unwrap().heater_on);
    sim.set_setpoint(25.0);
    let s = sim.step().unwrap();
    assert_eq!(s.t_set, 25.0);
    assert!(s.heater_on);
}

#[test]
fn cyclic_weather_wraps_instead_of_failing() {
    let w = WeatherSeries::new("2004-04-01T00:00:00".parse().unwrap(), vec![5.0, 6.0]).unwrap();
    let mut sim = Simulation::new(
        HouseParams::default(),
        w.clone(),
        SetpointSchedule::constant(23.0),
        20.0,
        60.0,
    )
    .unwrap();
    for _ in 0..=60 {
        sim.step().unwrap();
    }
    assert!(sim.step().is_err());
    let mut cyclic = Simulation::new(HouseParams::default(), w, SetpointSchedule::constant(23.0), 20.0, 60.0)
        .unwrap()
        .with_cyclic_weather(true);
    for _ in 0..500 {
        cyclic.step().unwrap();
    }
}
