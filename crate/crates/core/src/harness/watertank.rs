//! Synthetic water-tank heating demo: a first-order thermal lag driven by
//! a heater that cycles through 50 %, 75 % and 100 % power with off
//! periods in between. Two horizons (τ = 4 and τ = 16 steps) are learned
//! from joint control/temperature tile coding with four steps of history.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::format::quantize;
use super::run::{evaluate, write_artifacts, EvaluationSettings, Pipeline, RunArtifacts, RunTrace};
use crate::error::Result;
use crate::events::{falling_edges, EventParams, Prominence};
use crate::features::{CoderConfig, DimSpec, Observation, TilingGroupSpec};
use crate::nexting::{BankConfig, HorizonSpec};

/// Power fraction for each control level.
pub const POWER_LEVELS: [f64; 4] = [0.0, 0.5, 0.75, 1.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WaterTankConfig {
    pub steps: usize,
    pub seed: u64,
    pub ambient: f64,
    /// Fraction of the excess over ambient lost per step.
    pub loss: f64,
    /// Temperature gain per step at full power.
    pub gain: f64,
    /// Inclusive range of heating period lengths, in steps.
    pub on_steps: (usize, usize),
    pub off_steps: (usize, usize),
    pub burn_in_steps: usize,
}

impl Default for WaterTankConfig {
    fn default() -> Self {
        WaterTankConfig {
            steps: 10_000,
            seed: 0,
            ambient: 20.0,
            loss: 0.02,
            gain: 1.2,
            on_steps: (40, 80),
            off_steps: (60, 140),
            burn_in_steps: 3000,
        }
    }
}

/// `(control level, temperature)` per step.
pub fn simulate(cfg: &WaterTankConfig) -> Vec<(usize, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = Vec::with_capacity(cfg.steps);
    let mut temp = cfg.ambient;
    let mut level = 0;
    let mut remaining = 0usize;
    let mut next_level = 1;
    let mut heating = false;
    for _ in 0..cfg.steps {
        if remaining == 0 {
            heating = !heating;
            if heating {
                level = next_level;
                next_level = next_level % 3 + 1;
                remaining = rng.gen_range(cfg.on_steps.0..=cfg.on_steps.1);
            } else {
                level = 0;
                remaining = rng.gen_range(cfg.off_steps.0..=cfg.off_steps.1);
            }
        }
        out.push((level, quantize(temp)));
        temp += -cfg.loss * (temp - cfg.ambient) + cfg.gain * POWER_LEVELS[level];
        remaining -= 1;
    }
    out
}

pub fn demo_coder() -> CoderConfig {
    CoderConfig {
        groups: vec![TilingGroupSpec::new(
            "control_temperature",
            vec![
                DimSpec::discrete("control", POWER_LEVELS.len()),
                DimSpec::continuous("temperature", 15.0, 85.0, 14),
            ],
            8,
        )],
        history_depth: 4,
    }
}

pub fn demo_learner() -> BankConfig {
    BankConfig::new(
        vec![
            HorizonSpec::from_tau("4steps", 4.0).expect("valid tau"),
            HorizonSpec::from_tau("16steps", 16.0).expect("valid tau"),
        ],
        "temperature",
    )
}

pub fn demo_events() -> EventParams {
    EventParams {
        smoothing_window: 5,
        half_width: 10,
        prominence: Prominence::RangeFraction {
            fraction: 0.1,
            window: 500,
        },
    }
}

pub fn observation(level: usize, temperature: f64) -> Observation {
    Observation::new()
        .with("control", level as f64)
        .with("power", POWER_LEVELS[level])
        .with("temperature", temperature)
}

/// Runs the demo in memory.
pub fn execute_watertank(cfg: &WaterTankConfig) -> Result<(RunTrace, super::run::Evaluation)> {
    let samples = simulate(cfg);
    let mut pipeline = Pipeline::new(demo_coder(), demo_learner(), cfg.seed)?;
    let mut values = Vec::with_capacity(samples.len());
    let mut records = Vec::with_capacity(samples.len());
    for &(level, temp) in &samples {
        let obs = observation(level, temp);
        records.push(pipeline.step(&obs)?);
        values.push(vec![level as f64, POWER_LEVELS[level], temp]);
    }
    let heating: Vec<bool> = samples.iter().map(|(l, _)| *l > 0).collect();
    let trace = RunTrace {
        columns: ["control", "power", "temperature"].map(String::from).to_vec(),
        values,
        records,
        horizons: pipeline.bank.horizons().cloned().collect(),
        switch_offs: falling_edges(&heating),
        dt: 1.0,
    };
    let settings = EvaluationSettings {
        burn_in_steps: cfg.burn_in_steps,
        epsilon: crate::oracle::DEFAULT_EPSILON,
        events: demo_events(),
        event_horizon: 1,
        lead_steps: 16,
    };
    let evaluation = evaluate(&trace, &settings)?;
    Ok((trace, evaluation))
}

/// Runs the demo and writes the usual artifact set to `output_dir`.
pub fn demo_watertank(cfg: &WaterTankConfig, output_dir: &Path) -> Result<RunArtifacts> {
    let (trace, evaluation) = execute_watertank(cfg)?;
    let config_text = toml::to_string_pretty(cfg).expect("demo config serializes");
    write_artifacts(output_dir, &trace, &evaluation, None, &config_text)?;
    Ok(RunArtifacts {
        output_dir: output_dir.to_path_buf(),
        trace,
        evaluation,
    })
}
