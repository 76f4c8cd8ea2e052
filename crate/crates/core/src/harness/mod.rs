//! Batch experiments: weather → plant → coder → learner → oracle → events,
//! with CSV/JSON artifacts, replay and checkpoints.

mod config;
pub mod format;
mod replay;
mod run;
pub mod watertank;

pub use config::{
    EvaluationConfig, EventConfig, RunConfig, Scenario, ServiceConfig, SimulationConfig, DEFAULT_SCENARIO,
    SCHEMA_VERSION, SERVICE_SPEEDS, THERMAL_CHANNELS,
};
pub use replay::{replay, Mismatch, ReplayReport};
pub use run::{
    evaluate, execute, ideal_file, prediction_columns, run_experiment, thermal_observation, thermal_settings,
    write_artifacts, Checkpoint, Evaluation, EvaluationSettings, EventMetrics, HorizonMetrics, Metrics, Pipeline,
    RunArtifacts, RunTrace, StepLog, StepRow, ThermalRun, CHECKPOINT_FILE, CHECKPOINT_VERSION, CONFIG_FILE,
    EVENTS_FILE, METRICS_FILE, STEPS_FILE,
};
