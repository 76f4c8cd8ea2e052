//! Runs a thermal config in memory and prints its metrics as JSON.
//!
//! `cargo run --release -p nextmon-core --example thermal_metrics -- configs/thermal.toml`

use std::path::PathBuf;
use std::time::Instant;

use nextmon_core::harness::{execute, RunConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("configs/thermal.toml"));
    let config = RunConfig::load(&path)?;
    config.validate()?;
    let started = Instant::now();
    let (trace, evaluation, _) = execute(&config)?;
    eprintln!("{} steps in {:.2?}", trace.len(), started.elapsed());
    println!("{}", serde_json::to_string_pretty(&evaluation.metrics)?);
    Ok(())
}
