//! Online multi-timescale prediction ("nexting") of raw sensor signals.
//!
//! * [`features`] turns channel values into sparse binary tile-coded vectors.
//! * [`nexting`] learns one linear TD(λ) predictor per timescale.
//! * [`oracle`] computes offline ideal predictions and error metrics.
//! * [`thermal`] simulates a heated one-room building under real weather.
//! * [`events`] turns predictions into operator-facing switch markers.
//! * [`harness`] wires it all into reproducible experiments.

pub mod error;
pub mod events;
pub mod features;
pub mod harness;
pub mod nexting;
pub mod oracle;
pub mod thermal;

pub use error::{Error, Result};
