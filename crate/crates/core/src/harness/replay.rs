//! Re-running a recorded step CSV through a fresh learner.

use std::path::Path;

use serde::Serialize;

use super::format::fmt9;
use super::run::{prediction_columns, Pipeline};
use crate::error::{Error, Result};
use crate::features::{CoderConfig, Observation};
use crate::nexting::BankConfig;

const NON_CHANNEL_COLUMNS: [&str; 3] = ["step", "time_hours", "event"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Mismatch {
    pub step: u64,
    pub column: String,
    pub recorded: String,
    pub replayed: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplayReport {
    pub rows: usize,
    pub compared: usize,
    pub mismatches: usize,
    pub first_mismatch: Option<Mismatch>,
}

impl ReplayReport {
    pub fn is_exact(&self) -> bool {
        self.mismatches == 0
    }
}

fn parse_err(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Feeds the observation columns of `csv` through a new coder and bank and
/// compares every recorded prediction, normalized prediction and TD error
/// with the recomputed value at the same printed precision.
pub fn replay(csv: &Path, coder: CoderConfig, learner: BankConfig, seed: u64) -> Result<ReplayReport> {
    let mut pipeline = Pipeline::new(coder, learner, seed)?;
    let horizons: Vec<_> = pipeline.bank.horizons().cloned().collect();
    let expected_cols = prediction_columns(&horizons);

    let mut rdr = csv::Reader::from_path(csv).map_err(|e| parse_err(csv, 0, e.to_string()))?;
    let headers = rdr.headers().map_err(|e| parse_err(csv, 1, e.to_string()))?.clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let pred_idx: Vec<usize> = expected_cols
        .iter()
        .map(|c| find(c).ok_or_else(|| Error::Config(format!("{} has no column '{c}'", csv.display()))))
        .collect::<Result<_>>()?;
    let step_idx = find("step").ok_or_else(|| parse_err(csv, 1, "missing 'step' column"))?;
    let channel_idx: Vec<(usize, String)> = headers
        .iter()
        .enumerate()
        .filter(|(i, h)| !NON_CHANNEL_COLUMNS.contains(h) && !pred_idx.contains(i))
        .filter(|(_, h)| !(h.starts_with("pred_") || h.starts_with("norm_") || h.starts_with("td_")))
        .map(|(i, h)| (i, h.to_string()))
        .collect();

    let mut report = ReplayReport {
        rows: 0,
        compared: 0,
        mismatches: 0,
        first_mismatch: None,
    };
    for rec in rdr.records() {
        let rec = rec.map_err(|e| parse_err(csv, e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        let field = |i: usize| rec.get(i).unwrap_or_default();
        let step: u64 = field(step_idx)
            .parse()
            .map_err(|_| parse_err(csv, line, format!("bad step '{}'", field(step_idx))))?;
        let mut obs = Observation::new();
        for (i, name) in &channel_idx {
            let v: f64 = field(*i)
                .parse()
                .map_err(|_| parse_err(csv, line, format!("bad value '{}' in column {name}", field(*i))))?;
            obs.set(name.clone(), v);
        }
        let out = pipeline.step(&obs)?;
        let replayed = (0..horizons.len()).flat_map(|h| {
            [
                fmt9(out.predictions[h]),
                fmt9(out.normalized[h]),
                fmt9(out.td_errors[h]),
            ]
        });
        for ((col, &idx), value) in expected_cols.iter().zip(&pred_idx).zip(replayed) {
            report.compared += 1;
            if field(idx) != value {
                report.mismatches += 1;
                report.first_mismatch.get_or_insert_with(|| Mismatch {
                    step,
                    column: col.clone(),
                    recorded: field(idx).to_string(),
                    replayed: value,
                });
            }
        }
        report.rows += 1;
    }
    Ok(report)
}
