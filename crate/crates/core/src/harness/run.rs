use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::format::{fmt9, quantize};
use crate::error::{Error, Result};
use crate::events::{
    falling_edges, precursor_stats, switch_markers, EventKind, EventMarker, EventParams, PrecursorStats,
};
use crate::features::{HistoryCoder, HistorySnapshot, Observation};
use crate::nexting::{BankSnapshot, HorizonSpec, PredictionRecord, PredictorBank};
use crate::oracle::{ideal_prediction, ReturnSeries};
use crate::thermal::{load_weather, HouseState, Hysteresis, Simulation, SimulationState, WeatherSeries};

pub const CHECKPOINT_VERSION: u32 = 1;

/// Tile coder plus predictor bank, advanced one observation at a time.
#[derive(Debug, Clone)]
pub struct Pipeline {
    pub coder: HistoryCoder,
    pub bank: PredictorBank,
}

impl Pipeline {
    pub fn new(coder: crate::features::CoderConfig, learner: crate::nexting::BankConfig, seed: u64) -> Result<Self> {
        let active = coder.active_per_step();
        let coder = HistoryCoder::new(coder, seed)?;
        let bank = PredictorBank::new(learner, coder.total_features(), active)?;
        Ok(Pipeline { coder, bank })
    }

    pub fn step(&mut self, obs: &Observation) -> Result<PredictionRecord> {
        self.bank.step(&mut self.coder, obs)
    }
}

/// What the learner sees of a plant state: every value rounded to the
/// precision written to the step CSV, so a replay of that CSV feeds the
/// learner bit-identical inputs.
pub fn thermal_observation(state: &HouseState) -> Observation {
    Observation::new()
        .with("t_in", quantize(state.t_in))
        .with("t_out", quantize(state.t_out))
        .with("heater", if state.heater_on { 1.0 } else { 0.0 })
        .with("t_set", quantize(state.t_set))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub config: RunConfig,
    pub simulation: SimulationState,
    pub history: HistorySnapshot,
    pub bank: BankSnapshot,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_vec(self).expect("checkpoint serializes");
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let ck: Checkpoint = serde_json::from_slice(&bytes)
            .map_err(|e| Error::Config(format!("{}: bad checkpoint: {e}", path.display())))?;
        if ck.format_version != CHECKPOINT_VERSION {
            return Err(Error::Config(format!(
                "unsupported checkpoint version {}",
                ck.format_version
            )));
        }
        Ok(ck)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRow {
    pub state: HouseState,
    pub record: PredictionRecord,
}

/// The thermal plant wired to a learner.
#[derive(Debug, Clone)]
pub struct ThermalRun {
    config: RunConfig,
    sim: Simulation,
    pipeline: Pipeline,
    total_steps: u64,
}

impl ThermalRun {
    pub fn new(config: RunConfig) -> Result<Self> {
        config.validate()?;
        let weather = load_weather(&config.weather)?;
        Self::with_weather(config, weather)
    }

    /// Builds a run around an already loaded weather series.
    pub fn with_weather(config: RunConfig, weather: WeatherSeries) -> Result<Self> {
        let s = &config.simulation;
        let sim = Simulation::new(config.house.clone(), weather, s.schedule(), s.initial_t_in, s.dt)?.with_controller(
            Hysteresis {
                half_band: s.hysteresis,
            },
        );
        let available = sim.steps_available();
        let total_steps = match s.duration_hours {
            None => available,
            Some(h) => {
                let n = (h * 3600.0 / s.dt).round() as u64;
                if n > available {
                    return Err(Error::Config(format!(
                        "duration of {h} h needs {n} steps but the weather covers only {available}"
                    )));
                }
                n
            }
        };
        let pipeline = Pipeline::new(config.coder.clone(), config.learner.clone(), config.seed)?;
        Ok(ThermalRun {
            config,
            sim,
            pipeline,
            total_steps,
        })
    }

    pub fn resume(checkpoint: Checkpoint) -> Result<Self> {
        let mut run = Self::new(checkpoint.config)?;
        run.sim.restore(checkpoint.simulation);
        run.pipeline.coder.restore(checkpoint.history)?;
        run.pipeline.bank = PredictorBank::from_snapshot(checkpoint.bank)?;
        Ok(run)
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn simulation(&self) -> &Simulation {
        &self.sim
    }

    pub fn simulation_mut(&mut self) -> &mut Simulation {
        &mut self.sim
    }

    pub fn bank(&self) -> &PredictorBank {
        &self.pipeline.bank
    }

    pub fn horizons(&self) -> Vec<HorizonSpec> {
        self.pipeline.bank.horizons().cloned().collect()
    }

    pub fn total_steps(&self) -> u64 {
        self.total_steps
    }

    pub fn steps_done(&self) -> u64 {
        self.sim.state().step
    }

    pub fn is_finished(&self) -> bool {
        self.steps_done() >= self.total_steps
    }

    pub fn step(&mut self) -> Result<StepRow> {
        let state = self.sim.step()?;
        let record = self.pipeline.step(&thermal_observation(&state))?;
        Ok(StepRow { state, record })
    }

    /// Steps until the configured duration is reached.
    pub fn run_to_end(&mut self) -> Result<Vec<StepRow>> {
        let mut rows = Vec::with_capacity((self.total_steps - self.steps_done().min(self.total_steps)) as usize);
        while !self.is_finished() {
            rows.push(self.step()?);
        }
        Ok(rows)
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            format_version: CHECKPOINT_VERSION,
            config: self.config.clone(),
            simulation: self.sim.snapshot(),
            history: self.pipeline.coder.snapshot(),
            bank: self.pipeline.bank.snapshot(),
        }
    }
}

const THERMAL_COLUMNS: [&str; 5] = ["time_hours", "t_out", "t_in", "heater", "t_set"];

fn thermal_values(state: &HouseState, dt: f64) -> Vec<f64> {
    let o = thermal_observation(state);
    vec![
        state.step as f64 * dt / 3600.0,
        o.get("t_out").unwrap(),
        o.get("t_in").unwrap(),
        o.get("heater").unwrap(),
        o.get("t_set").unwrap(),
    ]
}

/// A completed streaming run in tabular form.
#[derive(Debug, Clone)]
pub struct RunTrace {
    /// Observation columns written between `step` and the prediction columns.
    pub columns: Vec<String>,
    pub values: Vec<Vec<f64>>,
    pub records: Vec<PredictionRecord>,
    pub horizons: Vec<HorizonSpec>,
    /// Steps at which the plant actually switched its actuator off.
    pub switch_offs: Vec<u64>,
    pub dt: f64,
}

impl RunTrace {
    pub fn from_thermal(rows: &[StepRow], horizons: Vec<HorizonSpec>, dt: f64) -> Self {
        let heater: Vec<bool> = rows.iter().map(|r| r.state.heater_on).collect();
        RunTrace {
            columns: THERMAL_COLUMNS.map(String::from).to_vec(),
            values: rows.iter().map(|r| thermal_values(&r.state, dt)).collect(),
            records: rows.iter().map(|r| r.record.clone()).collect(),
            horizons,
            switch_offs: falling_edges(&heater),
            dt,
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn signal(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.pseudo_reward).collect()
    }

    pub fn normalized(&self, horizon: usize) -> Vec<f64> {
        self.records.iter().map(|r| r.normalized[horizon]).collect()
    }

    pub fn raw(&self, horizon: usize) -> Vec<f64> {
        self.records.iter().map(|r| r.predictions[horizon]).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonMetrics {
    pub label: String,
    pub gamma: f64,
    pub truncation: usize,
    pub tail_bound: f64,
    pub rmse_normalized_pre: Option<f64>,
    pub rmse_normalized_post: Option<f64>,
    pub rmse_raw_pre: Option<f64>,
    pub rmse_raw_post: Option<f64>,
}

impl HorizonMetrics {
    /// Pre/post burn-in RMSE ratio of the normalized predictions.
    pub fn improvement(&self) -> Option<f64> {
        Some(self.rmse_normalized_pre? / self.rmse_normalized_post?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventMetrics {
    pub horizon: String,
    pub lead_steps: u64,
    pub markers: usize,
    pub switch_offs_after_burn_in: usize,
    pub anticipated: usize,
    pub precursor_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub steps: usize,
    pub burn_in_steps: usize,
    pub horizons: Vec<HorizonMetrics>,
    pub events: EventMetrics,
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub ideals: Vec<ReturnSeries>,
    pub markers: Vec<EventMarker>,
    pub precursors: PrecursorStats,
    pub metrics: Metrics,
}

pub struct EvaluationSettings {
    pub burn_in_steps: usize,
    pub epsilon: f64,
    pub events: EventParams,
    pub event_horizon: usize,
    pub lead_steps: u64,
}

/// Ideal predictions, RMSE before/after burn-in and event statistics.
pub fn evaluate(trace: &RunTrace, settings: &EvaluationSettings) -> Result<Evaluation> {
    let signal = trace.signal();
    let n = trace.len();
    let burn = settings.burn_in_steps.min(n);
    let mut ideals = Vec::with_capacity(trace.horizons.len());
    let mut horizons = Vec::with_capacity(trace.horizons.len());
    for (i, h) in trace.horizons.iter().enumerate() {
        let ideal = ideal_prediction(&signal, h.gamma(), settings.epsilon)?;
        let norm = trace.normalized(i);
        let raw = trace.raw(i);
        horizons.push(HorizonMetrics {
            label: h.label().to_string(),
            gamma: h.gamma(),
            truncation: ideal.truncation,
            tail_bound: ideal.tail_bound,
            rmse_normalized_pre: ideal.rmse(&norm, 0..burn, true).ok(),
            rmse_normalized_post: ideal.rmse(&norm, burn..n, true).ok(),
            rmse_raw_pre: ideal.rmse(&raw, 0..burn, false).ok(),
            rmse_raw_post: ideal.rmse(&raw, burn..n, false).ok(),
        });
        ideals.push(ideal);
    }
    let eh = settings.event_horizon;
    let markers = if n == 0 {
        Vec::new()
    } else {
        switch_markers(&trace.normalized(eh), &settings.events)?
    };
    let precursors = precursor_stats(
        &markers,
        EventKind::PredictedSwitchOff,
        &trace.switch_offs,
        settings.lead_steps,
        burn as u64,
    );
    let metrics = Metrics {
        steps: n,
        burn_in_steps: burn,
        horizons,
        events: EventMetrics {
            horizon: trace
                .horizons
                .get(eh)
                .map(|h| h.label().to_string())
                .unwrap_or_default(),
            lead_steps: settings.lead_steps,
            markers: markers.len(),
            switch_offs_after_burn_in: precursors.events,
            anticipated: precursors.anticipated,
            precursor_rate: precursors.rate(),
        },
    };
    Ok(Evaluation {
        ideals,
        markers,
        precursors,
        metrics,
    })
}

/// Result of [`run_experiment`].
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub output_dir: PathBuf,
    pub trace: RunTrace,
    pub evaluation: Evaluation,
}

impl RunArtifacts {
    pub fn metrics(&self) -> &Metrics {
        &self.evaluation.metrics
    }
}

pub fn thermal_settings(config: &RunConfig) -> Result<EvaluationSettings> {
    Ok(EvaluationSettings {
        burn_in_steps: config.burn_in_steps(),
        epsilon: config.evaluation.epsilon,
        events: config.events.params(),
        event_horizon: config.event_horizon()?,
        lead_steps: config.events.lead_steps,
    })
}

/// Runs the thermal experiment in memory without writing anything.
pub fn execute(config: &RunConfig) -> Result<(RunTrace, Evaluation, Checkpoint)> {
    let settings = thermal_settings(config)?;
    let mut run = ThermalRun::new(config.clone())?;
    let rows = run.run_to_end()?;
    let trace = RunTrace::from_thermal(&rows, run.horizons(), config.simulation.dt);
    let evaluation = evaluate(&trace, &settings)?;
    Ok((trace, evaluation, run.checkpoint()))
}

/// Runs the configured experiment and writes its artifacts to
/// `config.output_dir`.
pub fn run_experiment(config: &RunConfig) -> Result<RunArtifacts> {
    config.validate()?;
    let (trace, evaluation, checkpoint) = execute(config)?;
    write_artifacts(
        &config.output_dir,
        &trace,
        &evaluation,
        Some(&checkpoint),
        &config.to_toml(),
    )?;
    Ok(RunArtifacts {
        output_dir: config.output_dir.clone(),
        trace,
        evaluation,
    })
}

pub const STEPS_FILE: &str = "steps.csv";
pub const EVENTS_FILE: &str = "events.csv";
pub const METRICS_FILE: &str = "metrics.json";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const CONFIG_FILE: &str = "config.toml";

pub fn ideal_file(label: &str) -> String {
    format!("ideal_{label}.csv")
}

/// Writes all artifacts into a sibling staging directory first and moves
/// it into place only when everything succeeded.
pub fn write_artifacts(
    dir: &Path,
    trace: &RunTrace,
    evaluation: &Evaluation,
    checkpoint: Option<&Checkpoint>,
    config_text: &str,
) -> Result<()> {
    let staging = staging_dir(dir);
    if staging.exists() {
        std::fs::remove_dir_all(&staging).map_err(|e| Error::io(&staging, e))?;
    }
    let result = write_into(&staging, trace, evaluation, checkpoint, config_text).and_then(|()| {
        if dir.exists() {
            std::fs::remove_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        std::fs::rename(&staging, dir).map_err(|e| Error::io(dir, e))
    });
    if result.is_err() {
        let _ = std::fs::remove_dir_all(&staging);
    }
    result
}

fn staging_dir(dir: &Path) -> PathBuf {
    let mut name = dir
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_else(|| "run".into());
    name.push(".partial");
    dir.with_file_name(name)
}

fn write_into(
    dir: &Path,
    trace: &RunTrace,
    evaluation: &Evaluation,
    checkpoint: Option<&Checkpoint>,
    config_text: &str,
) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_steps(&dir.join(STEPS_FILE), trace, &evaluation.markers)?;
    for (h, ideal) in trace.horizons.iter().zip(&evaluation.ideals) {
        write_ideal(&dir.join(ideal_file(h.label())), ideal)?;
    }
    write_events(&dir.join(EVENTS_FILE), &evaluation.markers, trace.dt)?;
    let metrics = dir.join(METRICS_FILE);
    let mut json = serde_json::to_string_pretty(&evaluation.metrics).expect("metrics serialize");
    json.push('\n');
    std::fs::write(&metrics, json).map_err(|e| Error::io(&metrics, e))?;
    if let Some(ck) = checkpoint {
        ck.save(&dir.join(CHECKPOINT_FILE))?;
    }
    let cfg = dir.join(CONFIG_FILE);
    std::fs::write(&cfg, config_text).map_err(|e| Error::io(&cfg, e))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::io(path, std::io::Error::other(format!("{other:?}"))),
    }
}

fn event_label(kind: EventKind) -> &'static str {
    match kind {
        EventKind::PredictedSwitchOff => "predicted-switch-off",
        EventKind::PredictedSwitchOn => "predicted-switch-on",
        EventKind::Peak => "peak",
    }
}

pub fn prediction_columns(horizons: &[HorizonSpec]) -> Vec<String> {
    horizons
        .iter()
        .flat_map(|h| {
            let l = h.label();
            [format!("pred_{l}"), format!("norm_{l}"), format!("td_{l}")]
        })
        .collect()
}

fn step_header(columns: &[String], horizons: &[HorizonSpec]) -> Vec<String> {
    let mut header = vec!["step".to_string()];
    header.extend(columns.iter().cloned());
    header.extend(prediction_columns(horizons));
    header.push("event".into());
    header
}

fn push_predictions(row: &mut Vec<String>, rec: &PredictionRecord) {
    for i in 0..rec.predictions.len() {
        row.push(fmt9(rec.predictions[i]));
        row.push(fmt9(rec.normalized[i]));
        row.push(fmt9(rec.td_errors[i]));
    }
}

/// Appends thermal steps to `steps.csv` as they happen, in the batch
/// schema. Streaming markers are confirmed only after the step they
/// point at was written, so they go to `events.csv` and the step
/// file's event column stays empty.
#[derive(Debug)]
pub struct StepLog {
    steps: csv::Writer<std::fs::File>,
    events: csv::Writer<std::fs::File>,
    dir: PathBuf,
    dt: f64,
}

impl StepLog {
    pub fn create(dir: &Path, horizons: &[HorizonSpec], dt: f64) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let sp = dir.join(STEPS_FILE);
        let mut steps = csv::Writer::from_path(&sp).map_err(|e| csv_err(&sp, e))?;
        let columns = THERMAL_COLUMNS.map(String::from);
        steps
            .write_record(step_header(&columns, horizons))
            .map_err(|e| csv_err(&sp, e))?;
        let ep = dir.join(EVENTS_FILE);
        let mut events = csv::Writer::from_path(&ep).map_err(|e| csv_err(&ep, e))?;
        events.write_record(EVENT_HEADER).map_err(|e| csv_err(&ep, e))?;
        Ok(StepLog {
            steps,
            events,
            dir: dir.to_path_buf(),
            dt,
        })
    }

    pub fn write_step(&mut self, row: &StepRow) -> Result<()> {
        let mut out = vec![row.record.step.to_string()];
        out.extend(thermal_values(&row.state, self.dt).into_iter().map(fmt9));
        push_predictions(&mut out, &row.record);
        out.push(String::new());
        self.steps
            .write_record(&out)
            .map_err(|e| csv_err(&self.dir.join(STEPS_FILE), e))
    }

    pub fn write_markers(&mut self, markers: &[EventMarker]) -> Result<()> {
        for m in markers {
            self.events
                .write_record(event_row(m, self.dt))
                .map_err(|e| csv_err(&self.dir.join(EVENTS_FILE), e))?;
        }
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        self.steps
            .flush()
            .map_err(|e| Error::io(self.dir.join(STEPS_FILE), e))?;
        self.events
            .flush()
            .map_err(|e| Error::io(self.dir.join(EVENTS_FILE), e))
    }
}

const EVENT_HEADER: [&str; 4] = ["step", "time_hours", "kind", "confidence_window"];

fn event_row(m: &EventMarker, dt: f64) -> [String; 4] {
    [
        m.step.to_string(),
        fmt9(m.step as f64 * dt / 3600.0),
        event_label(m.kind).to_string(),
        m.confidence_window.to_string(),
    ]
}

fn write_steps(path: &Path, trace: &RunTrace, markers: &[EventMarker]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    let header = step_header(&trace.columns, &trace.horizons);
    w.write_record(&header).map_err(|e| csv_err(path, e))?;

    let mut marks = markers.iter().peekable();
    let mut row = Vec::with_capacity(header.len());
    for (values, rec) in trace.values.iter().zip(&trace.records) {
        row.clear();
        row.push(rec.step.to_string());
        row.extend(values.iter().map(|&v| fmt9(v)));
        push_predictions(&mut row, rec);
        let mut ev = Vec::new();
        while let Some(m) = marks.next_if(|m| m.step <= rec.step) {
            if m.step == rec.step {
                ev.push(event_label(m.kind));
            }
        }
        row.push(ev.join("|"));
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_ideal(path: &Path, ideal: &ReturnSeries) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(["step", "ideal", "ideal_normalized", "partial"])
        .map_err(|e| csv_err(path, e))?;
    let s = 1.0 - ideal.gamma;
    for (t, (g, p)) in ideal.values.iter().zip(&ideal.partial).enumerate() {
        w.write_record([t.to_string(), fmt9(*g), fmt9(g * s), (*p as u8).to_string()])
            .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_events(path: &Path, markers: &[EventMarker], dt: f64) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(EVENT_HEADER).map_err(|e| csv_err(path, e))?;
    for m in markers {
        w.write_record(event_row(m, dt)).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
