mod common;

use std::fs;

use common::thermal_config;
use nextmon_core::harness::watertank::{demo_watertank, WaterTankConfig};
use nextmon_core::harness::{
    ideal_file, replay, run_experiment, Checkpoint, RunConfig, ThermalRun, CHECKPOINT_FILE, CONFIG_FILE, EVENTS_FILE,
    METRICS_FILE, STEPS_FILE,
};
use nextmon_core::Error;

fn short(cfg: &mut RunConfig, hours: f64) {
    cfg.simulation.duration_hours = Some(hours);
    cfg.evaluation.burn_in_hours = hours / 4.0;
}

#[test]
fn reference_config_produces_28800_rows_and_all_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let art = run_experiment(&thermal_config(&out)).unwrap();
    assert_eq!(art.metrics().steps, 28_800);
    let steps = fs::read_to_string(out.join(STEPS_FILE)).unwrap();
    let mut lines = steps.lines();
    assert_eq!(
        lines.next().unwrap(),
        "step,time_hours,t_out,t_in,heater,t_set,pred_50min,norm_50min,td_50min,event"
    );
    assert_eq!(lines.count(), 28_800);
    for f in [
        EVENTS_FILE,
        METRICS_FILE,
        CHECKPOINT_FILE,
        CONFIG_FILE,
        &ideal_file("50min"),
    ] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    assert!(!dir.path().join("run.partial").exists());
    let ideal = fs::read_to_string(out.join(ideal_file("50min"))).unwrap();
    assert_eq!(ideal.lines().next().unwrap(), "step,ideal,ideal_normalized,partial");
    assert_eq!(ideal.lines().count(), 28_801);
    // the written config reloads to the same experiment
    let again = RunConfig::from_toml(&fs::read_to_string(out.join(CONFIG_FILE)).unwrap()).unwrap();
    assert_eq!(again, thermal_config(&out));
}

#[test]
fn identical_runs_write_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let mut a = thermal_config(&dir.path().join("a"));
    short(&mut a, 48.0);
    let mut b = a.clone();
    b.output_dir = dir.path().join("b");
    run_experiment(&a).unwrap();
    run_experiment(&b).unwrap();
    for f in [STEPS_FILE, EVENTS_FILE, METRICS_FILE, &ideal_file("50min")] {
        let x = fs::read(a.output_dir.join(f)).unwrap();
        let y = fs::read(b.output_dir.join(f)).unwrap();
        assert!(x == y, "{f} differs");
    }
    // checkpoints embed the config, which names the output directory
    let mut ca = Checkpoint::load(&a.output_dir.join(CHECKPOINT_FILE)).unwrap();
    let cb = Checkpoint::load(&b.output_dir.join(CHECKPOINT_FILE)).unwrap();
    ca.config.output_dir = cb.config.output_dir.clone();
    assert_eq!(serde_json::to_string(&ca).unwrap(), serde_json::to_string(&cb).unwrap());
}

#[test]
fn replaying_the_step_csv_reproduces_every_prediction() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = thermal_config(&dir.path().join("run"));
    short(&mut cfg, 72.0);
    run_experiment(&cfg).unwrap();
    let report = replay(
        &cfg.output_dir.join(STEPS_FILE),
        cfg.coder.clone(),
        cfg.learner.clone(),
        cfg.seed,
    )
    .unwrap();
    assert_eq!(report.rows, 72 * 60);
    assert_eq!(report.compared, 72 * 60 * 3);
    assert!(report.is_exact(), "{:?}", report.first_mismatch);
}

#[test]
fn replay_detects_a_tampered_prediction() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = thermal_config(&dir.path().join("run"));
    short(&mut cfg, 10.0);
    run_experiment(&cfg).unwrap();
    let path = cfg.output_dir.join(STEPS_FILE);
    let text = fs::read_to_string(&path).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let mut fields: Vec<String> = lines[100].split(',').map(String::from).collect();
    fields[7] = "123.456".into();
    lines[100] = fields.join(",");
    fs::write(&path, lines.join("\n") + "\n").unwrap();
    let report = replay(&path, cfg.coder, cfg.learner, cfg.seed).unwrap();
    assert_eq!(report.mismatches, 1);
    assert_eq!(report.first_mismatch.unwrap().step, 99);
}

#[test]
fn resuming_from_a_checkpoint_continues_identically() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = thermal_config(&dir.path().join("run"));
    short(&mut cfg, 30.0);
    let mut full = ThermalRun::new(cfg.clone()).unwrap();
    let uninterrupted = full.run_to_end().unwrap();

    let mut first = ThermalRun::new(cfg).unwrap();
    for _ in 0..1000 {
        first.step().unwrap();
    }
    let path = dir.path().join("ck.json");
    first.checkpoint().save(&path).unwrap();
    let mut resumed = ThermalRun::resume(Checkpoint::load(&path).unwrap()).unwrap();
    assert_eq!(resumed.steps_done(), 1000);
    let tail = resumed.run_to_end().unwrap();
    assert_eq!(tail.as_slice(), &uninterrupted[1000..]);
}

#[test]
fn config_errors_are_reported_as_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let base = thermal_config(dir.path());

    let mut no_horizons = base.clone();
    no_horizons.learner.horizons.clear();
    assert!(matches!(no_horizons.validate(), Err(Error::Config(_))));

    let mut missing_weather = base.clone();
    missing_weather.weather = dir.path().join("nope.csv");
    assert!(matches!(missing_weather.validate(), Err(Error::Config(_))));

    let mut unknown_channel = base.clone();
    unknown_channel.learner.pseudo_reward_channel = "humidity".into();
    assert!(unknown_channel.validate().unwrap_err().is_config());

    let mut too_long = base.clone();
    too_long.simulation.duration_hours = Some(10_000.0);
    assert!(ThermalRun::new(too_long).unwrap_err().is_config());

    let text = base.to_toml().replace("schema_version = 1", "schema_version = 99");
    assert!(RunConfig::from_toml(&text).is_err());
    let typo = base.to_toml().replace("[simulation]", "[simulation]\ntimestep = 3");
    assert!(RunConfig::from_toml(&typo).is_err());
}

#[test]
fn watertank_demo_matches_the_two_horizon_setup() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("tank");
    let art = demo_watertank(&WaterTankConfig::default(), &out).unwrap();
    let m = art.metrics();
    let gammas: Vec<f64> = m.horizons.iter().map(|h| h.gamma).collect();
    assert_eq!(gammas, vec![0.75, 0.9375]);
    assert_eq!(m.burn_in_steps, 3000);
    for h in &m.horizons {
        let (pre, post) = (h.rmse_normalized_pre.unwrap(), h.rmse_normalized_post.unwrap());
        assert!(post < pre, "{}: post {post} !< pre {pre}", h.label);
    }
    let metrics: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join(METRICS_FILE)).unwrap()).unwrap();
    assert_eq!(metrics["burn_in_steps"], 3000);
    for f in [
        STEPS_FILE,
        EVENTS_FILE,
        CONFIG_FILE,
        &ideal_file("4steps"),
        &ideal_file("16steps"),
    ] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
}
