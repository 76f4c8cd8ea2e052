use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nextmon_core::harness::watertank::{demo_watertank, WaterTankConfig};
use nextmon_core::harness::{replay, run_experiment, Metrics, RunConfig};
use nextmon_core::Error;
use nextmon_service::{Service, ServiceError};

#[derive(Parser)]
#[command(
    name = "nextmon",
    version,
    about = "Multi-timescale nexting on simulated sensor streams"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a thermal experiment and write its artifacts.
    Run {
        config: PathBuf,
        #[arg(long)]
        output_dir: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        weather: Option<PathBuf>,
        #[arg(long)]
        duration_hours: Option<f64>,
        #[arg(long)]
        burn_in_hours: Option<f64>,
    },
    /// Run a built-in demo.
    Demo {
        #[command(subcommand)]
        demo: Demo,
    },
    /// Feed a step CSV through a fresh learner and compare predictions.
    Replay { csv: PathBuf, config: PathBuf },
    /// Run the live simulation with the operator HTTP interface.
    Serve {
        config: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: String,
        /// Initial playback speed (0, 1, 10, 60 or 600).
        #[arg(long)]
        speed: Option<u32>,
        /// Directory for the per-step CSV log [default: <output_dir>/live].
        #[arg(long, conflicts_with = "no_log")]
        log_dir: Option<PathBuf>,
        #[arg(long)]
        no_log: bool,
        /// Dashboard build to serve at `/`.
        #[arg(long)]
        assets_dir: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum Demo {
    /// Water tank heated in bursts at 50/75/100 % power; two horizons.
    Watertank {
        #[arg(long, default_value = "runs/watertank")]
        output_dir: PathBuf,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

/// Exit status: 2 for bad configuration, 1 for faults while running.
enum Failure {
    Config(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_config() {
            Failure::Config(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

impl From<ServiceError> for Failure {
    fn from(e: ServiceError) -> Self {
        if e.is_config() {
            Failure::Config(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("nextmon: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("nextmon: {msg}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::Run {
            config,
            output_dir,
            seed,
            weather,
            duration_hours,
            burn_in_hours,
        } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(d) = output_dir {
                cfg.output_dir = d;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(w) = weather {
                cfg.weather = w;
            }
            if let Some(h) = duration_hours {
                cfg.simulation.duration_hours = Some(h);
            }
            if let Some(h) = burn_in_hours {
                cfg.evaluation.burn_in_hours = h;
            }
            let artifacts = run_experiment(&cfg)?;
            summarize(&artifacts.output_dir, artifacts.metrics());
            Ok(())
        }
        Command::Demo {
            demo:
                Demo::Watertank {
                    output_dir,
                    steps,
                    seed,
                },
        } => {
            let mut cfg = WaterTankConfig::default();
            if let Some(n) = steps {
                cfg.steps = n;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let artifacts = demo_watertank(&cfg, &output_dir)?;
            summarize(&artifacts.output_dir, artifacts.metrics());
            Ok(())
        }
        Command::Replay { csv, config } => {
            let cfg = RunConfig::load(&config)?;
            cfg.validate()?;
            let report = replay(&csv, cfg.coder, cfg.learner, cfg.seed)?;
            println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            match &report.first_mismatch {
                None => Ok(()),
                Some(m) => Err(Failure::Runtime(format!(
                    "replay diverged in {} of {} values; first at step {} column {} (recorded {}, replayed {})",
                    report.mismatches, report.compared, m.step, m.column, m.recorded, m.replayed
                ))),
            }
        }
        Command::Serve {
            config,
            bind,
            speed,
            log_dir,
            no_log,
            assets_dir,
        } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(s) = speed {
                cfg.service.speed = s;
            }
            if let Some(d) = assets_dir {
                cfg.service.assets_dir = Some(d);
            }
            let log_dir = (!no_log).then(|| log_dir.unwrap_or_else(|| cfg.output_dir.join("live")));
            tracing_subscriber::fmt().with_writer(std::io::stderr).init();
            let rt = tokio::runtime::Runtime::new().map_err(|e| Failure::Runtime(e.to_string()))?;
            rt.block_on(serve(cfg, bind, log_dir))
        }
    }
}

async fn serve(cfg: RunConfig, bind: String, log_dir: Option<PathBuf>) -> Result<(), Failure> {
    let service = Service::bind(&cfg, &bind, log_dir.as_deref()).await?;
    eprintln!("nextmon: serving on http://{}", service.local_addr());
    if let Some(dir) = &log_dir {
        eprintln!("nextmon: logging steps to {}", dir.display());
    }
    service
        .run_until(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

fn summarize(dir: &Path, m: &Metrics) {
    println!("wrote {} steps to {}", m.steps, dir.display());
    for h in &m.horizons {
        let fmt = |x: Option<f64>| x.map_or("n/a".to_string(), |v| format!("{v:.4}"));
        println!(
            "  {} (gamma {}): normalized RMSE {} before / {} after {} burn-in steps",
            h.label,
            h.gamma,
            fmt(h.rmse_normalized_pre),
            fmt(h.rmse_normalized_post),
            m.burn_in_steps
        );
    }
    let e = &m.events;
    println!(
        "  events on {}: {} markers, {}/{} switch-offs anticipated within {} steps",
        e.horizon, e.markers, e.anticipated, e.switch_offs_after_burn_in, e.lead_steps
    );
}
