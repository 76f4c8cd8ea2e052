//! Writes the bundled synthetic weather file.
//!
//! `cargo run -p nextmon-core --example gen_weather -- data/weather/april_20d.csv`
//!
//! The series mimics a Central European April: a diurnal cycle peaking
//! mid-afternoon, multi-day synoptic swings, a slow warming trend and
//! autocorrelated noise, rounded to 0.1 °C like EPW dry-bulb data.

use std::f64::consts::PI;
use std::path::PathBuf;

use nextmon_core::thermal::WeatherSeries;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

const DAYS: usize = 20;
const SEED: u64 = 20040401;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("data/weather/april_20d.csv"));
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let noise = Normal::new(0.0, 0.35)?;
    let daily = Normal::new(0.0, 1.0)?;

    let day_amp: Vec<f64> = (0..=DAYS)
        .map(|_| (5.0_f64 + 1.2 * daily.sample(&mut rng)).clamp(2.5, 7.5))
        .collect();
    let mut ar = 0.0;
    let temps: Vec<f64> = (0..=DAYS * 24)
        .map(|h| {
            let day = h as f64 / 24.0;
            let mean =
                10.0 + 0.12 * day + 3.0 * (2.0 * PI * day / 6.5).sin() + 1.2 * (2.0 * PI * day / 2.7 + 1.0).sin();
            let amp = day_amp[h / 24];
            let diurnal = amp * (2.0 * PI * ((h % 24) as f64 - 15.0) / 24.0).cos();
            ar = 0.85 * ar + noise.sample(&mut rng);
            ((mean + diurnal + ar) * 10.0).round() / 10.0
        })
        .collect();

    if let Some(dir) = out.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let series = WeatherSeries::new("2004-04-01T00:00:00".parse()?, temps)?;
    series.write_csv(&out)?;
    println!(
        "wrote {} hourly samples to {} (min {:.1} °C, max {:.1} °C)",
        series.temps.len(),
        out.display(),
        series.min(),
        series.max()
    );
    Ok(())
}
