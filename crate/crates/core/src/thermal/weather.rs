//! Hourly outdoor temperature series.
//!
//! The native format is a CSV file with the header `datetime,temp_c`, an
//! ISO 8601 local timestamp per row and uniform hourly spacing. EnergyPlus
//! EPW files can be imported too: the eight header records are skipped and
//! the dry-bulb temperature is read from field 6 (zero-based) of each data
//! record.

use std::path::Path;

use chrono::{Duration, NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const HOUR: f64 = 3600.0;

/// Zero-based EPW field holding the dry-bulb temperature in °C.
pub const EPW_DRY_BULB_FIELD: usize = 6;
const EPW_HEADER_LINES: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeatherSeries {
    pub start: NaiveDateTime,
    /// Hourly samples in °C; sample `i` is at `start + i` hours.
    pub temps: Vec<f64>,
}

impl WeatherSeries {
    pub fn new(start: NaiveDateTime, temps: Vec<f64>) -> Result<Self> {
        if temps.len() < 2 {
            return Err(Error::Domain("weather series needs at least two samples".into()));
        }
        if let Some(v) = temps.iter().find(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("weather series contains non-finite value {v}")));
        }
        Ok(WeatherSeries { start, temps })
    }

    /// Covered span in seconds, from the first to the last sample.
    pub fn duration_secs(&self) -> f64 {
        (self.temps.len() - 1) as f64 * HOUR
    }

    pub fn min(&self) -> f64 {
        self.temps.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.temps.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Outdoor temperature `secs` after the first sample, linearly
    /// interpolated between the bracketing hours.
    pub fn sample(&self, secs: f64) -> Result<f64> {
        if !(secs >= 0.0 && secs <= self.duration_secs()) {
            return Err(Error::Domain(format!(
                "time {secs} s is outside the weather series (0..={} s)",
                self.duration_secs()
            )));
        }
        let h = secs / HOUR;
        let i = (h.floor() as usize).min(self.temps.len() - 2);
        let frac = h - i as f64;
        if frac == 0.0 {
            return Ok(self.temps[i]);
        }
        Ok(self.temps[i] + frac * (self.temps[i + 1] - self.temps[i]))
    }

    /// Like [`sample`](Self::sample) but wraps around the end of the series.
    pub fn sample_cyclic(&self, secs: f64) -> f64 {
        let span = self.duration_secs();
        let t = secs.rem_euclid(span);
        self.sample(t).expect("wrapped time lies inside the series")
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
        w.write_record(["datetime", "temp_c"]).map_err(|e| csv_io(path, e))?;
        for (i, t) in self.temps.iter().enumerate() {
            let ts = self.start + Duration::hours(i as i64);
            w.write_record([ts.format("%Y-%m-%dT%H:%M:%S").to_string(), format!("{t}")])
                .map_err(|e| csv_io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Outdoor temperature at `secs` after the start of `series`.
pub fn sample_outdoor(series: &WeatherSeries, secs: f64) -> Result<f64> {
    series.sample(secs)
}

fn csv_io(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("{other:?}"),
        },
    }
}

fn parse_error(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Loads a weather file, choosing the EPW importer for `.epw` files and
/// the CSV reader otherwise.
pub fn load_weather(path: &Path) -> Result<WeatherSeries> {
    let is_epw = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("epw"));
    if is_epw {
        load_epw(path)
    } else {
        load_csv(path)
    }
}

fn check_hourly(path: &Path, rows: &[(u64, NaiveDateTime, f64)]) -> Result<WeatherSeries> {
    if rows.len() < 2 {
        return Err(parse_error(
            path,
            rows.first().map_or(1, |r| r.0),
            "need at least two hourly samples",
        ));
    }
    for pair in rows.windows(2) {
        let (line, ts, _) = pair[1];
        if ts - pair[0].1 != Duration::hours(1) {
            return Err(parse_error(
                path,
                line,
                format!("timestamp {ts} is not one hour after {}", pair[0].1),
            ));
        }
    }
    WeatherSeries::new(rows[0].1, rows.iter().map(|r| r.2).collect())
}

pub fn load_csv(path: &Path) -> Result<WeatherSeries> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_io(path, e))?;
    let headers = rdr.headers().map_err(|e| csv_io(path, e))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| parse_error(path, 1, format!("missing column '{name}'")))
    };
    let (ts_col, temp_col) = (col("datetime")?, col("temp_c")?);

    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_io(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let ts_field = rec.get(ts_col).unwrap_or_default();
        let ts: NaiveDateTime = ts_field
            .parse()
            .map_err(|e| parse_error(path, line, format!("bad datetime '{ts_field}': {e}")))?;
        let temp_field = rec.get(temp_col).unwrap_or_default();
        let temp: f64 = temp_field
            .parse()
            .map_err(|_| parse_error(path, line, format!("bad temperature '{temp_field}'")))?;
        if !temp.is_finite() {
            return Err(parse_error(
                path,
                line,
                format!("non-finite temperature '{temp_field}'"),
            ));
        }
        rows.push((line, ts, temp));
    }
    check_hourly(path, &rows)
}

pub fn load_epw(path: &Path) -> Result<WeatherSeries> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    let mut year = None;
    for (i, raw) in text.lines().enumerate().skip(EPW_HEADER_LINES) {
        let line = i as u64 + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split(',').map(str::trim).collect();
        if fields.len() <= EPW_DRY_BULB_FIELD {
            return Err(parse_error(
                path,
                line,
                format!("expected at least {} fields", EPW_DRY_BULB_FIELD + 1),
            ));
        }
        let num = |k: usize| -> Result<u32> {
            fields[k]
                .parse()
                .map_err(|_| parse_error(path, line, format!("bad integer in field {k}: '{}'", fields[k])))
        };
        // Typical-year files mix source years; keep the first one throughout.
        let y = *year.get_or_insert(num(0)? as i32);
        let (month, day, hour) = (num(1)?, num(2)?, num(3)?);
        if !(1..=24).contains(&hour) {
            return Err(parse_error(path, line, format!("hour {hour} outside 1..=24")));
        }
        let date = NaiveDate::from_ymd_opt(y, month, day)
            .ok_or_else(|| parse_error(path, line, format!("invalid date {y}-{month}-{day}")))?;
        let ts = date.and_hms_opt(0, 0, 0).expect("midnight") + Duration::hours(hour as i64 - 1);
        let temp: f64 = fields[EPW_DRY_BULB_FIELD].parse().map_err(|_| {
            parse_error(
                path,
                line,
                format!("bad dry-bulb temperature '{}'", fields[EPW_DRY_BULB_FIELD]),
            )
        })?;
        rows.push((line, ts, temp));
    }
    check_hourly(path, &rows)
}
