//! Operator-facing events derived from prediction series: moving-average
//! smoothing, local-maximum detection, and matching of predicted switch
//! points against what the plant actually did.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    PredictedSwitchOff,
    PredictedSwitchOn,
    Peak,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventMarker {
    pub step: u64,
    pub kind: EventKind,
    /// Half-width of the window the marker was confirmed over.
    pub confidence_window: u64,
}

/// Minimum rise of a peak above the lowest value in its window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Prominence {
    Absolute {
        value: f64,
    },
    /// `fraction` of the max−min range over the trailing `window` steps
    /// ending at the right edge of the peak window.
    RangeFraction {
        fraction: f64,
        window: usize,
    },
}

impl Default for Prominence {
    fn default() -> Self {
        Prominence::RangeFraction {
            fraction: 0.1,
            window: 1440,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EventParams {
    /// Odd moving-average window, in steps.
    pub smoothing_window: usize,
    /// Peak half-width `w`, in steps.
    pub half_width: usize,
    pub prominence: Prominence,
}

impl Default for EventParams {
    fn default() -> Self {
        EventParams {
            smoothing_window: 15,
            half_width: 20,
            prominence: Prominence::default(),
        }
    }
}

impl EventParams {
    pub fn validate(&self) -> Result<()> {
        if self.smoothing_window == 0 || self.smoothing_window.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "smoothing window must be odd and >= 1, got {}",
                self.smoothing_window
            )));
        }
        if self.half_width == 0 {
            return Err(Error::Config("peak half-width must be >= 1".into()));
        }
        match self.prominence {
            Prominence::Absolute { value } if value.is_nan() || value < 0.0 => {
                Err(Error::Config(format!("prominence must be >= 0, got {value}")))
            }
            Prominence::RangeFraction { fraction, window } if fraction.is_nan() || fraction < 0.0 || window == 0 => {
                Err(Error::Config(
                    "relative prominence needs fraction >= 0 and window >= 1".into(),
                ))
            }
            _ => Ok(()),
        }
    }
}

/// Centered moving average; near the ends the window shrinks to what is
/// available.
pub fn smooth(series: &[f64], window: usize) -> Result<Vec<f64>> {
    if window == 0 || window.is_multiple_of(2) {
        return Err(Error::Domain(format!(
            "smoothing window must be odd and >= 1, got {window}"
        )));
    }
    if window > series.len() {
        return Err(Error::Domain(format!(
            "smoothing window {window} exceeds series length {}",
            series.len()
        )));
    }
    let h = window / 2;
    let n = series.len();
    Ok((0..n)
        .map(|i| centered_mean(series, i.saturating_sub(h)..(i + h + 1).min(n), series[i]))
        .collect())
}

// Mean taken relative to the center sample so constant stretches stay exact.
fn centered_mean(series: &[f64], range: std::ops::Range<usize>, center: f64) -> f64 {
    let k = range.len() as f64;
    center + series[range].iter().map(|v| v - center).sum::<f64>() / k
}

fn is_peak(get: impl Fn(usize) -> f64, s: usize, w: usize, delta: f64) -> bool {
    let v = get(s);
    let mut lo = v;
    for j in s - w..s {
        let x = get(j);
        if x >= v {
            return false;
        }
        lo = lo.min(x);
    }
    for j in s + 1..=s + w {
        let x = get(j);
        if x > v {
            return false;
        }
        lo = lo.min(x);
    }
    v - lo >= delta
}

fn resolve_prominence(get: impl Fn(usize) -> f64, right: usize, prominence: Prominence) -> f64 {
    match prominence {
        Prominence::Absolute { value } => value,
        Prominence::RangeFraction { fraction, window } => {
            let start = (right + 1).saturating_sub(window);
            let (lo, hi) = (start..=right).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), j| {
                let x = get(j);
                (lo.min(x), hi.max(x))
            });
            fraction * (hi - lo)
        }
    }
}

/// Local maxima: `s` is marked when it is the largest value in
/// `[s − w, s + w]` (the earliest wins ties) and rises at least the
/// prominence above the smallest value there. The full window must lie
/// inside the series.
pub fn detect_peaks(series: &[f64], half_width: usize, prominence: Prominence) -> Vec<EventMarker> {
    let w = half_width.max(1);
    let n = series.len();
    if n < 2 * w + 1 {
        return Vec::new();
    }
    let get = |j: usize| series[j];
    let mut out: Vec<EventMarker> = Vec::new();
    for s in w..n - w {
        // cheap pre-filter before the window scan
        if series[s] <= series[s - 1] || series[s] < series[s + 1] {
            continue;
        }
        let delta = resolve_prominence(get, s + w, prominence);
        if is_peak(get, s, w, delta) && out.last().is_none_or(|m| s as u64 - m.step >= w as u64) {
            out.push(EventMarker {
                step: s as u64,
                kind: EventKind::Peak,
                confidence_window: w as u64,
            });
        }
    }
    out
}

/// Local minima, found as peaks of the negated series.
pub fn detect_troughs(series: &[f64], half_width: usize, prominence: Prominence) -> Vec<EventMarker> {
    let neg: Vec<f64> = series.iter().map(|v| -v).collect();
    detect_peaks(&neg, half_width, prominence)
}

/// Smooths a predicted indoor-temperature series and marks its peaks as
/// predicted switch-off events and its troughs as predicted switch-on events.
pub fn switch_markers(prediction: &[f64], params: &EventParams) -> Result<Vec<EventMarker>> {
    params.validate()?;
    let window = params.smoothing_window.min(odd_floor(prediction.len()));
    if window == 0 {
        return Ok(Vec::new());
    }
    let smoothed = smooth(prediction, window)?;
    let mut markers: Vec<EventMarker> = detect_peaks(&smoothed, params.half_width, params.prominence)
        .into_iter()
        .map(|m| EventMarker {
            kind: EventKind::PredictedSwitchOff,
            ..m
        })
        .chain(
            detect_troughs(&smoothed, params.half_width, params.prominence)
                .into_iter()
                .map(|m| EventMarker {
                    kind: EventKind::PredictedSwitchOn,
                    ..m
                }),
        )
        .collect();
    markers.sort_by_key(|m| (m.step, m.kind == EventKind::PredictedSwitchOn));
    Ok(markers)
}

fn odd_floor(n: usize) -> usize {
    if n % 2 == 1 {
        n
    } else {
        n.saturating_sub(1)
    }
}

/// Steps at which a binary signal goes from on to off.
pub fn falling_edges(signal: &[bool]) -> Vec<u64> {
    signal
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[0] && !w[1])
        .map(|(i, _)| i as u64 + 1)
        .collect()
}

/// Steps at which a binary signal goes from off to on.
pub fn rising_edges(signal: &[bool]) -> Vec<u64> {
    signal
        .windows(2)
        .enumerate()
        .filter(|(_, w)| !w[0] && w[1])
        .map(|(i, _)| i as u64 + 1)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrecursorStats {
    pub events: usize,
    pub anticipated: usize,
}

impl PrecursorStats {
    pub fn rate(&self) -> f64 {
        if self.events == 0 {
            0.0
        } else {
            self.anticipated as f64 / self.events as f64
        }
    }
}

/// Counts actual events at or after `from_step` that have a marker of
/// `kind` in `[event − lead, event]`.
pub fn precursor_stats(
    markers: &[EventMarker],
    kind: EventKind,
    actual: &[u64],
    lead: u64,
    from_step: u64,
) -> PrecursorStats {
    let steps: Vec<u64> = markers.iter().filter(|m| m.kind == kind).map(|m| m.step).collect();
    let relevant: Vec<u64> = actual.iter().copied().filter(|&e| e >= from_step).collect();
    let anticipated = relevant
        .iter()
        .filter(|&&e| {
            let lo = e.saturating_sub(lead);
            steps.iter().any(|&m| m >= lo && m <= e)
        })
        .count();
    PrecursorStats {
        events: relevant.len(),
        anticipated,
    }
}

/// Online counterpart of [`switch_markers`]. A value pushed at step `k`
/// can confirm markers up to step `k − h − w`, where `h` is half the
/// smoothing window; memory is bounded by the window sizes.
#[derive(Debug, Clone)]
pub struct StreamingEvents {
    params: EventParams,
    raw: VecDeque<f64>,
    raw_start: usize,
    raw_len: usize,
    smoothed: VecDeque<f64>,
    smoothed_start: usize,
    smoothed_len: usize,
    last_peak: Option<u64>,
    last_trough: Option<u64>,
}

impl StreamingEvents {
    pub fn new(params: EventParams) -> Result<Self> {
        params.validate()?;
        Ok(StreamingEvents {
            params,
            raw: VecDeque::new(),
            raw_start: 0,
            raw_len: 0,
            smoothed: VecDeque::new(),
            smoothed_start: 0,
            smoothed_len: 0,
            last_peak: None,
            last_trough: None,
        })
    }

    /// Steps between a sample arriving and the latest marker it can confirm.
    pub fn latency(&self) -> usize {
        self.params.smoothing_window / 2 + self.params.half_width
    }

    fn range_window(&self) -> usize {
        match self.params.prominence {
            Prominence::Absolute { .. } => 0,
            Prominence::RangeFraction { window, .. } => window,
        }
    }

    pub fn push(&mut self, value: f64) -> Vec<EventMarker> {
        let h = self.params.smoothing_window / 2;
        self.raw.push_back(value);
        self.raw_len += 1;
        let newest = self.raw_len - 1;
        let mut out = Vec::new();
        if newest >= h {
            let i = newest - h;
            let lo = i.saturating_sub(h);
            let get = |j: usize| self.raw[j - self.raw_start];
            let center = get(i);
            let k = (newest + 1 - lo) as f64;
            let mean = center + (lo..=newest).map(|j| get(j) - center).sum::<f64>() / k;
            out = self.push_smoothed(mean);
        }
        while self.raw.len() > 2 * h + 1 {
            self.raw.pop_front();
            self.raw_start += 1;
        }
        out
    }

    fn push_smoothed(&mut self, value: f64) -> Vec<EventMarker> {
        let w = self.params.half_width;
        self.smoothed.push_back(value);
        self.smoothed_len += 1;
        let mut out = Vec::new();
        let newest = self.smoothed_len - 1;
        if newest >= 2 * w {
            let s = newest - w;
            let start = self.smoothed_start;
            let buf = &self.smoothed;
            let get = |j: usize| buf[j - start];
            let delta = resolve_prominence(get, newest, self.params.prominence);
            let neg_delta = resolve_prominence(|j| -get(j), newest, self.params.prominence);
            if is_peak(get, s, w, delta) && self.last_peak.is_none_or(|p| s as u64 - p >= w as u64) {
                self.last_peak = Some(s as u64);
                out.push(EventMarker {
                    step: s as u64,
                    kind: EventKind::PredictedSwitchOff,
                    confidence_window: w as u64,
                });
            }
            if is_peak(|j| -get(j), s, w, neg_delta) && self.last_trough.is_none_or(|p| s as u64 - p >= w as u64) {
                self.last_trough = Some(s as u64);
                out.push(EventMarker {
                    step: s as u64,
                    kind: EventKind::PredictedSwitchOn,
                    confidence_window: w as u64,
                });
            }
        }
        let keep = (2 * w + 1).max(self.range_window());
        while self.smoothed.len() > keep {
            self.smoothed.pop_front();
            self.smoothed_start += 1;
        }
        out
    }
}
