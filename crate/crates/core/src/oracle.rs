//! Offline reference values: truncated discounted returns computed with
//! full knowledge of the future signal, and error metrics against them.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_EPSILON: f64 = 1e-6;

/// Truncated returns `G[t] = Σ_{k<K} γ^k R[t+k+1]` of a recorded signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnSeries {
    pub gamma: f64,
    pub values: Vec<f64>,
    /// True where the truncation window runs past the end of the data.
    pub partial: Vec<bool>,
    pub truncation: usize,
    /// `max|R| · γ^K / (1 − γ)`: bound on the discarded tail.
    pub tail_bound: f64,
}

impl ReturnSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `G[t] · (1 − γ)`, on the scale of the signal itself.
    pub fn normalized(&self) -> Vec<f64> {
        let s = 1.0 - self.gamma;
        self.values.iter().map(|g| g * s).collect()
    }

    /// Index of the first partial step (equals `len()` if none).
    pub fn complete_len(&self) -> usize {
        self.partial.iter().position(|&p| p).unwrap_or(self.values.len())
    }

    /// RMSE of `predicted` against this series over `window`, skipping partial steps.
    pub fn rmse(&self, predicted: &[f64], window: Range<usize>, normalized: bool) -> Result<f64> {
        let reference = if normalized {
            self.normalized()
        } else {
            self.values.clone()
        };
        let keep: Vec<bool> = self.partial.iter().map(|p| !p).collect();
        rmse_masked(predicted, &reference, &keep, window)
    }
}

/// Number of terms needed so the discarded tail is below `epsilon`.
pub fn truncation_horizon(gamma: f64, epsilon: f64, max_abs: f64) -> usize {
    if gamma == 0.0 || max_abs == 0.0 {
        return 1;
    }
    let k = ((epsilon * (1.0 - gamma) / max_abs).ln() / gamma.ln()).ceil();
    if k.is_finite() && k > 1.0 {
        k as usize
    } else {
        1
    }
}

/// Ideal predictions for discount `gamma`, truncated so the tail error is
/// at most `epsilon` in signal units.
pub fn ideal_prediction(signal: &[f64], gamma: f64, epsilon: f64) -> Result<ReturnSeries> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::Domain(format!("gamma must lie in [0, 1), got {gamma}")));
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::Domain(format!("epsilon must be positive, got {epsilon}")));
    }
    if signal.iter().any(|r| !r.is_finite()) {
        return Err(Error::Domain("signal contains non-finite values".into()));
    }
    let n = signal.len();
    let max_abs = signal.iter().fold(0.0_f64, |m, r| m.max(r.abs()));
    let k = truncation_horizon(gamma, epsilon, max_abs);

    // Untruncated tails H[t] = R[t+1] + γ H[t+1], then G[t] = H[t] − γ^K H[t+K].
    let mut tail = vec![0.0; n];
    for t in (0..n.saturating_sub(1)).rev() {
        tail[t] = signal[t + 1] + gamma * tail[t + 1];
    }
    let gk = gamma.powi(k.min(i32::MAX as usize) as i32);
    let mut values = Vec::with_capacity(n);
    let mut partial = Vec::with_capacity(n);
    for t in 0..n {
        if t + k < n {
            values.push(tail[t] - gk * tail[t + k]);
            partial.push(false);
        } else {
            values.push(tail[t]);
            partial.push(true);
        }
    }
    Ok(ReturnSeries {
        gamma,
        values,
        partial,
        truncation: k,
        tail_bound: max_abs * gk / (1.0 - gamma),
    })
}

/// Root mean squared error over `t >= burn_in`.
pub fn rmse(predicted: &[f64], reference: &[f64], burn_in: usize) -> Result<f64> {
    if burn_in >= predicted.len() {
        return Err(Error::Domain(format!(
            "burn-in {burn_in} leaves no samples out of {}",
            predicted.len()
        )));
    }
    let keep = vec![true; predicted.len()];
    rmse_masked(predicted, reference, &keep, burn_in..predicted.len())
}

/// RMSE over the steps of `window` where `keep` is true.
pub fn rmse_masked(predicted: &[f64], reference: &[f64], keep: &[bool], window: Range<usize>) -> Result<f64> {
    if predicted.len() != reference.len() || keep.len() != reference.len() {
        return Err(Error::Domain(format!(
            "series lengths differ: {} predicted, {} reference",
            predicted.len(),
            reference.len()
        )));
    }
    let end = window.end.min(predicted.len());
    let (sum, count) = (window.start..end)
        .filter(|&t| keep[t])
        .fold((0.0, 0usize), |(s, c), t| {
            let d = predicted[t] - reference[t];
            (s + d * d, c + 1)
        });
    if count == 0 {
        return Err(Error::Domain("empty comparison window".into()));
    }
    Ok((sum / count as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_signal_is_a_truncated_geometric_series() {
        let c = 2.5;
        let gamma = 0.9;
        let r = ideal_prediction(&vec![c; 2000], gamma, 1e-6).unwrap();
        let k = r.truncation as i32;
        let expected = c * (1.0 - gamma.powi(k)) / (1.0 - gamma);
        assert!(!r.partial[0]);
        assert!((r.values[0] - expected).abs() < 1e-10);
        assert!((r.values[0] - c / (1.0 - gamma)).abs() <= r.tail_bound + 1e-12);
    }

    #[test]
    fn zero_discount_is_the_next_reward() {
        let s = [3.0, -1.0, 4.0, 1.0, 5.0];
        let r = ideal_prediction(&s, 0.0, 1e-6).unwrap();
        assert_eq!(r.truncation, 1);
        assert_eq!(&r.values[..4], &[-1.0, 4.0, 1.0, 5.0]);
        assert_eq!(r.partial, vec![false, false, false, false, true]);
    }

    #[test]
    fn impulse_response_decays_geometrically() {
        let s_at = 40;
        let mut s = vec![0.0; 100];
        s[s_at] = 1.0;
        let r = ideal_prediction(&s, 0.5, 1e-6).unwrap();
        for t in 0..s_at {
            // direct summation
            let direct: f64 = (0..r.truncation)
                .filter(|k| t + k + 1 < s.len())
                .map(|k| 0.5_f64.powi(k as i32) * s[t + k + 1])
                .sum();
            assert!((r.values[t] - direct).abs() < 1e-15);
            if s_at - t - 1 < r.truncation {
                assert!((r.values[t] - 0.5_f64.powi((s_at - t - 1) as i32)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn gamma_outside_unit_interval_is_rejected() {
        assert!(matches!(ideal_prediction(&[1.0], 1.0, 1e-6), Err(Error::Domain(_))));
        assert!(matches!(ideal_prediction(&[1.0], -0.1, 1e-6), Err(Error::Domain(_))));
    }

    #[test]
    fn truncation_horizon_for_full_scale_signal() {
        // ln(1e-6 · 0.02 / 25) / ln(0.98)
        assert_eq!(truncation_horizon(0.98, 1e-6, 25.0), 1037);
    }

    #[test]
    fn rmse_basics() {
        let a = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(rmse(&a, &a, 0).unwrap(), 0.0);
        let b: Vec<f64> = a.iter().map(|x| x + 0.5).collect();
        assert!((rmse(&a, &b, 1).unwrap() - 0.5).abs() < 1e-15);
        assert!(matches!(rmse(&a, &b, 4), Err(Error::Domain(_))));
        assert!(matches!(rmse(&a, &b[..3], 0), Err(Error::Domain(_))));
    }

    #[test]
    fn partial_steps_are_excluded() {
        let s = vec![1.0; 50];
        let r = ideal_prediction(&s, 0.5, 1e-3).unwrap();
        let mut pred = r.values.clone();
        let first_partial = r.complete_len();
        for p in &mut pred[first_partial..] {
            *p += 100.0;
        }
        assert_eq!(r.rmse(&pred, 0..50, false).unwrap(), 0.0);
        assert!(r.rmse(&pred, first_partial..50, false).is_err());
    }
}
