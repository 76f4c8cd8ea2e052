//! A bank of linear TD(λ) learners, one per prediction timescale, that all
//! read the same tile-coded feature vector and predict the same pseudo
//! reward (a raw sensor signal).
//!
//! Per horizon `i` and step `t` the learner keeps a weight vector and an
//! accumulating eligibility trace:
//!
//! ```text
//! δ  = R[t+1] + γ·φ[t+1]·θ − φ[t]·θ
//! z  = γ·λ·z + φ[t]
//! θ  = θ + α·δ·z
//! ```
//!
//! and reports the prediction `V = φ·θ`, which estimates the discounted sum
//! of future pseudo rewards.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureVector, HistoryCoder, Observation};

/// Discount factor for a timescale of `tau` steps.
pub fn gamma_from_tau(tau: f64) -> f64 {
    1.0 - 1.0 / tau
}

/// One prediction timescale, given either as `tau` (steps) or `gamma`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "HorizonRepr", into = "HorizonRepr")]
pub struct HorizonSpec {
    label: String,
    gamma: f64,
    tau: Option<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HorizonRepr {
    label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gamma: Option<f64>,
}

impl TryFrom<HorizonRepr> for HorizonSpec {
    type Error = Error;

    fn try_from(r: HorizonRepr) -> Result<Self> {
        match (r.tau, r.gamma) {
            (Some(tau), None) => HorizonSpec::from_tau(r.label, tau),
            (None, Some(gamma)) => HorizonSpec::from_gamma(r.label, gamma),
            _ => Err(Error::Config(format!(
                "horizon '{}' must set exactly one of tau or gamma",
                r.label
            ))),
        }
    }
}

impl From<HorizonSpec> for HorizonRepr {
    fn from(h: HorizonSpec) -> Self {
        match h.tau {
            Some(tau) => HorizonRepr {
                label: h.label,
                tau: Some(tau),
                gamma: None,
            },
            None => HorizonRepr {
                label: h.label,
                tau: None,
                gamma: Some(h.gamma),
            },
        }
    }
}

impl HorizonSpec {
    pub fn from_tau(label: impl Into<String>, tau: f64) -> Result<Self> {
        let label = label.into();
        if !(tau.is_finite() && tau >= 1.0) {
            return Err(Error::Config(format!("horizon '{label}': tau must be >= 1, got {tau}")));
        }
        Ok(HorizonSpec {
            gamma: gamma_from_tau(tau),
            tau: Some(tau),
            label,
        })
    }

    pub fn from_gamma(label: impl Into<String>, gamma: f64) -> Result<Self> {
        let label = label.into();
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::Config(format!(
                "horizon '{label}': gamma must lie in [0, 1), got {gamma}"
            )));
        }
        Ok(HorizonSpec {
            label,
            gamma,
            tau: None,
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Scale factor mapping a return-scale prediction onto the signal's own units.
    pub fn normalizer(&self) -> f64 {
        1.0 - self.gamma
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BankConfig {
    pub horizons: Vec<HorizonSpec>,
    /// Step size α. Defaults to `0.1 / active_features`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_size: Option<f64>,
    #[serde(default = "default_trace_decay")]
    pub trace_decay: f64,
    pub pseudo_reward_channel: String,
}

fn default_trace_decay() -> f64 {
    0.9
}

impl BankConfig {
    pub fn new(horizons: Vec<HorizonSpec>, pseudo_reward_channel: impl Into<String>) -> Self {
        BankConfig {
            horizons,
            step_size: None,
            trace_decay: default_trace_decay(),
            pseudo_reward_channel: pseudo_reward_channel.into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizons.is_empty() {
            return Err(Error::Config("at least one prediction horizon is required".into()));
        }
        if let Some(a) = self.step_size {
            if !(a.is_finite() && a >= 0.0) {
                return Err(Error::Config(format!("step size must be finite and >= 0, got {a}")));
            }
        }
        if !(0.0..=1.0).contains(&self.trace_decay) {
            return Err(Error::Config(format!(
                "trace decay must lie in [0, 1], got {}",
                self.trace_decay
            )));
        }
        Ok(())
    }

    pub fn resolved_step_size(&self, active_features: usize) -> f64 {
        self.step_size.unwrap_or_else(|| 0.1 / active_features.max(1) as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Learner {
    horizon: HorizonSpec,
    weights: Vec<f64>,
    traces: Vec<f64>,
}

impl Learner {
    fn value(&self, phi: &FeatureVector) -> f64 {
        phi.active_indices().iter().map(|&j| self.weights[j]).sum()
    }

    fn update(&mut self, alpha: f64, lambda: f64, phi: &FeatureVector, reward: f64, next: &FeatureVector) -> f64 {
        let gamma = self.horizon.gamma;
        let delta = reward + gamma * self.value(next) - self.value(phi);

        let decay = gamma * lambda;
        if decay == 0.0 {
            self.traces.iter_mut().for_each(|z| *z = 0.0);
        } else {
            self.traces.iter_mut().for_each(|z| *z *= decay);
        }
        for &j in phi.active_indices() {
            self.traces[j] += 1.0;
        }

        let scale = alpha * delta;
        if scale != 0.0 {
            for (w, z) in self.weights.iter_mut().zip(&self.traces) {
                *w += scale * z;
            }
        }
        delta
    }
}

/// Output of one streaming step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub step: u64,
    pub pseudo_reward: f64,
    /// Return-scale predictions, one per horizon.
    pub predictions: Vec<f64>,
    /// `predictions[i] * (1 - γ[i])`, on the scale of the signal itself.
    pub normalized: Vec<f64>,
    /// TD errors of the update applied this step; zero when no update ran.
    pub td_errors: Vec<f64>,
    pub updated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BankSnapshot {
    pub config: BankConfig,
    pub step_size: f64,
    pub feature_count: usize,
    pub step: u64,
    pub previous: Option<FeatureVector>,
    learners: Vec<Learner>,
}

/// Per-horizon weights and traces plus the shared step size and trace decay.
#[derive(Debug, Clone)]
pub struct PredictorBank {
    config: BankConfig,
    alpha: f64,
    feature_count: usize,
    learners: Vec<Learner>,
    previous: Option<FeatureVector>,
    step: u64,
}

impl PredictorBank {
    /// `active_features` is the warm active-index count of the coder; it
    /// sets the default step size.
    pub fn new(config: BankConfig, feature_count: usize, active_features: usize) -> Result<Self> {
        config.validate()?;
        let alpha = config.resolved_step_size(active_features);
        let learners = config
            .horizons
            .iter()
            .map(|h| Learner {
                horizon: h.clone(),
                weights: vec![0.0; feature_count],
                traces: vec![0.0; feature_count],
            })
            .collect();
        Ok(PredictorBank {
            config,
            alpha,
            feature_count,
            learners,
            previous: None,
            step: 0,
        })
    }

    pub fn config(&self) -> &BankConfig {
        &self.config
    }

    pub fn horizons(&self) -> impl Iterator<Item = &HorizonSpec> {
        self.learners.iter().map(|l| &l.horizon)
    }

    pub fn step_size(&self) -> f64 {
        self.alpha
    }

    pub fn set_step_size(&mut self, alpha: f64) {
        self.alpha = alpha;
    }

    pub fn trace_decay(&self) -> f64 {
        self.config.trace_decay
    }

    pub fn feature_count(&self) -> usize {
        self.feature_count
    }

    /// Number of observations consumed so far.
    pub fn steps_seen(&self) -> u64 {
        self.step
    }

    pub fn weights(&self, horizon: usize) -> &[f64] {
        &self.learners[horizon].weights
    }

    pub fn traces(&self, horizon: usize) -> &[f64] {
        &self.learners[horizon].traces
    }

    fn check(&self, phi: &FeatureVector) -> Result<()> {
        if phi.total_features() != self.feature_count {
            return Err(Error::Config(format!(
                "feature vector has {} features, bank expects {}",
                phi.total_features(),
                self.feature_count
            )));
        }
        Ok(())
    }

    /// Sparse dot product of `phi` with each horizon's weights.
    pub fn predict(&self, phi: &FeatureVector) -> Result<Vec<f64>> {
        self.check(phi)?;
        Ok(self.learners.iter().map(|l| l.value(phi)).collect())
    }

    /// One TD(λ) update per horizon for the transition `phi_t → phi_next`
    /// with pseudo reward `reward_next`. Returns the TD errors.
    pub fn update(&mut self, phi_t: &FeatureVector, reward_next: f64, phi_next: &FeatureVector) -> Result<Vec<f64>> {
        self.check(phi_t)?;
        self.check(phi_next)?;
        if !reward_next.is_finite() {
            return Err(Error::Input(format!("pseudo reward is not finite: {reward_next}")));
        }
        let (alpha, lambda) = (self.alpha, self.config.trace_decay);
        Ok(self
            .learners
            .iter_mut()
            .map(|l| l.update(alpha, lambda, phi_t, reward_next, phi_next))
            .collect())
    }

    /// Forgets the previous feature vector and zeroes all traces; weights are kept.
    pub fn reset_episode(&mut self) {
        self.previous = None;
        for l in &mut self.learners {
            l.traces.iter_mut().for_each(|z| *z = 0.0);
        }
    }

    /// Encodes `obs`, applies the update for the transition from the
    /// previous step (if any) and predicts from the new feature vector.
    pub fn step(&mut self, coder: &mut HistoryCoder, obs: &Observation) -> Result<PredictionRecord> {
        let channel = &self.config.pseudo_reward_channel;
        let reward = obs
            .get(channel)
            .ok_or_else(|| Error::Config(format!("observation is missing pseudo reward channel '{channel}'")))?;
        if !reward.is_finite() {
            return Err(Error::Input(format!("pseudo reward is not finite: {reward}")));
        }
        let phi = coder.encode(obs)?;
        self.check(&phi)?;

        let (td_errors, updated) = match self.previous.take() {
            Some(prev) => (self.update(&prev, reward, &phi)?, true),
            None => (vec![0.0; self.learners.len()], false),
        };
        let predictions = self.predict(&phi)?;
        let normalized = predictions
            .iter()
            .zip(&self.learners)
            .map(|(v, l)| v * l.horizon.normalizer())
            .collect();
        self.previous = Some(phi);

        let record = PredictionRecord {
            step: self.step,
            pseudo_reward: reward,
            predictions,
            normalized,
            td_errors,
            updated,
        };
        self.step += 1;
        Ok(record)
    }

    pub fn snapshot(&self) -> BankSnapshot {
        BankSnapshot {
            config: self.config.clone(),
            step_size: self.alpha,
            feature_count: self.feature_count,
            step: self.step,
            previous: self.previous.clone(),
            learners: self.learners.clone(),
        }
    }

    pub fn from_snapshot(s: BankSnapshot) -> Result<Self> {
        s.config.validate()?;
        if s.learners.len() != s.config.horizons.len()
            || s.learners
                .iter()
                .any(|l| l.weights.len() != s.feature_count || l.traces.len() != s.feature_count)
        {
            return Err(Error::Config("bank snapshot is internally inconsistent".into()));
        }
        Ok(PredictorBank {
            config: s.config,
            alpha: s.step_size,
            feature_count: s.feature_count,
            learners: s.learners,
            previous: s.previous,
            step: s.step,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{CoderConfig, DimSpec, TilingGroupSpec};

    fn one_hot(i: usize, n: usize) -> FeatureVector {
        FeatureVector::from_indices(vec![i], n).unwrap()
    }

    fn bank(gammas: &[f64], n: usize, alpha: f64, lambda: f64) -> PredictorBank {
        let horizons = gammas
            .iter()
            .map(|&g| HorizonSpec::from_gamma(format!("g{g}"), g).unwrap())
            .collect();
        let mut cfg = BankConfig::new(horizons, "r");
        cfg.step_size = Some(alpha);
        cfg.trace_decay = lambda;
        PredictorBank::new(cfg, n, 1).unwrap()
    }

    #[test]
    fn gamma_from_tau_matches_discount_table() {
        assert_eq!(gamma_from_tau(4.0), 0.75);
        assert_eq!(gamma_from_tau(16.0), 0.9375);
        assert_eq!(gamma_from_tau(50.0), 0.98);
    }

    #[test]
    fn horizon_requires_exactly_one_of_tau_and_gamma() {
        let ok: HorizonSpec = toml::from_str("label = 'a'\ntau = 50").unwrap();
        assert_eq!(ok.gamma(), 0.98);
        assert!(toml::from_str::<HorizonSpec>("label = 'a'\ntau = 50\ngamma = 0.9").is_err());
        assert!(toml::from_str::<HorizonSpec>("label = 'a'").is_err());
        assert!(toml::from_str::<HorizonSpec>("label = 'a'\ngamma = 1.0").is_err());
        assert!(HorizonSpec::from_tau("x", 0.5).is_err());
    }

    #[test]
    fn zero_weights_predict_zero() {
        let b = bank(&[0.5, 0.9], 10, 0.1, 0.9);
        let phi = FeatureVector::from_indices(vec![1, 4, 7], 10).unwrap();
        assert_eq!(b.predict(&phi).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn unit_weights_count_active_features() {
        let mut b = bank(&[0.5], 10, 0.1, 0.9);
        b.learners[0].weights.iter_mut().for_each(|w| *w = 1.0);
        let phi = FeatureVector::from_indices(vec![1, 4, 7], 10).unwrap();
        assert_eq!(b.predict(&phi).unwrap(), vec![3.0]);
    }

    #[test]
    fn dimension_mismatch_is_a_config_error() {
        let mut b = bank(&[0.5], 10, 0.1, 0.9);
        let phi = one_hot(0, 11);
        assert!(matches!(b.predict(&phi), Err(Error::Config(_))));
        assert!(matches!(b.update(&phi, 1.0, &phi), Err(Error::Config(_))));
    }

    #[test]
    fn non_finite_reward_is_an_input_error() {
        let mut b = bank(&[0.5], 4, 0.1, 0.9);
        let phi = one_hot(0, 4);
        assert!(matches!(b.update(&phi, f64::NAN, &phi), Err(Error::Input(_))));
    }

    #[test]
    fn zero_step_size_leaves_weights_untouched() {
        let mut b = bank(&[0.0, 0.9], 6, 0.0, 0.9);
        for k in 0..50 {
            b.update(&one_hot(k % 6, 6), k as f64, &one_hot((k + 1) % 6, 6))
                .unwrap();
        }
        assert!(b.weights(0).iter().chain(b.weights(1)).all(|&w| w == 0.0));
    }

    #[test]
    fn zero_discount_is_one_step_regression() {
        let mut b = bank(&[0.0], 5, 0.5, 0.7);
        b.learners[0].weights = vec![0.1, 0.2, 0.3, 0.4, 0.5];
        let phi = FeatureVector::from_indices(vec![1, 3], 5).unwrap();
        let next = FeatureVector::from_indices(vec![0, 4], 5).unwrap();
        b.learners[0].traces = vec![9.0; 5];
        let delta = b.update(&phi, 2.0, &next).unwrap()[0];
        assert!((delta - (2.0 - 0.6)).abs() < 1e-15);
        assert_eq!(b.traces(0), &[0.0, 1.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn traces_start_at_zero() {
        let b = bank(&[0.5, 0.9], 8, 0.1, 0.9);
        assert!(b.traces(0).iter().chain(b.traces(1)).all(|&z| z == 0.0));
    }

    #[test]
    fn three_state_chain_converges_to_returns() {
        // 0 → 1 → 2 → terminal, reward 1 on the final transition.
        let rewards = [0.0, 0.0, 1.0];
        let gamma = 0.5;
        // value iteration oracle
        let mut expected = [0.0; 3];
        for _ in 0..200 {
            for s in 0..3 {
                let next = if s < 2 { expected[s + 1] } else { 0.0 };
                expected[s] = rewards[s] + gamma * next;
            }
        }
        assert_eq!(expected, [0.25, 0.5, 1.0]);

        let terminal = FeatureVector::from_indices(vec![], 3).unwrap();
        let mut b = bank(&[gamma], 3, 0.1, 0.0);
        for _ in 0..5_000 {
            for (s, &r) in rewards.iter().enumerate() {
                let next = if s < 2 { one_hot(s + 1, 3) } else { terminal.clone() };
                b.update(&one_hot(s, 3), r, &next).unwrap();
            }
            b.reset_episode();
        }
        for (w, e) in b.weights(0).iter().zip(expected) {
            assert!((w - e).abs() < 1e-3, "{w} vs {e}");
        }
    }

    #[test]
    fn cold_start_emits_zero_and_skips_update() {
        let cfg = CoderConfig {
            groups: vec![TilingGroupSpec::new(
                "r",
                vec![DimSpec::continuous("r", 0.0, 1.0, 4)],
                2,
            )],
            history_depth: 0,
        };
        let mut coder = HistoryCoder::new(cfg.clone(), 0).unwrap();
        let mut b = PredictorBank::new(
            BankConfig::new(vec![HorizonSpec::from_gamma("h", 0.9).unwrap()], "r"),
            cfg.total_features(),
            cfg.active_per_step(),
        )
        .unwrap();
        assert_eq!(b.step_size(), 0.05);
        let rec = b.step(&mut coder, &Observation::new().with("r", 0.3)).unwrap();
        assert_eq!(rec.step, 0);
        assert!(!rec.updated);
        assert_eq!(rec.predictions, vec![0.0]);
        assert!(b.weights(0).iter().all(|&w| w == 0.0));
        let rec = b.step(&mut coder, &Observation::new().with("r", 0.4)).unwrap();
        assert!(rec.updated);
        assert_eq!(rec.td_errors, vec![0.4]);
    }

    #[test]
    fn step_requires_pseudo_reward_channel() {
        let cfg = CoderConfig {
            groups: vec![TilingGroupSpec::new(
                "x",
                vec![DimSpec::continuous("x", 0.0, 1.0, 4)],
                1,
            )],
            history_depth: 0,
        };
        let mut coder = HistoryCoder::new(cfg.clone(), 0).unwrap();
        let mut b = PredictorBank::new(
            BankConfig::new(vec![HorizonSpec::from_gamma("h", 0.9).unwrap()], "r"),
            cfg.total_features(),
            1,
        )
        .unwrap();
        let err = b.step(&mut coder, &Observation::new().with("x", 0.3)).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn snapshot_round_trip_resumes_identically() {
        let mut a = bank(&[0.5, 0.9], 4, 0.1, 0.8);
        for k in 0..30 {
            a.update(&one_hot(k % 4, 4), (k % 3) as f64, &one_hot((k + 1) % 4, 4))
                .unwrap();
        }
        let json = serde_json::to_string(&a.snapshot()).unwrap();
        let mut b = PredictorBank::from_snapshot(serde_json::from_str(&json).unwrap()).unwrap();
        for k in 30..60 {
            let da = a.update(&one_hot(k % 4, 4), 1.5, &one_hot((k + 1) % 4, 4)).unwrap();
            let db = b.update(&one_hot(k % 4, 4), 1.5, &one_hot((k + 1) % 4, 4)).unwrap();
            assert_eq!(da, db);
        }
        assert_eq!(a.weights(1), b.weights(1));
    }
}
