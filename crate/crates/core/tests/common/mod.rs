#![allow(dead_code)]

use nextmon_core::features::FeatureVector;
use nextmon_core::nexting::{BankConfig, HorizonSpec, PredictorBank};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Small Markov chain with a reward received on arrival in each state.
#[derive(Debug, Clone)]
pub struct Chain {
    pub transition: Vec<Vec<f64>>,
    pub reward: Vec<f64>,
    pub gamma: f64,
}

impl Chain {
    pub fn states(&self) -> usize {
        self.reward.len()
    }

    /// Every state has exactly one successor.
    pub fn random_deterministic(seed: u64) -> Chain {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(2..=6);
        let transition = (0..n)
            .map(|_| {
                let mut row = vec![0.0; n];
                row[rng.gen_range(0..n)] = 1.0;
                row
            })
            .collect();
        Chain {
            transition,
            reward: (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            gamma: rng.gen_range(0.1..0.9),
        }
    }

    pub fn random_stochastic(seed: u64) -> Chain {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(2..=6);
        let transition = (0..n)
            .map(|_| {
                let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
                let total: f64 = w.iter().sum();
                w.into_iter().map(|x| x / total).collect()
            })
            .collect();
        Chain {
            transition,
            reward: (0..n).map(|_| rng.gen_range(0.0..1.0)).collect(),
            gamma: 0.5,
        }
    }

    pub fn next(&self, s: usize, rng: &mut impl Rng) -> usize {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for (j, p) in self.transition[s].iter().enumerate() {
            acc += p;
            if u < acc {
                return j;
            }
        }
        self.states() - 1
    }

    /// Expected discounted return from each state by brute-force value
    /// iteration, run until the update is below 1e-15.
    pub fn expected_returns(&self) -> Vec<f64> {
        let n = self.states();
        let mut v = vec![0.0; n];
        loop {
            let next: Vec<f64> = (0..n)
                .map(|s| {
                    (0..n)
                        .map(|j| self.transition[s][j] * (self.reward[j] + self.gamma * v[j]))
                        .sum()
                })
                .collect();
            let change = next.iter().zip(&v).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
            v = next;
            if change < 1e-15 {
                return v;
            }
        }
    }
}

pub fn one_hot(state: usize, n: usize) -> FeatureVector {
    FeatureVector::from_indices(vec![state], n).unwrap()
}

/// Tabular TD(λ) on `chain` with one-hot features, in episodes of
/// `episode_len` transitions started from uniformly random states.
/// `alpha` maps the update count to the step size. Returns the learned
/// weights after `updates` transitions.
pub fn learn_tabular(
    chain: &Chain,
    lambda: f64,
    updates: usize,
    episode_len: usize,
    alpha: impl Fn(usize) -> f64,
    seed: u64,
) -> Vec<f64> {
    let n = chain.states();
    let mut cfg = BankConfig::new(vec![HorizonSpec::from_gamma("g", chain.gamma).unwrap()], "r");
    cfg.trace_decay = lambda;
    let mut bank = PredictorBank::new(cfg, n, 1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut done = 0;
    while done < updates {
        bank.reset_episode();
        let mut s = rng.gen_range(0..n);
        for _ in 0..episode_len.min(updates - done) {
            let s2 = chain.next(s, &mut rng);
            bank.set_step_size(alpha(done));
            bank.update(&one_hot(s, n), chain.reward[s2], &one_hot(s2, n)).unwrap();
            s = s2;
            done += 1;
        }
    }
    bank.weights(0).to_vec()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
}

pub fn workspace_root() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn bundled_weather() -> nextmon_core::thermal::WeatherSeries {
    nextmon_core::thermal::load_weather(&workspace_root().join("data/weather/april_20d.csv")).unwrap()
}

/// Observed states of a 20-day run with controller period `dt`, each
/// step integrated with `substeps` Euler steps.
pub fn indoor_trajectory(dt: f64, substeps: u32) -> Vec<nextmon_core::thermal::HouseState> {
    use nextmon_core::thermal::{HouseParams, SetpointSchedule, Simulation};
    let weather = bundled_weather();
    let mut sim = Simulation::new(
        HouseParams::default(),
        weather,
        SetpointSchedule::constant(23.0),
        23.0,
        dt,
    )
    .unwrap()
    .with_substeps(substeps);
    (0..sim.steps_available()).map(|_| sim.step().unwrap()).collect()
}

/// Largest |ΔT_in| between two trajectories at common times; `b` may be
/// sampled `stride` times more densely than `a`.
pub fn max_deviation(
    a: &[nextmon_core::thermal::HouseState],
    b: &[nextmon_core::thermal::HouseState],
    stride: usize,
) -> f64 {
    assert_eq!(b.len(), stride * a.len());
    a.iter()
        .enumerate()
        .map(|(i, s)| (s.t_in - b[stride * i].t_in).abs())
        .fold(0.0, f64::max)
}

/// Indoor temperature driven open-loop by a recorded heater schedule
/// (one command per 60 s step), integrated with `substeps` Euler steps
/// per command. Returns T_in at the start of every step.
pub fn open_loop_trajectory(heater: &[bool], substeps: u32) -> Vec<f64> {
    use nextmon_core::thermal::{step_house, HouseParams, HouseState};
    let weather = bundled_weather();
    let params = HouseParams::default();
    let h = 60.0 / substeps as f64;
    let mut t_in = 23.0;
    let mut out = Vec::with_capacity(heater.len());
    for (i, &on) in heater.iter().enumerate() {
        out.push(t_in);
        for k in 0..substeps {
            let secs = i as f64 * 60.0 + k as f64 * h;
            let s = HouseState {
                step: i as u64,
                t_in,
                t_out: weather.sample(secs).unwrap(),
                heater_on: on,
                t_set: 23.0,
            };
            t_in = step_house(&params, &s, h).unwrap().t_in;
        }
    }
    out
}

/// The bundled thermal config with its output redirected to `out`.
pub fn thermal_config(out: &std::path::Path) -> nextmon_core::harness::RunConfig {
    let mut cfg = nextmon_core::harness::RunConfig::load(&workspace_root().join("configs/thermal.toml")).unwrap();
    cfg.output_dir = out.to_path_buf();
    cfg
}
