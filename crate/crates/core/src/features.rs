//! Joint tile coding of sensor channels into sparse binary feature vectors.
//!
//! A [`CoderConfig`] partitions the observed channels into tiling groups.
//! Each group covers its channels with `num_tilings` overlapping grids,
//! displaced from one another by fractions of a tile width. Every grid
//! contributes exactly one active tile, so a group always contributes
//! `num_tilings` active indices. The [`HistoryCoder`] additionally appends
//! the encodings of the previous `history_depth` steps, each shifted into
//! its own copy of the index space.

use std::collections::{BTreeMap, HashSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Named channel values for one time step: sensor readings plus the
/// controller's action.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Observation(BTreeMap<String, f64>);

impl Observation {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, channel: impl Into<String>, value: f64) -> Self {
        self.set(channel, value);
        self
    }

    pub fn set(&mut self, channel: impl Into<String>, value: f64) {
        self.0.insert(channel.into(), value);
    }

    pub fn get(&self, channel: &str) -> Option<f64> {
        self.0.get(channel).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.0.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

impl<S: Into<String>> FromIterator<(S, f64)> for Observation {
    fn from_iter<I: IntoIterator<Item = (S, f64)>>(iter: I) -> Self {
        Observation(iter.into_iter().map(|(k, v)| (k.into(), v)).collect())
    }
}

/// One dimension of a tiling group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimSpec {
    pub channel: String,
    pub lower: f64,
    pub upper: f64,
    pub tiles: usize,
    /// Discrete dimensions are never displaced between tilings, so every
    /// level keeps its own tile in each tiling.
    #[serde(default)]
    pub discrete: bool,
}

impl DimSpec {
    pub fn continuous(channel: impl Into<String>, lower: f64, upper: f64, tiles: usize) -> Self {
        DimSpec {
            channel: channel.into(),
            lower,
            upper,
            tiles,
            discrete: false,
        }
    }

    /// A discrete channel taking the integer levels `0..levels`.
    pub fn discrete(channel: impl Into<String>, levels: usize) -> Self {
        DimSpec {
            channel: channel.into(),
            lower: -0.5,
            upper: levels as f64 - 0.5,
            tiles: levels,
            discrete: true,
        }
    }

    pub fn width(&self) -> f64 {
        (self.upper - self.lower) / self.tiles as f64
    }
}

/// How tilings are displaced relative to tiling 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "kind", content = "values")]
pub enum OffsetSchedule {
    /// `offset[k][d] = k / num_tilings` on every continuous dimension.
    #[default]
    Uniform,
    /// Offsets drawn uniformly from [0, 1) with the run seed; tiling 0 stays at zero.
    Random,
    /// Explicit `[tiling][dim]` offsets in units of one tile width.
    Explicit(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TilingGroupSpec {
    pub name: String,
    pub dims: Vec<DimSpec>,
    pub num_tilings: usize,
    #[serde(default)]
    pub offsets: OffsetSchedule,
}

impl TilingGroupSpec {
    pub fn new(name: impl Into<String>, dims: Vec<DimSpec>, num_tilings: usize) -> Self {
        TilingGroupSpec {
            name: name.into(),
            dims,
            num_tilings,
            offsets: OffsetSchedule::Uniform,
        }
    }

    pub fn tiles_per_tiling(&self) -> usize {
        self.dims.iter().map(|d| d.tiles).product()
    }

    pub fn feature_count(&self) -> usize {
        self.num_tilings * self.tiles_per_tiling()
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(format!("tiling group '{}': {msg}", self.name)));
        if self.dims.is_empty() {
            return bad("no dimensions".into());
        }
        if self.num_tilings == 0 {
            return bad("num_tilings must be >= 1".into());
        }
        for (i, d) in self.dims.iter().enumerate() {
            if self.dims[..i].iter().any(|e| e.channel == d.channel) {
                return bad(format!("channel '{}' appears twice", d.channel));
            }
        }
        for d in &self.dims {
            if !(d.lower.is_finite() && d.upper.is_finite()) || d.upper <= d.lower {
                return bad(format!(
                    "channel '{}' needs finite bounds with upper > lower",
                    d.channel
                ));
            }
            if d.tiles == 0 {
                return bad(format!("channel '{}' needs at least one tile", d.channel));
            }
        }
        if let OffsetSchedule::Explicit(rows) = &self.offsets {
            if rows.len() != self.num_tilings {
                return bad(format!("expected {} offset rows, got {}", self.num_tilings, rows.len()));
            }
            for (k, row) in rows.iter().enumerate() {
                if row.len() != self.dims.len() {
                    return bad(format!(
                        "offset row {k} has {} entries, expected {}",
                        row.len(),
                        self.dims.len()
                    ));
                }
                if row.iter().any(|o| !(0.0..1.0).contains(o)) {
                    return bad(format!("offset row {k} has values outside [0, 1)"));
                }
                if k == 0 && row.iter().any(|&o| o != 0.0) {
                    return bad("tiling 0 must have zero offset".into());
                }
            }
        }
        Ok(())
    }

    fn resolve_offsets(&self, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
        let n = self.num_tilings;
        let mut rows: Vec<Vec<f64>> = match &self.offsets {
            OffsetSchedule::Uniform => (0..n).map(|k| vec![k as f64 / n as f64; self.dims.len()]).collect(),
            OffsetSchedule::Random => (0..n)
                .map(|k| {
                    (0..self.dims.len())
                        .map(|_| if k == 0 { 0.0 } else { rng.gen::<f64>() })
                        .collect()
                })
                .collect(),
            OffsetSchedule::Explicit(rows) => rows.clone(),
        };
        for row in &mut rows {
            for (o, d) in row.iter_mut().zip(&self.dims) {
                if d.discrete {
                    *o = 0.0;
                }
            }
        }
        rows
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoderConfig {
    pub groups: Vec<TilingGroupSpec>,
    #[serde(default)]
    pub history_depth: usize,
}

impl CoderConfig {
    pub fn base_feature_count(&self) -> usize {
        self.groups.iter().map(TilingGroupSpec::feature_count).sum()
    }

    pub fn total_features(&self) -> usize {
        (self.history_depth + 1) * self.base_feature_count()
    }

    /// Active indices per step once the history buffer is full.
    pub fn active_per_step(&self) -> usize {
        (self.history_depth + 1) * self.groups.iter().map(|g| g.num_tilings).sum::<usize>()
    }

    pub fn channels(&self) -> impl Iterator<Item = &str> {
        self.groups
            .iter()
            .flat_map(|g| g.dims.iter().map(|d| d.channel.as_str()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.groups.is_empty() {
            return Err(Error::Config("coder has no tiling groups".into()));
        }
        let mut names = HashSet::new();
        for g in &self.groups {
            g.validate()?;
            if !names.insert(g.name.as_str()) {
                return Err(Error::Config(format!("duplicate tiling group name '{}'", g.name)));
            }
        }
        Ok(())
    }
}

/// Sparse binary feature vector: the sorted indices of the active tiles.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureVector {
    active: Vec<usize>,
    total: usize,
}

impl FeatureVector {
    /// Builds a vector from arbitrary indices; they are sorted and deduplicated.
    pub fn from_indices(mut active: Vec<usize>, total: usize) -> Result<Self> {
        active.sort_unstable();
        active.dedup();
        if let Some(&last) = active.last() {
            if last >= total {
                return Err(Error::Config(format!(
                    "feature index {last} out of range for {total} features"
                )));
            }
        }
        Ok(FeatureVector { active, total })
    }

    pub fn active_indices(&self) -> &[usize] {
        &self.active
    }

    pub fn total_features(&self) -> usize {
        self.total
    }

    pub fn len(&self) -> usize {
        self.active.len()
    }

    pub fn is_empty(&self) -> bool {
        self.active.is_empty()
    }

    /// Number of indices active in both vectors.
    pub fn overlap(&self, other: &FeatureVector) -> usize {
        let (mut i, mut j, mut n) = (0, 0, 0);
        while i < self.active.len() && j < other.active.len() {
            match self.active[i].cmp(&other.active[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    n += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        n
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.total];
        for &j in &self.active {
            v[j] = 1.0;
        }
        v
    }
}

#[derive(Debug, Clone)]
struct ResolvedDim {
    channel: String,
    lower: f64,
    width: f64,
    tiles: usize,
    stride: usize,
}

#[derive(Debug, Clone)]
struct ResolvedGroup {
    dims: Vec<ResolvedDim>,
    offsets: Vec<Vec<f64>>,
    base: usize,
    tiles_per_tiling: usize,
}

impl ResolvedGroup {
    fn push_active(&self, values: &[f64], out: &mut Vec<usize>) {
        for (k, row) in self.offsets.iter().enumerate() {
            let mut flat = 0;
            for ((d, &v), &off) in self.dims.iter().zip(values).zip(row) {
                let cell = ((v - d.lower) / d.width - off).floor();
                let idx = if cell < 0.0 {
                    0
                } else {
                    (cell as usize).min(d.tiles - 1)
                };
                flat += idx * d.stride;
            }
            out.push(self.base + k * self.tiles_per_tiling + flat);
        }
    }
}

/// Stateless joint tile coder: one observation in, one base encoding out.
#[derive(Debug, Clone)]
pub struct TileCoder {
    config: CoderConfig,
    groups: Vec<ResolvedGroup>,
    base_features: usize,
}

impl TileCoder {
    /// `seed` is only consulted by [`OffsetSchedule::Random`] groups.
    pub fn new(config: CoderConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut base = 0;
        let mut groups = Vec::with_capacity(config.groups.len());
        for g in &config.groups {
            let mut stride = 1;
            let mut dims: Vec<ResolvedDim> = g
                .dims
                .iter()
                .rev()
                .map(|d| {
                    let r = ResolvedDim {
                        channel: d.channel.clone(),
                        lower: d.lower,
                        width: d.width(),
                        tiles: d.tiles,
                        stride,
                    };
                    stride *= d.tiles;
                    r
                })
                .collect();
            dims.reverse();
            groups.push(ResolvedGroup {
                dims,
                offsets: g.resolve_offsets(&mut rng),
                base,
                tiles_per_tiling: g.tiles_per_tiling(),
            });
            base += g.feature_count();
        }
        Ok(TileCoder {
            config,
            groups,
            base_features: base,
        })
    }

    pub fn config(&self) -> &CoderConfig {
        &self.config
    }

    pub fn base_feature_count(&self) -> usize {
        self.base_features
    }

    /// Encodes a single step without history.
    pub fn encode(&self, obs: &Observation) -> Result<FeatureVector> {
        let active = self.base_indices(obs)?;
        Ok(FeatureVector {
            active,
            total: self.base_features,
        })
    }

    fn base_indices(&self, obs: &Observation) -> Result<Vec<usize>> {
        let mut out = Vec::with_capacity(self.groups.iter().map(|g| g.offsets.len()).sum());
        let mut values = Vec::new();
        for g in &self.groups {
            values.clear();
            for d in &g.dims {
                let v = obs
                    .get(&d.channel)
                    .ok_or_else(|| Error::Config(format!("observation is missing channel '{}'", d.channel)))?;
                if !v.is_finite() {
                    return Err(Error::Input(format!("channel '{}' is not finite: {v}", d.channel)));
                }
                values.push(v);
            }
            g.push_active(&values, &mut out);
        }
        Ok(out)
    }
}

/// Tile coder that stacks the current encoding with the previous
/// `history_depth` encodings.
#[derive(Debug, Clone)]
pub struct HistoryCoder {
    coder: TileCoder,
    history: VecDeque<Vec<usize>>,
}

/// Serializable snapshot of the history ring buffer, most recent first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistorySnapshot(pub Vec<Vec<usize>>);

impl HistoryCoder {
    pub fn new(config: CoderConfig, seed: u64) -> Result<Self> {
        let coder = TileCoder::new(config, seed)?;
        Ok(HistoryCoder {
            history: VecDeque::with_capacity(coder.config.history_depth + 1),
            coder,
        })
    }

    pub fn coder(&self) -> &TileCoder {
        &self.coder
    }

    pub fn history_depth(&self) -> usize {
        self.coder.config.history_depth
    }

    pub fn total_features(&self) -> usize {
        (self.history_depth() + 1) * self.coder.base_features
    }

    pub fn reset(&mut self) {
        self.history.clear();
    }

    /// Slot 0 holds the current encoding; slot `h` holds the encoding from
    /// `h` steps ago shifted by `h * base_feature_count`. Slots not yet
    /// filled contribute nothing.
    pub fn encode(&mut self, obs: &Observation) -> Result<FeatureVector> {
        let current = self.coder.base_indices(obs)?;
        let fv = self.stack(&current);
        let depth = self.history_depth();
        if depth > 0 {
            self.history.push_front(current);
            self.history.truncate(depth);
        }
        Ok(fv)
    }

    fn stack(&self, current: &[usize]) -> FeatureVector {
        let base = self.coder.base_features;
        let mut active = Vec::with_capacity(current.len() * (self.history.len() + 1));
        active.extend_from_slice(current);
        for (h, past) in self.history.iter().enumerate() {
            let shift = (h + 1) * base;
            active.extend(past.iter().map(|j| j + shift));
        }
        FeatureVector {
            active,
            total: self.total_features(),
        }
    }

    pub fn snapshot(&self) -> HistorySnapshot {
        HistorySnapshot(self.history.iter().cloned().collect())
    }

    pub fn restore(&mut self, snapshot: HistorySnapshot) -> Result<()> {
        if snapshot.0.len() > self.history_depth() {
            return Err(Error::Config(format!(
                "history snapshot holds {} slots, coder depth is {}",
                snapshot.0.len(),
                self.history_depth()
            )));
        }
        let base = self.coder.base_features;
        if snapshot.0.iter().flatten().any(|&j| j >= base) {
            return Err(Error::Config("history snapshot index out of range".into()));
        }
        self.history = snapshot.0.into();
        Ok(())
    }
}
