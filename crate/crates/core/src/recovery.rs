//! Sparse recovery from Count-Sketch estimates.
//!
//! Two schemes are provided:
//!
//! * **l2/l2**: one sketch with `w = ceil(2k/eps)` buckets; keep the `2k`
//!   largest estimates ([`recover_l2_top2k`]). Keeping only `k`
//!   ([`recover_l2_topk`]) is the sparse-output baseline.
//! * **l1/l1**: with `f = sqrt(eps)` and `r = ceil(2 log2(1/f))`, run a
//!   Count-Sketch on a `2^-j` subsample for each level `j = 0..=r`, and at each
//!   level keep the `ceil(2^(j/2) k)` largest estimates not chosen at an
//!   earlier level ([`recover_l1_multiscale`]).
//!
//! [`tail_err`] is the exact benchmark `min over k-sparse x' of ||x - x'||_p`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::countsketch::{default_rows, CountSketch, SketchConfig, DEFAULT_ROW_MULTIPLIER};
use crate::error::{Error, Result};
use crate::seed::derive;
use crate::signal::{Norm, SignalVector};

/// Default multiplier inside `c = c3 * max(1, r^2)`.
pub const DEFAULT_L1_MULTIPLIER: f64 = 1.0;

const ROUNDING_SLACK: f64 = 1e-9;

/// `ceil(v)` that ignores floating noise just above an integer.
pub(crate) fn ceil_tol(v: f64) -> usize {
    (v - ROUNDING_SLACK).ceil().max(0.0) as usize
}

/// Indices of the `t` largest-magnitude entries, ties to the lower index,
/// returned ascending.
pub fn top_t_support(x: &SignalVector, t: usize) -> Vec<usize> {
    let mut idx: Vec<(usize, f64)> = x.as_slice().iter().copied().enumerate().collect();
    top_by_magnitude(&mut idx, t)
}

/// Selects the `t` entries of `(index, value)` pairs with the largest `|value|`,
/// ties to the lower index, and returns their indices ascending.
pub(crate) fn top_by_magnitude(items: &mut [(usize, f64)], t: usize) -> Vec<usize> {
    let t = t.min(items.len());
    if t == 0 {
        return Vec::new();
    }
    let by_rank =
        |a: &(usize, f64), b: &(usize, f64)| b.1.abs().total_cmp(&a.1.abs()).then(a.0.cmp(&b.0));
    if t < items.len() {
        items.select_nth_unstable_by(t - 1, by_rank);
    }
    let mut out: Vec<usize> = items[..t].iter().map(|p| p.0).collect();
    out.sort_unstable();
    out
}

/// `||x - x_head(k)||_p`, where the head is [`top_t_support`]`(x, k)`. The tail
/// is summed in index order.
pub fn tail_err(x: &SignalVector, k: usize, p: Norm) -> f64 {
    let head = top_t_support(x, k);
    let mut in_head = vec![false; x.len()];
    for &i in &head {
        in_head[i] = true;
    }
    let tail = x
        .as_slice()
        .iter()
        .zip(&in_head)
        .filter(|(_, h)| !**h)
        .map(|(v, _)| *v);
    match p {
        Norm::L1 => tail.map(f64::abs).sum(),
        Norm::L2 => tail.map(|v| v * v).sum::<f64>().sqrt(),
    }
}

/// Provenance of one level of the multi-scale scheme.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelRecord {
    pub level: u32,
    /// Sampling probability `2^-level`.
    pub probability: f64,
    pub sample_size: usize,
    /// `S_j`, ascending.
    pub selected: Vec<usize>,
    pub measurements: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "snake_case")]
pub enum RecoveryParams {
    TopT {
        selected: usize,
        d: usize,
        w: usize,
    },
    L2 {
        k: usize,
        epsilon: f64,
        selected: usize,
        d: usize,
        w: usize,
    },
    L1(L1Params),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryOutput {
    pub estimate: SignalVector,
    /// Ascending; contains every nonzero of `estimate`.
    pub support: Vec<usize>,
    pub per_level: Vec<LevelRecord>,
    pub total_measurements: u64,
    pub seed: u64,
    pub params: RecoveryParams,
}

#[derive(Serialize, Deserialize)]
struct RecoveryWire {
    n: usize,
    estimate_sparse: Vec<(usize, f64)>,
    support: Vec<usize>,
    per_level: Vec<LevelRecord>,
    total_measurements: u64,
    seed: u64,
    params: RecoveryParams,
}

impl RecoveryOutput {
    pub fn to_json(&self) -> Result<String> {
        let wire = RecoveryWire {
            n: self.estimate.len(),
            estimate_sparse: self
                .support
                .iter()
                .map(|&i| (i, self.estimate[i]))
                .collect(),
            support: self.support.clone(),
            per_level: self.per_level.clone(),
            total_measurements: self.total_measurements,
            seed: self.seed,
            params: self.params.clone(),
        };
        Ok(serde_json::to_string_pretty(&wire)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let wire: RecoveryWire = serde_json::from_str(s)?;
        Ok(RecoveryOutput {
            estimate: SignalVector::from_sparse(wire.n, &wire.estimate_sparse)?,
            support: wire.support,
            per_level: wire.per_level,
            total_measurements: wire.total_measurements,
            seed: wire.seed,
            params: wire.params,
        })
    }
}

/// Sketches `x` once with `config` and keeps the `t` largest estimates.
pub fn recover_top_t(x: &SignalVector, t: usize, config: SketchConfig) -> Result<RecoveryOutput> {
    let sketch = CountSketch::from_vector(config, x)?;
    let estimates = sketch.estimate_all();
    let support = top_t_support(&estimates, t);
    let mut out = vec![0.0; x.len()];
    for &i in &support {
        out[i] = estimates[i];
    }
    Ok(RecoveryOutput {
        estimate: SignalVector::new(out)?,
        support,
        per_level: Vec::new(),
        total_measurements: sketch.measurement_count(),
        seed: config.master_seed,
        params: RecoveryParams::TopT {
            selected: t,
            d: config.d,
            w: config.w,
        },
    })
}

/// Parameters for the l2/l2 thresholding schemes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct L2Params {
    pub k: usize,
    pub epsilon: f64,
    /// Row multiplier `c1` in `d = ceil(c1 log2 n)`.
    pub c1: f64,
}

impl L2Params {
    pub fn new(k: usize, epsilon: f64) -> Self {
        L2Params {
            k,
            epsilon,
            c1: DEFAULT_ROW_MULTIPLIER,
        }
    }

    /// `w = ceil(2k / eps)`.
    pub fn width(&self) -> usize {
        ceil_tol(2.0 * self.k as f64 / self.epsilon).max(1)
    }

    fn validate(&self, n: usize, selected: usize) -> Result<()> {
        if self.k == 0 {
            return Err(Error::param("k must be at least 1"));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::param(format!(
                "epsilon {} must lie in (0, 1)",
                self.epsilon
            )));
        }
        if !(self.c1 > 0.0 && self.c1.is_finite()) {
            return Err(Error::param(format!(
                "row multiplier {} must be positive",
                self.c1
            )));
        }
        if selected > n {
            return Err(Error::param(format!(
                "cannot select {selected} coordinates from n = {n}"
            )));
        }
        Ok(())
    }
}

/// Top-`selected` thresholding of one Count-Sketch with `w = ceil(2k/eps)`
/// and `d = ceil(c1 log2 n)`.
pub fn recover_l2(
    x: &SignalVector,
    params: &L2Params,
    selected: usize,
    master_seed: u64,
) -> Result<RecoveryOutput> {
    let n = x.len();
    params.validate(n, selected)?;
    let config = SketchConfig::new(n, default_rows(n, params.c1), params.width(), master_seed)?;
    let mut out = recover_top_t(x, selected, config)?;
    out.params = RecoveryParams::L2 {
        k: params.k,
        epsilon: params.epsilon,
        selected,
        d: config.d,
        w: config.w,
    };
    Ok(out)
}

/// Keeps the `2k` largest estimates; `||x_hat - x||_2 <= (1+eps) tail_err(x,k,2)`
/// with high probability.
pub fn recover_l2_top2k(
    x: &SignalVector,
    k: usize,
    epsilon: f64,
    master_seed: u64,
) -> Result<RecoveryOutput> {
    recover_l2(x, &L2Params::new(k, epsilon), 2 * k, master_seed)
}

/// Same sketch as [`recover_l2_top2k`] but keeps only `k` estimates.
pub fn recover_l2_topk(
    x: &SignalVector,
    k: usize,
    epsilon: f64,
    master_seed: u64,
) -> Result<RecoveryOutput> {
    recover_l2(x, &L2Params::new(k, epsilon), k, master_seed)
}

/// Indices kept by the level-`level` subsample: each independently with
/// probability `2^-level`, decided by a hash of `(master_seed, level, index)`.
pub fn subsample_mask(n: usize, level: u32, master_seed: u64) -> Vec<usize> {
    if level == 0 {
        return (0..n).collect();
    }
    if level >= 64 {
        return Vec::new();
    }
    let shift = 64 - level;
    (0..n)
        .filter(|&i| derive(master_seed, "subsample", &[u64::from(level), i as u64]) >> shift == 0)
        .collect()
}

/// Estimates over one subsample `T`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsampleEstimate {
    pub level: u32,
    /// `T`, ascending.
    pub indices: Vec<usize>,
    /// Estimates aligned with `indices`.
    pub estimates: Vec<f64>,
    pub config: SketchConfig,
}

/// Seed of the level-`level` sketch.
pub fn level_seed(master_seed: u64, level: u32) -> u64 {
    derive(master_seed, "level", &[u64::from(level)])
}

/// Sketches `y = x_T` for `T = subsample_mask(n, level, seed)` with `d` rows and
/// `w = 2q` buckets and returns estimates on `T`.
pub fn recover_subsampled(
    x: &SignalVector,
    level: u32,
    q: usize,
    d: usize,
    master_seed: u64,
) -> Result<SubsampleEstimate> {
    if q == 0 {
        return Err(Error::param("hash size q must be at least 1"));
    }
    let n = x.len();
    let config = SketchConfig::new(n, d, 2 * q, level_seed(master_seed, level))?;
    let indices = subsample_mask(n, level, master_seed);
    let mut sketch = CountSketch::new(config)?;
    for &i in &indices {
        let v = x[i];
        if v != 0.0 {
            sketch.update(i, v)?;
        }
    }
    let estimates = sketch.estimate_many(&indices)?;
    Ok(SubsampleEstimate {
        level,
        indices,
        estimates,
        config,
    })
}

/// Derived parameters of the multi-scale l1 scheme.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct L1Params {
    pub k: usize,
    pub epsilon: f64,
    /// `f = sqrt(eps)`.
    pub f: f64,
    /// Highest level `r = ceil(2 log2(1/f))`; levels run `0..=r`.
    pub levels: u32,
    /// Hash-size multiplier `c = c3 * max(1, r^2)`.
    pub c: f64,
    pub c3: f64,
    /// Rows per sketch.
    pub d: usize,
    pub master_seed: u64,
}

impl L1Params {
    pub fn new(n: usize, k: usize, epsilon: f64, master_seed: u64) -> Result<Self> {
        Self::with_constants(
            n,
            k,
            epsilon,
            master_seed,
            DEFAULT_ROW_MULTIPLIER,
            DEFAULT_L1_MULTIPLIER,
        )
    }

    pub fn with_constants(
        n: usize,
        k: usize,
        epsilon: f64,
        master_seed: u64,
        c1: f64,
        c3: f64,
    ) -> Result<Self> {
        if k == 0 {
            return Err(Error::param("k must be at least 1"));
        }
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::param(format!(
                "epsilon {epsilon} must lie in (0, 1)"
            )));
        }
        if !(c1 > 0.0 && c1.is_finite() && c3 >= 1.0 && c3.is_finite()) {
            return Err(Error::param(format!(
                "constants must satisfy c1 > 0, c3 >= 1 (got c1={c1}, c3={c3})"
            )));
        }
        let f = epsilon.sqrt();
        let levels = ceil_tol(2.0 * (1.0 / f).log2()) as u32;
        let r = f64::from(levels);
        let params = L1Params {
            k,
            epsilon,
            f,
            levels,
            c: c3 * (r * r).max(1.0),
            c3,
            d: default_rows(n, c1),
            master_seed,
        };
        params.check_fits(n)?;
        Ok(params)
    }

    /// Per-level hash size `q = ceil(c k / f)`.
    pub fn q(&self) -> usize {
        ceil_tol(self.c * self.k as f64 / self.f).max(1)
    }

    /// Buckets per level sketch, `2q`.
    pub fn width(&self) -> usize {
        2 * self.q()
    }

    /// `|S_j| <= ceil(2^(j/2) k)`.
    pub fn selection_size(&self, level: u32) -> usize {
        ceil_tol(2f64.powf(f64::from(level) / 2.0) * self.k as f64)
    }

    /// `(r + 1) d w`.
    pub fn total_measurements(&self) -> u64 {
        u64::from(self.levels + 1) * self.d as u64 * self.width() as u64
    }

    fn check_fits(&self, n: usize) -> Result<()> {
        let largest = self.k as f64 * 2f64.powf(f64::from(self.levels) / 2.0);
        if largest > n as f64 + ROUNDING_SLACK {
            return Err(Error::param(format!(
                "k * 2^(r/2) = {largest} exceeds n = {n}"
            )));
        }
        if self.d == 0 {
            return Err(Error::param("rows per sketch must be at least 1"));
        }
        Ok(())
    }
}

/// Multi-scale subsampled recovery for l1/l1. Earlier levels take precedence:
/// a coordinate keeps the estimate from the level that first selected it.
pub fn recover_l1_multiscale(x: &SignalVector, params: &L1Params) -> Result<RecoveryOutput> {
    let n = x.len();
    params.check_fits(n)?;
    let q = params.q();
    let levels: Vec<SubsampleEstimate> = (0..=params.levels)
        .into_par_iter()
        .map(|j| recover_subsampled(x, j, q, params.d, params.master_seed))
        .collect::<Result<_>>()?;

    let mut found = vec![false; n];
    let mut estimate = vec![0.0; n];
    let mut per_level = Vec::with_capacity(levels.len());
    let mut total = 0u64;
    for level in levels {
        let mut candidates: Vec<(usize, f64)> = level
            .indices
            .iter()
            .zip(&level.estimates)
            .filter(|(i, _)| !found[**i])
            .map(|(i, v)| (*i, *v))
            .collect();
        let by_index: std::collections::HashMap<usize, f64> = candidates.iter().copied().collect();
        let selected = top_by_magnitude(&mut candidates, params.selection_size(level.level));
        for &i in &selected {
            found[i] = true;
            estimate[i] = by_index[&i];
        }
        let measurements = level.config.measurement_count();
        total += measurements;
        per_level.push(LevelRecord {
            level: level.level,
            probability: 2f64.powi(-(level.level as i32)),
            sample_size: level.indices.len(),
            selected,
            measurements,
        });
    }
    let support = (0..n).filter(|&i| found[i]).collect();
    Ok(RecoveryOutput {
        estimate: SignalVector::new(estimate)?,
        support,
        per_level,
        total_measurements: total,
        seed: params.master_seed,
        params: RecoveryParams::L1(*params),
    })
}
