//! The linear Count-Sketch: `d` rows of `w` signed-sum buckets with
//! median-of-rows point estimates.

mod codec;

pub use codec::{SketchDump, MAGIC, VERSION};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hashing::HashFamily;
use crate::signal::SignalVector;

/// Default multiplier for the row count, `d = ceil(c1 * log2 n)`.
pub const DEFAULT_ROW_MULTIPLIER: f64 = 5.0;

/// Rows for dimension `n` under multiplier `c1`; never less than one.
pub fn default_rows(n: usize, c1: f64) -> usize {
    let log_n = (n.max(1) as f64).log2();
    ((c1 * log_n - 1e-9).ceil() as usize).max(1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SketchConfig {
    /// Ambient dimension.
    pub n: usize,
    /// Rows (independent hash tables).
    pub d: usize,
    /// Buckets per row.
    pub w: usize,
    pub master_seed: u64,
}

impl SketchConfig {
    pub fn new(n: usize, d: usize, w: usize, master_seed: u64) -> Result<Self> {
        let cfg = SketchConfig {
            n,
            d,
            w,
            master_seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// `d = ceil(c1 * log2 n)` rows with the default `c1`.
    pub fn with_default_rows(n: usize, w: usize, master_seed: u64) -> Result<Self> {
        Self::new(n, default_rows(n, DEFAULT_ROW_MULTIPLIER), w, master_seed)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.d == 0 || self.w == 0 {
            return Err(Error::param(format!(
                "sketch config needs n, d, w >= 1 (got n={}, d={}, w={})",
                self.n, self.d, self.w
            )));
        }
        Ok(())
    }

    /// Number of linear measurements, `d * w`.
    pub fn measurement_count(&self) -> u64 {
        self.d as u64 * self.w as u64
    }
}

/// Sketch state: a row-major `d x w` table plus the hash family fixed by the config.
#[derive(Debug, Clone, PartialEq)]
pub struct CountSketch {
    config: SketchConfig,
    family: HashFamily,
    tables: Vec<f64>,
}

impl CountSketch {
    pub fn new(config: SketchConfig) -> Result<Self> {
        config.validate()?;
        let family = HashFamily::new(config.master_seed, config.d, config.w)?;
        Ok(CountSketch {
            config,
            family,
            tables: vec![0.0; config.d * config.w],
        })
    }

    /// Sketches `x` by applying one update per nonzero coordinate, in index order.
    pub fn from_vector(config: SketchConfig, x: &SignalVector) -> Result<Self> {
        if x.len() != config.n {
            return Err(Error::DimensionMismatch {
                expected: config.n,
                got: x.len(),
            });
        }
        let mut sketch = CountSketch::new(config)?;
        for (i, &v) in x.as_slice().iter().enumerate() {
            if v != 0.0 {
                sketch.add_unchecked(i, v);
            }
        }
        Ok(sketch)
    }

    pub fn config(&self) -> &SketchConfig {
        &self.config
    }

    pub fn family(&self) -> &HashFamily {
        &self.family
    }

    /// Row-major table contents.
    pub fn tables(&self) -> &[f64] {
        &self.tables
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let w = self.config.w;
        &self.tables[r * w..(r + 1) * w]
    }

    pub fn measurement_count(&self) -> u64 {
        self.config.measurement_count()
    }

    /// Adds `delta * e_index` to the sketched vector.
    pub fn update(&mut self, index: usize, delta: f64) -> Result<()> {
        self.check_index(index)?;
        if !delta.is_finite() {
            return Err(Error::param(format!("update delta {delta} is not finite")));
        }
        self.add_unchecked(index, delta);
        Ok(())
    }

    fn add_unchecked(&mut self, index: usize, delta: f64) {
        let w = self.config.w;
        for r in 0..self.config.d {
            let b = self.family.bucket_unchecked(r, index as u64);
            let s = f64::from(self.family.sign_unchecked(r, index as u64));
            self.tables[r * w + b] += s * delta;
        }
    }

    /// Entrywise sum `a + b`, computed in that order.
    pub fn merge(a: &CountSketch, b: &CountSketch) -> Result<CountSketch> {
        let mut out = a.clone();
        out.merge_from(b)?;
        Ok(out)
    }

    /// In-place `self += other`.
    pub fn merge_from(&mut self, other: &CountSketch) -> Result<()> {
        if self.config != other.config {
            return Err(Error::Incompatible(format!(
                "configs differ: {:?} vs {:?}",
                self.config, other.config
            )));
        }
        for (t, o) in self.tables.iter_mut().zip(&other.tables) {
            *t += *o;
        }
        Ok(())
    }

    pub fn estimate_coord(&self, index: usize) -> Result<f64> {
        self.check_index(index)?;
        let mut buf = Vec::with_capacity(self.config.d);
        Ok(self.estimate_with(index, &mut buf))
    }

    /// Point estimates for every coordinate.
    pub fn estimate_all(&self) -> SignalVector {
        let mut buf = Vec::with_capacity(self.config.d);
        let est = (0..self.config.n)
            .map(|i| self.estimate_with(i, &mut buf))
            .collect();
        SignalVector::new(est).expect("estimates of finite tables are finite")
    }

    /// Point estimates for a subset of coordinates, returned in the order given.
    pub fn estimate_many(&self, indices: &[usize]) -> Result<Vec<f64>> {
        let mut buf = Vec::with_capacity(self.config.d);
        indices
            .iter()
            .map(|&i| {
                self.check_index(i)?;
                Ok(self.estimate_with(i, &mut buf))
            })
            .collect()
    }

    fn estimate_with(&self, index: usize, buf: &mut Vec<f64>) -> f64 {
        let w = self.config.w;
        buf.clear();
        buf.extend((0..self.config.d).map(|r| {
            let b = self.family.bucket_unchecked(r, index as u64);
            f64::from(self.family.sign_unchecked(r, index as u64)) * self.tables[r * w + b]
        }));
        median(buf)
    }

    fn check_index(&self, index: usize) -> Result<()> {
        if index >= self.config.n {
            return Err(Error::OutOfRange {
                index,
                n: self.config.n,
            });
        }
        Ok(())
    }

    pub(crate) fn from_parts(config: SketchConfig, tables: Vec<f64>) -> Result<Self> {
        let mut sketch = CountSketch::new(config)?;
        if tables.len() != sketch.tables.len() {
            return Err(Error::Decode(format!(
                "expected {} table entries, found {}",
                sketch.tables.len(),
                tables.len()
            )));
        }
        if tables.iter().any(|v| !v.is_finite()) {
            return Err(Error::Decode("non-finite table entry".into()));
        }
        sketch.tables = tables;
        Ok(sketch)
    }
}

/// Median of a non-empty slice; even lengths average the two middle order
/// statistics. Reorders `values`.
pub(crate) fn median(values: &mut [f64]) -> f64 {
    let len = values.len();
    debug_assert!(len > 0);
    let mid = len / 2;
    let (lower, upper, _) = values.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    if len % 2 == 1 {
        upper
    } else {
        let lower = lower
            .iter()
            .copied()
            .max_by(f64::total_cmp)
            .expect("len >= 2");
        (lower + upper) / 2.0
    }
}
