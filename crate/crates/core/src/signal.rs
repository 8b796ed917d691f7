use std::ops::Index;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which `l_p` norm an error is measured in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    L1,
    L2,
}

impl Norm {
    pub fn p(self) -> u32 {
        match self {
            Norm::L1 => 1,
            Norm::L2 => 2,
        }
    }
}

/// A dense real vector with finite entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SignalVector(Vec<f64>);

impl SignalVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::param(format!("entry {i} is not finite")));
        }
        Ok(SignalVector(values))
    }

    pub fn zeros(n: usize) -> Self {
        SignalVector(vec![0.0; n])
    }

    /// Builds a vector of dimension `n` from `(index, value)` pairs. Later
    /// pairs overwrite earlier ones.
    pub fn from_sparse(n: usize, entries: &[(usize, f64)]) -> Result<Self> {
        let mut v = vec![0.0; n];
        for &(i, x) in entries {
            if i >= n {
                return Err(Error::OutOfRange { index: i, n });
            }
            v[i] = x;
        }
        Self::new(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Nonzero entries in index order.
    pub fn nonzeros(&self) -> Vec<(usize, f64)> {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, v)| (i, *v))
            .collect()
    }

    pub fn support_size(&self) -> usize {
        self.0.iter().filter(|v| **v != 0.0).count()
    }

    pub fn norm(&self, p: Norm) -> f64 {
        match p {
            Norm::L1 => self.0.iter().map(|v| v.abs()).sum(),
            Norm::L2 => self.0.iter().map(|v| v * v).sum::<f64>().sqrt(),
        }
    }

    pub fn norm_inf(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn add(&self, other: &SignalVector) -> Result<SignalVector> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &SignalVector) -> Result<SignalVector> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, lambda: f64) -> SignalVector {
        SignalVector(self.0.iter().map(|v| v * lambda).collect())
    }

    /// `||self - other||_p`.
    pub fn distance(&self, other: &SignalVector, p: Norm) -> Result<f64> {
        Ok(self.sub(other)?.norm(p))
    }

    fn zip_with(&self, other: &SignalVector, op: impl Fn(f64, f64) -> f64) -> Result<SignalVector> {
        if self.len() != other.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: other.len(),
            });
        }
        SignalVector::new(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| op(*a, *b))
                .collect(),
        )
    }
}

impl Index<usize> for SignalVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl TryFrom<Vec<f64>> for SignalVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        SignalVector::new(v)
    }
}

impl From<SignalVector> for Vec<f64> {
    fn from(v: SignalVector) -> Self {
        v.0
    }
}
