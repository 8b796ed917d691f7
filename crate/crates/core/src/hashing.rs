//! Seeded pairwise-independent hash families.
//!
//! Each row `r` owns two affine maps over the Mersenne field `GF(2^61 - 1)`:
//! one for bucket placement and one for the sign. A map `i -> (a*i + b) mod p`
//! with `a != 0` drawn uniformly is pairwise independent over indices; the
//! bucket is that value reduced mod `range` and the sign is its low bit.
//!
//! Parameters come from [`crate::seed::derive`] keyed by
//! `(master_seed, "bucket", [r, 0|1])` and `(master_seed, "sign", [r, 0|1])`,
//! so bucket and sign streams never alias and outputs are identical on every
//! platform for a given seed.

use crate::error::{Error, Result};
use crate::seed::derive;

/// The Mersenne prime `2^61 - 1`.
pub const MERSENNE_61: u64 = (1 << 61) - 1;

#[inline]
fn reduce(x: u128) -> u64 {
    // x < 2^122 for all callers: two folds bring it below 2p.
    let lo = (x as u64) & MERSENNE_61;
    let hi = (x >> 61) as u64;
    let mut s = lo + (hi & MERSENNE_61) + (hi >> 61);
    if s >= MERSENNE_61 {
        s -= MERSENNE_61;
    }
    if s >= MERSENNE_61 {
        s -= MERSENNE_61;
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Affine {
    a: u64,
    b: u64,
}

impl Affine {
    fn derive(master: u64, tag: &str, row: u64) -> Self {
        let a = 1 + derive(master, tag, &[row, 0]) % (MERSENNE_61 - 1);
        let b = derive(master, tag, &[row, 1]) % MERSENNE_61;
        Affine { a, b }
    }

    #[inline]
    fn eval(self, index: u64) -> u64 {
        let i = reduce(u128::from(index));
        reduce(u128::from(self.a) * u128::from(i) + u128::from(self.b))
    }
}

/// `rows` independent pairs of bucket/sign hashes into `[0, range)` and `{-1, +1}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HashFamily {
    master_seed: u64,
    range: usize,
    bucket: Vec<Affine>,
    sign: Vec<Affine>,
}

impl HashFamily {
    pub fn new(master_seed: u64, rows: usize, range: usize) -> Result<Self> {
        if rows == 0 {
            return Err(Error::param("hash family needs at least one row"));
        }
        if range == 0 {
            return Err(Error::param("hash range must be at least 1"));
        }
        let bucket = (0..rows as u64)
            .map(|r| Affine::derive(master_seed, "bucket", r))
            .collect();
        let sign = (0..rows as u64)
            .map(|r| Affine::derive(master_seed, "sign", r))
            .collect();
        Ok(HashFamily {
            master_seed,
            range,
            bucket,
            sign,
        })
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn rows(&self) -> usize {
        self.bucket.len()
    }

    pub fn range(&self) -> usize {
        self.range
    }

    pub fn bucket_of(&self, row: usize, index: u64) -> Result<usize> {
        self.check_row(row)?;
        Ok(self.bucket_unchecked(row, index))
    }

    pub fn sign_of(&self, row: usize, index: u64) -> Result<i8> {
        self.check_row(row)?;
        Ok(self.sign_unchecked(row, index))
    }

    #[inline]
    pub(crate) fn bucket_unchecked(&self, row: usize, index: u64) -> usize {
        (self.bucket[row].eval(index) % self.range as u64) as usize
    }

    #[inline]
    pub(crate) fn sign_unchecked(&self, row: usize, index: u64) -> i8 {
        if self.sign[row].eval(index) & 1 == 0 {
            1
        } else {
            -1
        }
    }

    fn check_row(&self, row: usize) -> Result<()> {
        if row >= self.rows() {
            return Err(Error::param(format!(
                "row {row} out of range for {} rows",
                self.rows()
            )));
        }
        Ok(())
    }
}
