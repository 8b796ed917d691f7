//! Test-signal generators with exactly known benchmark errors.
//!
//! * `spike_flat`: one spike of height `1/f^9` and `ceil(1/f^(1+c))` entries of
//!   random sign `+-1`. Its `k = 1` l1 tail is exactly the number of `+-1`
//!   entries, and a Count-Sketch with `O(1/f)` buckets cannot isolate them.
//! * `gaussian_channel`: a random `+-1` k-sparse signal plus i.i.d.
//!   `N(0, alpha k / n)` noise.
//! * `exact_sparse`: `k` entries with magnitudes uniform in `[1, scale]`.
//! * `zipf_noise`: magnitudes `i^-exponent` at random positions.
//!
//! Two composite families used by the benchmarks are also provided:
//! `spike_flat_zipf` (a spike-flat signal on top of scaled Zipf noise) and
//! `flat_block` (a `2k` block of near-equal magnitudes over a Zipf tail).
//!
//! All randomness comes from [`crate::seed`] streams keyed by the caller's
//! seed, so every generator is a pure function of its arguments.

use rand::seq::SliceRandom;
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::recovery::{ceil_tol, tail_err};
use crate::seed;
use crate::signal::{Norm, SignalVector};

/// Smallest accepted `f`; below it the spike `1/f^9` stops being a sane float scale.
pub const MIN_F: f64 = 1.0 / 64.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InstanceKind {
    SpikeFlat {
        f: f64,
        c_exponent: f64,
    },
    GaussianChannel {
        alpha: f64,
    },
    ExactSparse {
        value_scale: f64,
    },
    ZipfNoise {
        exponent: f64,
    },
    SpikeFlatZipf {
        f: f64,
        c_exponent: f64,
        zipf_exponent: f64,
        zipf_scale: f64,
    },
    FlatBlock {
        gap: f64,
        tail_exponent: f64,
        tail_scale: f64,
    },
}

impl InstanceKind {
    pub fn name(&self) -> &'static str {
        match self {
            InstanceKind::SpikeFlat { .. } => "spike_flat",
            InstanceKind::GaussianChannel { .. } => "gaussian_channel",
            InstanceKind::ExactSparse { .. } => "exact_sparse",
            InstanceKind::ZipfNoise { .. } => "zipf_noise",
            InstanceKind::SpikeFlatZipf { .. } => "spike_flat_zipf",
            InstanceKind::FlatBlock { .. } => "flat_block",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub n: usize,
    /// Sparsity the benchmark tail errors are reported at.
    pub k: usize,
    pub kind: InstanceKind,
    /// Spread spike-flat entries over random positions instead of the leading ones.
    #[serde(default)]
    pub permute: bool,
}

/// A generated signal with its benchmark errors at `spec.k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub spec: InstanceSpec,
    pub seed: u64,
    /// The vector handed to the recovery scheme.
    pub signal: SignalVector,
    /// Noise-free part, for the Gaussian channel.
    pub clean: Option<SignalVector>,
    pub tail_err_1: f64,
    pub tail_err_2: f64,
    /// Number of `+-1` entries of a spike-flat signal.
    pub noise_count: Option<usize>,
    /// Descending magnitudes of a Zipf signal.
    pub sorted_magnitudes: Option<Vec<f64>>,
}

/// Output of [`gen_spike_flat`].
#[derive(Debug, Clone, PartialEq)]
pub struct SpikeFlat {
    pub x: SignalVector,
    /// `ceil(1/f^(1+c))`, which equals `tail_err(x, 1, L1)`.
    pub noise_count: usize,
    pub spike: f64,
}

/// `ceil(1/f^(1+c))`.
pub fn spike_flat_noise_count(f: f64, c_exponent: f64) -> usize {
    ceil_tol(f.powf(-(1.0 + c_exponent)))
}

fn check_f(f: f64, c_exponent: f64) -> Result<()> {
    if !(MIN_F..1.0).contains(&f) {
        return Err(Error::param(format!("f = {f} must lie in [1/64, 1)")));
    }
    if !(0.0..=2.0).contains(&c_exponent) {
        return Err(Error::param(format!(
            "c_exponent = {c_exponent} must lie in [0, 2]"
        )));
    }
    Ok(())
}

fn random_sign(rng: &mut impl Rng) -> f64 {
    if rng.gen::<bool>() {
        1.0
    } else {
        -1.0
    }
}

pub fn gen_spike_flat(
    f: f64,
    c_exponent: f64,
    n: usize,
    permute: bool,
    seed: u64,
) -> Result<SpikeFlat> {
    check_f(f, c_exponent)?;
    let m0 = spike_flat_noise_count(f, c_exponent);
    if n < 1 + m0 {
        return Err(Error::param(format!(
            "n = {n} cannot hold a spike and {m0} unit entries"
        )));
    }
    let spike = f.powi(-9);
    let mut signs = seed::rng(seed, "spike_flat/signs", &[]);
    let mut values = vec![0.0; n];
    values[0] = spike;
    for v in &mut values[1..=m0] {
        *v = random_sign(&mut signs);
    }
    if permute {
        values.shuffle(&mut seed::rng(seed, "spike_flat/positions", &[]));
    }
    Ok(SpikeFlat {
        x: SignalVector::new(values)?,
        noise_count: m0,
        spike,
    })
}

/// Standard normal pair by the Box-Muller transform on two 53-bit uniforms,
/// `u1` in `(0, 1]` and `u2` in `[0, 1)`.
pub fn box_muller(rng: &mut impl RngCore) -> (f64, f64) {
    const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
    let u1 = ((rng.next_u64() >> 11) + 1) as f64 * SCALE;
    let u2 = (rng.next_u64() >> 11) as f64 * SCALE;
    let radius = (-2.0 * u1.ln()).sqrt();
    let theta = std::f64::consts::TAU * u2;
    (radius * theta.cos(), radius * theta.sin())
}

fn random_support(n: usize, k: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut idx = rand::seq::index::sample(rng, n, k).into_vec();
    idx.sort_unstable();
    idx
}

/// Returns `(x, w)`: `x` has a uniformly random `k`-subset support with `+-1`
/// values and `w` is i.i.d. Gaussian with variance `alpha k / n` per coordinate.
pub fn gen_gaussian_channel(
    n: usize,
    k: usize,
    alpha: f64,
    seed: u64,
) -> Result<(SignalVector, SignalVector)> {
    if k > n {
        return Err(Error::param(format!("k = {k} exceeds n = {n}")));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::param(format!("alpha = {alpha} must be positive")));
    }
    let mut rng = seed::rng(seed, "gaussian_channel/support", &[]);
    let mut x = vec![0.0; n];
    for i in random_support(n, k, &mut rng) {
        x[i] = random_sign(&mut rng);
    }
    let sigma = (alpha * k as f64 / n as f64).sqrt();
    let mut noise = seed::rng(seed, "gaussian_channel/noise", &[]);
    let mut w = Vec::with_capacity(n + 1);
    while w.len() < n {
        let (a, b) = box_muller(&mut noise);
        w.push(sigma * a);
        w.push(sigma * b);
    }
    w.truncate(n);
    Ok((SignalVector::new(x)?, SignalVector::new(w)?))
}

/// `k` random positions with magnitudes uniform in `[1, value_scale]` and random signs.
pub fn gen_exact_sparse(n: usize, k: usize, value_scale: f64, seed: u64) -> Result<SignalVector> {
    if k > n {
        return Err(Error::param(format!("k = {k} exceeds n = {n}")));
    }
    if !(value_scale >= 1.0 && value_scale.is_finite()) {
        return Err(Error::param(format!(
            "value_scale = {value_scale} must be >= 1"
        )));
    }
    let mut rng = seed::rng(seed, "exact_sparse", &[]);
    let mut x = vec![0.0; n];
    for i in random_support(n, k, &mut rng) {
        let magnitude = 1.0 + rng.gen::<f64>() * (value_scale - 1.0);
        x[i] = random_sign(&mut rng) * magnitude;
    }
    SignalVector::new(x)
}

/// Output of [`gen_zipf_noise`].
#[derive(Debug, Clone, PartialEq)]
pub struct ZipfSignal {
    pub x: SignalVector,
    /// `1^-a, 2^-a, ..., n^-a`.
    pub sorted_magnitudes: Vec<f64>,
}

/// All `n` coordinates nonzero, the `i`-th largest with magnitude `i^-exponent`,
/// at random positions with random signs. `k` only affects reported metadata.
pub fn gen_zipf_noise(n: usize, k: usize, exponent: f64, seed: u64) -> Result<ZipfSignal> {
    let _ = k;
    if !(exponent > 0.0 && exponent.is_finite()) {
        return Err(Error::param(format!(
            "exponent = {exponent} must be positive"
        )));
    }
    let sorted_magnitudes: Vec<f64> = (1..=n).map(|i| (i as f64).powf(-exponent)).collect();
    let mut positions: Vec<usize> = (0..n).collect();
    positions.shuffle(&mut seed::rng(seed, "zipf/positions", &[]));
    let mut signs = seed::rng(seed, "zipf/signs", &[]);
    let mut x = vec![0.0; n];
    for (rank, &pos) in positions.iter().enumerate() {
        x[pos] = random_sign(&mut signs) * sorted_magnitudes[rank];
    }
    Ok(ZipfSignal {
        x: SignalVector::new(x)?,
        sorted_magnitudes,
    })
}

/// `2k` entries of random sign, the first `k` of magnitude `1 + gap` and the
/// rest of magnitude `1`, at random positions; every other coordinate carries
/// `tail_scale * i^-tail_exponent` Zipf noise.
pub fn gen_flat_block(
    n: usize,
    k: usize,
    gap: f64,
    tail_exponent: f64,
    tail_scale: f64,
    seed: u64,
) -> Result<SignalVector> {
    if 2 * k > n {
        return Err(Error::param(format!(
            "block of 2k = {} exceeds n = {n}",
            2 * k
        )));
    }
    if !(gap >= 0.0 && gap.is_finite() && tail_scale >= 0.0 && tail_scale.is_finite()) {
        return Err(Error::param(
            "gap and tail_scale must be finite and non-negative",
        ));
    }
    if !(tail_exponent > 0.0 && tail_exponent.is_finite()) {
        return Err(Error::param(format!(
            "tail_exponent = {tail_exponent} must be positive"
        )));
    }
    let mut positions: Vec<usize> = (0..n).collect();
    positions.shuffle(&mut seed::rng(seed, "flat_block/positions", &[]));
    let mut signs = seed::rng(seed, "flat_block/signs", &[]);
    let mut x = vec![0.0; n];
    for (rank, &pos) in positions.iter().enumerate() {
        let magnitude = if rank < k {
            1.0 + gap
        } else if rank < 2 * k {
            1.0
        } else {
            tail_scale * ((rank - 2 * k + 1) as f64).powf(-tail_exponent)
        };
        x[pos] = random_sign(&mut signs) * magnitude;
    }
    SignalVector::new(x)
}

impl InstanceSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::param("n must be at least 1"));
        }
        if self.k > self.n {
            return Err(Error::param(format!(
                "k = {} exceeds n = {}",
                self.k, self.n
            )));
        }
        Ok(())
    }
}

/// Generates the instance described by `spec`, deterministically in `seed`.
pub fn generate(spec: &InstanceSpec, seed: u64) -> Result<Instance> {
    spec.validate()?;
    let (n, k) = (spec.n, spec.k);
    let mut clean = None;
    let mut noise_count = None;
    let mut sorted_magnitudes = None;
    let signal = match spec.kind {
        InstanceKind::SpikeFlat { f, c_exponent } => {
            let sf = gen_spike_flat(f, c_exponent, n, spec.permute, seed)?;
            noise_count = Some(sf.noise_count);
            sf.x
        }
        InstanceKind::GaussianChannel { alpha } => {
            let (x, w) = gen_gaussian_channel(n, k, alpha, seed)?;
            let y = x.add(&w)?;
            clean = Some(x);
            y
        }
        InstanceKind::ExactSparse { value_scale } => gen_exact_sparse(n, k, value_scale, seed)?,
        InstanceKind::ZipfNoise { exponent } => {
            let z = gen_zipf_noise(n, k, exponent, seed)?;
            sorted_magnitudes = Some(z.sorted_magnitudes);
            z.x
        }
        InstanceKind::SpikeFlatZipf {
            f,
            c_exponent,
            zipf_exponent,
            zipf_scale,
        } => {
            if !(zipf_scale >= 0.0 && zipf_scale.is_finite()) {
                return Err(Error::param("zipf_scale must be finite and non-negative"));
            }
            let sf = gen_spike_flat(
                f,
                c_exponent,
                n,
                true,
                seed::derive(seed, "spike_flat_zipf", &[0]),
            )?;
            let z = gen_zipf_noise(
                n,
                k,
                zipf_exponent,
                seed::derive(seed, "spike_flat_zipf", &[1]),
            )?;
            noise_count = Some(sf.noise_count);
            sf.x.add(&z.x.scale(zipf_scale))?
        }
        InstanceKind::FlatBlock {
            gap,
            tail_exponent,
            tail_scale,
        } => gen_flat_block(n, k, gap, tail_exponent, tail_scale, seed)?,
    };
    Ok(Instance {
        spec: *spec,
        seed,
        tail_err_1: tail_err(&signal, k, Norm::L1),
        tail_err_2: tail_err(&signal, k, Norm::L2),
        signal,
        clean,
        noise_count,
        sorted_magnitudes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    pub spec: InstanceSpec,
    pub seed: u64,
    pub nonzeros: Vec<(usize, f64)>,
    pub tail_err_1: f64,
    pub tail_err_2: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clean_nonzeros: Option<Vec<(usize, f64)>>,
}

impl Instance {
    pub fn to_file(&self) -> InstanceFile {
        InstanceFile {
            spec: self.spec,
            seed: self.seed,
            nonzeros: self.signal.nonzeros(),
            tail_err_1: self.tail_err_1,
            tail_err_2: self.tail_err_2,
            clean_nonzeros: self.clean.as_ref().map(SignalVector::nonzeros),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_file())?)
    }

    /// Loads an instance file. Tail errors are recomputed from the vector and
    /// must match the recorded ones.
    pub fn from_json(s: &str) -> Result<Instance> {
        let file: InstanceFile = serde_json::from_str(s)?;
        file.spec.validate()?;
        let signal = SignalVector::from_sparse(file.spec.n, &file.nonzeros)?;
        let clean = file
            .clean_nonzeros
            .as_ref()
            .map(|nz| SignalVector::from_sparse(file.spec.n, nz))
            .transpose()?;
        let k = file.spec.k;
        let (t1, t2) = (
            tail_err(&signal, k, Norm::L1),
            tail_err(&signal, k, Norm::L2),
        );
        if t1 != file.tail_err_1 || t2 != file.tail_err_2 {
            return Err(Error::param(format!(
                "recorded tail errors ({}, {}) do not match the vector ({t1}, {t2})",
                file.tail_err_1, file.tail_err_2
            )));
        }
        let noise_count = match file.spec.kind {
            InstanceKind::SpikeFlat { f, c_exponent } => {
                Some(spike_flat_noise_count(f, c_exponent))
            }
            _ => None,
        };
        Ok(Instance {
            spec: file.spec,
            seed: file.seed,
            signal,
            clean,
            tail_err_1: t1,
            tail_err_2: t2,
            noise_count,
            sorted_magnitudes: None,
        })
    }
}
