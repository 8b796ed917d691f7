//! Monte-Carlo experiment runner.
//!
//! A trial generates an instance, runs one recovery scheme on it and scores the
//! result against the exact tail-error oracle. An experiment runs `trials`
//! trials at every grid point `(scheme, n, k, epsilon)`.
//!
//! Trial seeds are `derive(master_seed, "trial", [n_idx, k_idx, eps_idx, t])`.
//! The scheme is not part of the key, so different schemes at the same grid
//! point see the same instances and the same sketch randomness and can be
//! compared pairwise.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::countsketch::{default_rows, CountSketch, SketchConfig, DEFAULT_ROW_MULTIPLIER};
use crate::error::{Error, Result};
use crate::instances::{generate, Instance, InstanceKind, InstanceSpec};
use crate::recovery::{
    ceil_tol, recover_l1_multiscale, recover_l2, tail_err, L1Params, L2Params, RecoveryOutput,
    DEFAULT_L1_MULTIPLIER,
};
use crate::seed::derive;
use crate::signal::{Norm, SignalVector};

pub const SCHEMA_VERSION: &str = "v1";

/// Relative tolerance that counts as exact recovery when the benchmark is zero.
pub const ZERO_BENCHMARK_TOLERANCE: f64 = 1e-9;

/// Two-sided 95% normal quantile.
const WILSON_Z: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    L2Top2k,
    L2Topk,
    L1Multiscale,
    /// Plain Count-Sketch point estimates scored by their l_inf error.
    CsPointwise,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [
        Scheme::L2Top2k,
        Scheme::L2Topk,
        Scheme::L1Multiscale,
        Scheme::CsPointwise,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::L2Top2k => "l2_top2k",
            Scheme::L2Topk => "l2_topk",
            Scheme::L1Multiscale => "l1_multiscale",
            Scheme::CsPointwise => "cs_pointwise",
        }
    }

    /// Norm the ratio is measured in; `None` for the l_inf pointwise check.
    pub fn norm(self) -> Option<Norm> {
        match self {
            Scheme::L2Top2k | Scheme::L2Topk => Some(Norm::L2),
            Scheme::L1Multiscale => Some(Norm::L1),
            Scheme::CsPointwise => None,
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown scheme '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialParams {
    pub k: usize,
    pub epsilon: f64,
    /// Row multiplier, `d = ceil(c1 log2 n)`.
    pub c1: f64,
    /// l1 hash multiplier, `c = c3 max(1, r^2)`.
    pub c3: f64,
}

impl TrialParams {
    pub fn new(k: usize, epsilon: f64) -> Self {
        TrialParams {
            k,
            epsilon,
            c1: DEFAULT_ROW_MULTIPLIER,
            c3: DEFAULT_L1_MULTIPLIER,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub scheme: Scheme,
    pub n: usize,
    pub k: usize,
    pub epsilon: f64,
    pub instance: InstanceSpec,
    pub instance_seed: u64,
    pub recovery_seed: u64,
    /// `||x_hat - x||_p` (l_inf for the pointwise scheme).
    pub error: f64,
    /// `tail_err(x, k, p)`, or the pointwise bound `||x_tail(w)||_2 / sqrt(w)`.
    pub benchmark: f64,
    /// `error / benchmark`, or `error` itself when the benchmark is zero.
    pub ratio: f64,
    pub zero_benchmark: bool,
    pub success: bool,
    pub measurements: u64,
    pub wall_time: f64,
}

/// Scores an estimate against the exact benchmark.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub error: f64,
    pub benchmark: f64,
    pub ratio: f64,
    pub zero_benchmark: bool,
    pub success: bool,
}

/// Success means `ratio <= 1 + eps`; with a zero benchmark it means the error
/// is within [`ZERO_BENCHMARK_TOLERANCE`] of `scale`.
pub fn score(error: f64, benchmark: f64, scale: f64, epsilon: f64) -> Evaluation {
    if benchmark > 0.0 {
        let ratio = error / benchmark;
        Evaluation {
            error,
            benchmark,
            ratio,
            zero_benchmark: false,
            success: ratio <= 1.0 + epsilon,
        }
    } else {
        Evaluation {
            error,
            benchmark,
            ratio: error,
            zero_benchmark: true,
            success: error <= ZERO_BENCHMARK_TOLERANCE * scale,
        }
    }
}

/// `||x_hat - x||_p` against `tail_err(x, k, p)`.
pub fn evaluate(
    x: &SignalVector,
    estimate: &SignalVector,
    k: usize,
    p: Norm,
    epsilon: f64,
) -> Result<Evaluation> {
    let error = estimate.distance(x, p)?;
    Ok(score(error, tail_err(x, k, p), x.norm(p), epsilon))
}

fn check_compatible(spec: &InstanceSpec, scheme: Scheme, params: &TrialParams) -> Result<()> {
    if spec.k != params.k {
        return Err(Error::Config(format!(
            "instance k = {} differs from scheme k = {}",
            spec.k, params.k
        )));
    }
    let n = spec.n;
    match scheme {
        Scheme::L2Top2k | Scheme::L2Topk | Scheme::CsPointwise => {
            if params.k == 0 || !(params.epsilon > 0.0 && params.epsilon < 1.0) {
                return Err(Error::Config(format!(
                    "{scheme} needs k >= 1 and epsilon in (0, 1) (got k={}, epsilon={})",
                    params.k, params.epsilon
                )));
            }
            if scheme == Scheme::L2Top2k && 2 * params.k > n {
                return Err(Error::Config(format!(
                    "{scheme} needs 2k <= n (k={}, n={n})",
                    params.k
                )));
            }
        }
        Scheme::L1Multiscale => {
            L1Params::with_constants(n, params.k, params.epsilon, 0, params.c1, params.c3)
                .map_err(|e| Error::Config(e.to_string()))?;
        }
    }
    Ok(())
}

/// Generates the instance from `trial_seed`, runs `scheme` and scores it.
pub fn run_trial(
    spec: &InstanceSpec,
    scheme: Scheme,
    params: &TrialParams,
    trial_seed: u64,
) -> Result<TrialReport> {
    check_compatible(spec, scheme, params)?;
    let instance_seed = derive(trial_seed, "instance", &[]);
    let recovery_seed = derive(trial_seed, "recovery", &[]);
    let instance = generate(spec, instance_seed)?;
    let start = Instant::now();
    let x = &instance.signal;
    let (eval, measurements) = match scheme {
        Scheme::L2Top2k | Scheme::L2Topk => {
            let l2 = L2Params {
                k: params.k,
                epsilon: params.epsilon,
                c1: params.c1,
            };
            let t = if scheme == Scheme::L2Top2k {
                2 * params.k
            } else {
                params.k
            };
            let out = recover_l2(x, &l2, t, recovery_seed)?;
            (
                evaluate(x, &out.estimate, params.k, Norm::L2, params.epsilon)?,
                out.total_measurements,
            )
        }
        Scheme::L1Multiscale => {
            let l1 = L1Params::with_constants(
                x.len(),
                params.k,
                params.epsilon,
                recovery_seed,
                params.c1,
                params.c3,
            )?;
            let out = recover_l1_multiscale(x, &l1)?;
            (
                evaluate(x, &out.estimate, params.k, Norm::L1, params.epsilon)?,
                out.total_measurements,
            )
        }
        Scheme::CsPointwise => pointwise(x, params, recovery_seed)?,
    };
    let wall_time = start.elapsed().as_secs_f64();
    Ok(assemble(
        &instance,
        scheme,
        params,
        recovery_seed,
        eval,
        measurements,
        wall_time,
    ))
}

/// Scores an externally produced recovery of `instance` in the scheme's norm.
pub fn evaluate_recovery(
    instance: &Instance,
    scheme: Scheme,
    params: &TrialParams,
    output: &RecoveryOutput,
) -> Result<TrialReport> {
    let p = scheme
        .norm()
        .ok_or_else(|| Error::Config(format!("{scheme} is not scored from a recovery output")))?;
    let eval = evaluate(
        &instance.signal,
        &output.estimate,
        params.k,
        p,
        params.epsilon,
    )?;
    Ok(assemble(
        instance,
        scheme,
        params,
        output.seed,
        eval,
        output.total_measurements,
        0.0,
    ))
}

/// `||x* - x||_inf` of the full estimate vector against `||x_tail(w)||_2 / sqrt(w)`
/// for one sketch with `w = ceil(2k/eps)`.
fn pointwise(x: &SignalVector, params: &TrialParams, seed: u64) -> Result<(Evaluation, u64)> {
    let n = x.len();
    let w = ceil_tol(2.0 * params.k as f64 / params.epsilon).max(1);
    let config = SketchConfig::new(n, default_rows(n, params.c1), w, seed)?;
    let sketch = CountSketch::from_vector(config, x)?;
    let error = sketch.estimate_all().sub(x)?.norm_inf();
    let bound = tail_err(x, w, Norm::L2) / (w as f64).sqrt();
    Ok((
        score(error, bound, x.norm_inf(), params.epsilon),
        config.measurement_count(),
    ))
}

fn assemble(
    instance: &Instance,
    scheme: Scheme,
    params: &TrialParams,
    recovery_seed: u64,
    eval: Evaluation,
    measurements: u64,
    wall_time: f64,
) -> TrialReport {
    TrialReport {
        scheme,
        n: instance.spec.n,
        k: params.k,
        epsilon: params.epsilon,
        instance: instance.spec,
        instance_seed: instance.seed,
        recovery_seed,
        error: eval.error,
        benchmark: eval.benchmark,
        ratio: eval.ratio,
        zero_benchmark: eval.zero_benchmark,
        success: eval.success,
        measurements,
        wall_time,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub schemes: Vec<Scheme>,
    pub ns: Vec<usize>,
    pub ks: Vec<usize>,
    pub epsilons: Vec<f64>,
    pub instance: InstanceKind,
    /// Replace a spike-flat `f` with `sqrt(epsilon)` at each grid point.
    #[serde(default)]
    pub f_from_epsilon: bool,
    #[serde(default)]
    pub permute: bool,
    pub trials: usize,
    pub master_seed: u64,
    pub c1: f64,
    pub c3: f64,
}

impl ExperimentConfig {
    fn validate(&self) -> Result<()> {
        if self.schemes.is_empty()
            || self.ns.is_empty()
            || self.ks.is_empty()
            || self.epsilons.is_empty()
        {
            return Err(Error::Config("experiment grid is empty".into()));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        Ok(())
    }

    fn instance_spec(&self, n: usize, k: usize, epsilon: f64) -> InstanceSpec {
        let mut kind = self.instance;
        if self.f_from_epsilon {
            match &mut kind {
                InstanceKind::SpikeFlat { f, .. } | InstanceKind::SpikeFlatZipf { f, .. } => {
                    *f = epsilon.sqrt()
                }
                _ => {}
            }
        }
        InstanceSpec {
            n,
            k,
            kind,
            permute: self.permute,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridAggregate {
    pub scheme: Scheme,
    pub n: usize,
    pub k: usize,
    pub epsilon: f64,
    pub trials: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub wilson_low: f64,
    pub wilson_high: f64,
    pub ratio_p50: f64,
    pub ratio_p90: f64,
    pub ratio_p99: f64,
    pub mean_measurements: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema: String,
    pub config: ExperimentConfig,
    pub trials: Vec<TrialReport>,
    pub aggregates: Vec<GridAggregate>,
}

/// Wilson score interval at 95% confidence.
pub fn wilson_interval(successes: usize, trials: usize) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = WILSON_Z * WILSON_Z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = WILSON_Z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Nearest-rank quantile of an ascending slice.
pub fn nearest_rank(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

fn aggregate(trials: &[TrialReport]) -> GridAggregate {
    let first = &trials[0];
    let successes = trials.iter().filter(|t| t.success).count();
    let mut ratios: Vec<f64> = trials.iter().map(|t| t.ratio).collect();
    ratios.sort_by(f64::total_cmp);
    let (wilson_low, wilson_high) = wilson_interval(successes, trials.len());
    GridAggregate {
        scheme: first.scheme,
        n: first.n,
        k: first.k,
        epsilon: first.epsilon,
        trials: trials.len(),
        successes,
        success_rate: successes as f64 / trials.len() as f64,
        wilson_low,
        wilson_high,
        ratio_p50: nearest_rank(&ratios, 0.5),
        ratio_p90: nearest_rank(&ratios, 0.9),
        ratio_p99: nearest_rank(&ratios, 0.99),
        mean_measurements: trials.iter().map(|t| t.measurements as f64).sum::<f64>()
            / trials.len() as f64,
    }
}

/// Groups consecutive trials sharing `(scheme, n, k, epsilon)` and aggregates each group.
pub fn aggregate_trials(trials: &[TrialReport]) -> Vec<GridAggregate> {
    trials
        .chunk_by(|a, b| {
            a.scheme == b.scheme
                && a.n == b.n
                && a.k == b.k
                && a.epsilon.to_bits() == b.epsilon.to_bits()
        })
        .map(aggregate)
        .collect()
}

/// Runs the full grid. `jobs` caps the worker pool; `None` uses rayon's default.
pub fn run_experiment(config: &ExperimentConfig, jobs: Option<usize>) -> Result<ExperimentReport> {
    config.validate()?;
    struct Task {
        scheme: Scheme,
        spec: InstanceSpec,
        params: TrialParams,
        seed: u64,
    }
    let mut tasks = Vec::new();
    for &scheme in &config.schemes {
        for (ni, &n) in config.ns.iter().enumerate() {
            for (ki, &k) in config.ks.iter().enumerate() {
                for (ei, &epsilon) in config.epsilons.iter().enumerate() {
                    let spec = config.instance_spec(n, k, epsilon);
                    let params = TrialParams {
                        k,
                        epsilon,
                        c1: config.c1,
                        c3: config.c3,
                    };
                    check_compatible(&spec, scheme, &params)?;
                    for t in 0..config.trials {
                        let seed = derive(
                            config.master_seed,
                            "trial",
                            &[ni as u64, ki as u64, ei as u64, t as u64],
                        );
                        tasks.push(Task {
                            scheme,
                            spec,
                            params,
                            seed,
                        });
                    }
                }
            }
        }
    }
    let run = || -> Result<Vec<TrialReport>> {
        tasks
            .par_iter()
            .map(|t| run_trial(&t.spec, t.scheme, &t.params, t.seed))
            .collect()
    };
    let trials = match jobs {
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build()
            .map_err(|e| Error::Config(format!("worker pool: {e}")))?
            .install(run)?,
        None => run()?,
    };
    let aggregates = aggregate_trials(&trials);
    Ok(ExperimentReport {
        schema: SCHEMA_VERSION.to_string(),
        config: config.clone(),
        trials,
        aggregates,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Json,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(Error::Config(format!("unknown report format '{other}'"))),
        }
    }
}

pub const CSV_COLUMNS: [&str; 11] = [
    "scheme",
    "n",
    "k",
    "epsilon",
    "instance_kind",
    "instance_seed",
    "recovery_seed",
    "ratio",
    "success",
    "measurements",
    "wall_time",
];

impl ExperimentReport {
    /// Copy with every `wall_time` zeroed, for byte-level determinism checks.
    pub fn masked_wall_time(&self) -> ExperimentReport {
        let mut out = self.clone();
        for t in &mut out.trials {
            t.wall_time = 0.0;
        }
        out
    }

    pub fn from_json(bytes: &[u8]) -> Result<ExperimentReport> {
        Ok(serde_json::from_slice(bytes)?)
    }
}

pub fn emit_report(report: &ExperimentReport, format: ReportFormat) -> Result<Vec<u8>> {
    match format {
        ReportFormat::Json => {
            let mut out = serde_json::to_vec_pretty(report)?;
            out.push(b'\n');
            Ok(out)
        }
        ReportFormat::Csv => {
            let mut w = csv::WriterBuilder::new()
                .terminator(csv::Terminator::Any(b'\n'))
                .from_writer(Vec::new());
            w.write_record(CSV_COLUMNS)?;
            for t in &report.trials {
                w.write_record([
                    t.scheme.name().to_string(),
                    t.n.to_string(),
                    t.k.to_string(),
                    t.epsilon.to_string(),
                    t.instance.kind.name().to_string(),
                    t.instance_seed.to_string(),
                    t.recovery_seed.to_string(),
                    t.ratio.to_string(),
                    t.success.to_string(),
                    t.measurements.to_string(),
                    t.wall_time.to_string(),
                ])?;
            }
            w.into_inner().map_err(|e| Error::Io(e.into_error()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exact_config(trials: usize) -> ExperimentConfig {
        ExperimentConfig {
            schemes: vec![Scheme::L2Top2k],
            ns: vec![256],
            ks: vec![2],
            epsilons: vec![0.5],
            instance: InstanceKind::ExactSparse { value_scale: 4.0 },
            f_from_epsilon: false,
            permute: false,
            trials,
            master_seed: 17,
            c1: DEFAULT_ROW_MULTIPLIER,
            c3: DEFAULT_L1_MULTIPLIER,
        }
    }

    #[test]
    fn scheme_names_round_trip() {
        for s in Scheme::ALL {
            assert_eq!(s.name().parse::<Scheme>().unwrap(), s);
        }
        assert!("l3".parse::<Scheme>().is_err());
    }

    #[test]
    fn scoring_rules() {
        let e = score(1.2, 1.0, 5.0, 0.25);
        assert!(e.success && !e.zero_benchmark);
        assert!(!score(1.3, 1.0, 5.0, 0.25).success);
        let z = score(0.0, 0.0, 5.0, 0.25);
        assert!(z.success && z.zero_benchmark && z.ratio == 0.0);
        assert!(!score(1e-3, 0.0, 5.0, 0.25).success);
    }

    #[test]
    fn wilson_bounds() {
        let (lo, hi) = wilson_interval(50, 100);
        assert!((lo - 0.4038).abs() < 1e-3 && (hi - 0.5962).abs() < 1e-3);
        let (lo, hi) = wilson_interval(100, 100);
        assert!(hi == 1.0 && lo > 0.96);
        assert_eq!(wilson_interval(0, 0), (0.0, 1.0));
    }

    #[test]
    fn nearest_rank_quantiles() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(nearest_rank(&v, 0.5), 50.0);
        assert_eq!(nearest_rank(&v, 0.9), 90.0);
        assert_eq!(nearest_rank(&v, 0.99), 99.0);
        assert_eq!(nearest_rank(&[3.0], 0.99), 3.0);
    }

    #[test]
    fn incompatible_params_are_config_errors() {
        let spec = InstanceSpec {
            n: 16,
            k: 2,
            kind: InstanceKind::ExactSparse { value_scale: 1.0 },
            permute: false,
        };
        assert!(matches!(
            run_trial(&spec, Scheme::L2Top2k, &TrialParams::new(3, 0.5), 0),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            run_trial(&spec, Scheme::L2Top2k, &TrialParams::new(2, 1.5), 0),
            Err(Error::Config(_))
        ));
        let spec = InstanceSpec {
            n: 16,
            k: 12,
            ..spec
        };
        assert!(matches!(
            run_trial(&spec, Scheme::L2Top2k, &TrialParams::new(12, 0.5), 0),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            run_trial(&spec, Scheme::L1Multiscale, &TrialParams::new(12, 0.25), 0),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn empty_grid_is_rejected() {
        let mut c = exact_config(1);
        c.epsilons.clear();
        assert!(matches!(run_experiment(&c, Some(1)), Err(Error::Config(_))));
        let mut c = exact_config(0);
        c.trials = 0;
        assert!(run_experiment(&c, Some(1)).is_err());
    }

    #[test]
    fn single_trial_aggregates_equal_the_trial() {
        let r = run_experiment(&exact_config(1), Some(1)).unwrap();
        assert_eq!(r.trials.len(), 1);
        let (t, a) = (&r.trials[0], &r.aggregates[0]);
        assert_eq!(a.ratio_p50, t.ratio);
        assert_eq!(a.ratio_p99, t.ratio);
        assert_eq!(a.mean_measurements, t.measurements as f64);
        assert_eq!(a.success_rate, if t.success { 1.0 } else { 0.0 });
    }

    #[test]
    fn exact_sparse_trial_is_exact() {
        let r = run_experiment(&exact_config(5), Some(2)).unwrap();
        for t in &r.trials {
            assert!(t.zero_benchmark);
            assert_eq!(t.ratio, 0.0);
            assert!(t.success);
            assert_eq!(t.measurements, 40 * 8);
        }
    }

    #[test]
    fn csv_layout() {
        let mut r = run_experiment(&exact_config(3), Some(1)).unwrap();
        let csv = String::from_utf8(emit_report(&r, ReportFormat::Csv).unwrap()).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0], CSV_COLUMNS.join(","));
        assert!(lines[1].starts_with("l2_top2k,256,2,0.5,exact_sparse,"));
        assert!(!csv.contains('\r'));
        r.trials.clear();
        let csv = emit_report(&r, ReportFormat::Csv).unwrap();
        assert_eq!(
            String::from_utf8(csv).unwrap(),
            format!("{}\n", CSV_COLUMNS.join(","))
        );
    }

    #[test]
    fn json_round_trip() {
        let r = run_experiment(&exact_config(3), Some(1)).unwrap();
        let bytes = emit_report(&r, ReportFormat::Json).unwrap();
        assert_eq!(ExperimentReport::from_json(&bytes).unwrap(), r);
    }
}
