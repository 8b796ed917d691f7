//! The `sparselab` command line.
//!
//! Exit codes: 0 ok, 2 usage or parameter error, 3 failed check, 4 I/O error.
//! Human summaries go to stdout, machine output only to `--out` files.

pub mod selfcheck;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::countsketch::{default_rows, CountSketch, SketchConfig, DEFAULT_ROW_MULTIPLIER};
use crate::error::Error;
use crate::harness::{
    emit_report, evaluate, run_experiment, ExperimentConfig, ReportFormat, Scheme,
};
use crate::instances::{generate, Instance, InstanceKind, InstanceSpec};
use crate::recovery::{
    ceil_tol, recover_l1_multiscale, recover_l2, L1Params, L2Params, DEFAULT_L1_MULTIPLIER,
};
use crate::signal::Norm;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CHECK: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "sparselab",
    version,
    about = "Count-Sketch sparse recovery experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate an instance file.
    Gen(GenArgs),
    /// Sketch an instance file.
    Sketch(SketchArgs),
    /// Run one recovery scheme on an instance file.
    Recover(RecoverArgs),
    /// Run a Monte-Carlo sweep.
    Bench(BenchArgs),
    /// Run the fast invariant suite.
    Selfcheck(SelfcheckArgs),
}

/// Instance-family flags shared by `gen` and `bench`.
#[derive(Debug, Args, Clone, Default)]
pub struct InstanceFlags {
    /// spike_flat | gaussian_channel | exact_sparse | zipf_noise | spike_flat_zipf | flat_block
    #[arg(long)]
    pub instance: Option<String>,
    /// Spike-flat f; defaults to sqrt(epsilon).
    #[arg(long)]
    pub f: Option<f64>,
    /// Spike-flat exponent c in [0, 2].
    #[arg(long = "c-exp")]
    pub c_exp: Option<f64>,
    /// Gaussian-channel noise level.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Zipf exponent (zipf_noise, spike_flat_zipf, flat_block tail).
    #[arg(long)]
    pub exponent: Option<f64>,
    /// exact_sparse value scale, or the Zipf noise scale of composite kinds.
    #[arg(long)]
    pub scale: Option<f64>,
    /// flat_block: relative gap between the top k and the next k.
    #[arg(long)]
    pub gap: Option<f64>,
    #[arg(long)]
    pub permute: bool,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[command(flatten)]
    pub family: InstanceFlags,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    /// Used only to default spike-flat f to sqrt(epsilon).
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SketchArgs {
    /// Instance file written by `gen`.
    #[arg(long)]
    pub input: PathBuf,
    /// Buckets per row; defaults to ceil(2k/epsilon).
    #[arg(long)]
    pub width: Option<usize>,
    /// Rows; defaults to ceil(c1 log2 n).
    #[arg(long)]
    pub rows: Option<usize>,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    #[arg(long, default_value_t = 0.25)]
    pub epsilon: f64,
    #[arg(long, default_value_t = DEFAULT_ROW_MULTIPLIER)]
    pub c1: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// bin | json
    #[arg(long, default_value = "bin")]
    pub format: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RecoverArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// l2_top2k | l2_topk | l1_multiscale
    #[arg(long, default_value = "l2_top2k")]
    pub scheme: String,
    /// Defaults to the instance's k.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, default_value_t = 0.25)]
    pub epsilon: f64,
    #[arg(long, default_value_t = DEFAULT_ROW_MULTIPLIER)]
    pub c1: f64,
    #[arg(long, default_value_t = DEFAULT_L1_MULTIPLIER)]
    pub c3: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub family: InstanceFlags,
    /// Comma-separated schemes.
    #[arg(long, value_delimiter = ',')]
    pub scheme: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    pub n: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    pub k: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    pub epsilon: Vec<f64>,
    #[arg(long)]
    pub trials: Option<usize>,
    /// Master seed; required unless the params file sets one.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub c1: Option<f64>,
    #[arg(long)]
    pub c3: Option<f64>,
    /// JSON experiment config; explicit flags override its fields.
    #[arg(long = "params-file")]
    pub params_file: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// csv | json
    #[arg(long, default_value = "csv")]
    pub format: String,
    /// Worker threads.
    #[arg(long, env = "SPARSELAB_JOBS")]
    pub jobs: Option<usize>,
    /// Write zero for every wall_time so reruns are byte-identical.
    #[arg(long = "mask-wall-time")]
    pub mask_wall_time: bool,
}

#[derive(Debug, Args)]
pub struct SelfcheckArgs {
    /// Skip the Monte-Carlo checks.
    #[arg(long)]
    pub fast: bool,
    /// Golden hash CSV to verify instead of the built-in copy.
    #[arg(long)]
    pub golden: Option<PathBuf>,
}

/// Failure of a CLI command, carrying its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Io(_) => EXIT_IO,
            _ => EXIT_USAGE,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

type CliResult = std::result::Result<(), CliError>;

/// Parses `args` (including the program name) and runs the command; returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match run(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

pub fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Sketch(a) => cmd_sketch(a),
        Command::Recover(a) => cmd_recover(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Selfcheck(a) => cmd_selfcheck(a),
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult {
    fs::write(path, bytes).map_err(|e| CliError {
        code: EXIT_IO,
        message: format!("{}: {e}", path.display()),
    })
}

fn read_file(path: &Path) -> std::result::Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError {
        code: EXIT_IO,
        message: format!("{}: {e}", path.display()),
    })
}

/// Resolves the instance family. `epsilon` supplies the default spike-flat `f`.
fn instance_kind(
    flags: &InstanceFlags,
    default_kind: &str,
    epsilon: Option<f64>,
) -> std::result::Result<InstanceKind, CliError> {
    let f = || {
        flags
            .f
            .or_else(|| epsilon.map(f64::sqrt))
            .ok_or_else(|| CliError::usage("spike-flat instances need --f or --epsilon"))
    };
    let c_exponent = flags.c_exp.unwrap_or(1.0);
    let exponent = flags.exponent.unwrap_or(1.0);
    let name = flags.instance.as_deref().unwrap_or(default_kind);
    Ok(match name {
        "spike_flat" => InstanceKind::SpikeFlat {
            f: f()?,
            c_exponent,
        },
        "gaussian_channel" => InstanceKind::GaussianChannel {
            alpha: flags.alpha.unwrap_or(16.0),
        },
        "exact_sparse" => InstanceKind::ExactSparse {
            value_scale: flags.scale.unwrap_or(10.0),
        },
        "zipf_noise" => InstanceKind::ZipfNoise { exponent },
        "spike_flat_zipf" => InstanceKind::SpikeFlatZipf {
            f: f()?,
            c_exponent,
            zipf_exponent: exponent,
            zipf_scale: flags.scale.unwrap_or(1.0),
        },
        "flat_block" => InstanceKind::FlatBlock {
            gap: flags.gap.unwrap_or(0.0),
            tail_exponent: exponent,
            tail_scale: flags.scale.unwrap_or(1.0),
        },
        other => return Err(CliError::usage(format!("unknown instance kind '{other}'"))),
    })
}

fn print_constants(c1: f64, c3: f64) {
    println!("constants: c1={c1} c3={c3}");
}

fn cmd_gen(a: GenArgs) -> CliResult {
    if a.family.instance.is_none() {
        return Err(CliError::usage("gen needs --instance"));
    }
    let kind = instance_kind(&a.family, "", a.epsilon)?;
    let spec = InstanceSpec {
        n: a.n,
        k: a.k,
        kind,
        permute: a.family.permute,
    };
    println!(
        "gen: {} n={} k={} seed={} permute={} params={}",
        kind.name(),
        a.n,
        a.k,
        a.seed,
        spec.permute,
        serde_json::to_string(&kind).unwrap_or_default()
    );
    print_constants(DEFAULT_ROW_MULTIPLIER, DEFAULT_L1_MULTIPLIER);
    let inst = generate(&spec, a.seed)?;
    write_file(&a.out, inst.to_json()?.as_bytes())?;
    println!(
        "tail_err_1={} tail_err_2={} nonzeros={}",
        inst.tail_err_1,
        inst.tail_err_2,
        inst.signal.support_size()
    );
    println!("wrote {}", a.out.display());
    Ok(())
}

fn load_instance(path: &Path) -> std::result::Result<Instance, CliError> {
    Ok(Instance::from_json(&read_file(path)?)?)
}

fn cmd_sketch(a: SketchArgs) -> CliResult {
    let inst = load_instance(&a.input)?;
    let n = inst.spec.n;
    let w = match a.width {
        Some(w) => w,
        None => {
            if a.k == 0 || a.epsilon.is_nan() || a.epsilon <= 0.0 {
                return Err(CliError::usage(
                    "--k must be >= 1 and --epsilon > 0 when --width is absent",
                ));
            }
            ceil_tol(2.0 * a.k as f64 / a.epsilon).max(1)
        }
    };
    let d = a.rows.unwrap_or_else(|| default_rows(n, a.c1));
    let config = SketchConfig::new(n, d, w, a.seed)?;
    println!(
        "sketch: n={n} d={d} w={w} seed={} measurements={}",
        a.seed,
        config.measurement_count()
    );
    print_constants(a.c1, DEFAULT_L1_MULTIPLIER);
    let sketch = CountSketch::from_vector(config, &inst.signal)?;
    let bytes = match a.format.as_str() {
        "bin" => sketch.to_bytes(),
        "json" => sketch.to_json()?.into_bytes(),
        other => return Err(CliError::usage(format!("unknown sketch format '{other}'"))),
    };
    write_file(&a.out, &bytes)?;
    println!("wrote {}", a.out.display());
    Ok(())
}

fn cmd_recover(a: RecoverArgs) -> CliResult {
    let inst = load_instance(&a.input)?;
    let scheme: Scheme = a.scheme.parse()?;
    let k = a.k.unwrap_or(inst.spec.k);
    let x = &inst.signal;
    println!(
        "recover: scheme={scheme} n={} k={k} epsilon={} seed={}",
        x.len(),
        a.epsilon,
        a.seed
    );
    print_constants(a.c1, a.c3);
    let (out, norm) = match scheme {
        Scheme::L2Top2k | Scheme::L2Topk => {
            let p = L2Params {
                k,
                epsilon: a.epsilon,
                c1: a.c1,
            };
            let t = if scheme == Scheme::L2Top2k { 2 * k } else { k };
            (recover_l2(x, &p, t, a.seed)?, Norm::L2)
        }
        Scheme::L1Multiscale => {
            let p = L1Params::with_constants(x.len(), k, a.epsilon, a.seed, a.c1, a.c3)?;
            println!(
                "l1 params: f={} r={} c={} q={} d={}",
                p.f,
                p.levels,
                p.c,
                p.q(),
                p.d
            );
            (recover_l1_multiscale(x, &p)?, Norm::L1)
        }
        Scheme::CsPointwise => {
            return Err(CliError::usage("cs_pointwise is only available in bench"))
        }
    };
    let eval = evaluate(x, &out.estimate, k, norm, a.epsilon)?;
    write_file(&a.out, out.to_json()?.as_bytes())?;
    println!(
        "error={} benchmark={} ratio={} success={} measurements={}",
        eval.error, eval.benchmark, eval.ratio, eval.success, out.total_measurements
    );
    println!("wrote {}", a.out.display());
    Ok(())
}

fn bench_config(a: &BenchArgs) -> std::result::Result<ExperimentConfig, CliError> {
    let base = match &a.params_file {
        Some(p) => {
            Some(serde_json::from_str::<ExperimentConfig>(&read_file(p)?).map_err(Error::from)?)
        }
        None => None,
    };
    let master_seed = a
        .seed
        .or(base.as_ref().map(|b| b.master_seed))
        .ok_or_else(|| CliError::usage("bench requires --seed"))?;
    let schemes = if a.scheme.is_empty() {
        base.as_ref()
            .map_or(vec![Scheme::L2Top2k], |b| b.schemes.clone())
    } else {
        a.scheme
            .iter()
            .map(|s| s.parse())
            .collect::<Result<_, Error>>()?
    };
    let pick = |flag: &Vec<usize>, from: Option<&Vec<usize>>, default: usize| {
        if flag.is_empty() {
            from.cloned().unwrap_or_else(|| vec![default])
        } else {
            flag.clone()
        }
    };
    let epsilons = if a.epsilon.is_empty() {
        base.as_ref().map_or(vec![0.25], |b| b.epsilons.clone())
    } else {
        a.epsilon.clone()
    };
    let family_given = a.family.instance.is_some();
    let (instance, f_from_epsilon) = match (&base, family_given) {
        (Some(b), false) => (b.instance, b.f_from_epsilon),
        _ => {
            let placeholder = Some(epsilons[0]);
            (
                instance_kind(&a.family, "spike_flat_zipf", placeholder)?,
                a.family.f.is_none(),
            )
        }
    };
    Ok(ExperimentConfig {
        schemes,
        ns: pick(&a.n, base.as_ref().map(|b| &b.ns), 4096),
        ks: pick(&a.k, base.as_ref().map(|b| &b.ks), 10),
        epsilons,
        instance,
        f_from_epsilon,
        permute: a.family.permute || base.as_ref().is_some_and(|b| b.permute),
        trials: a.trials.or(base.as_ref().map(|b| b.trials)).unwrap_or(100),
        master_seed,
        c1: a
            .c1
            .or(base.as_ref().map(|b| b.c1))
            .unwrap_or(DEFAULT_ROW_MULTIPLIER),
        c3: a
            .c3
            .or(base.as_ref().map(|b| b.c3))
            .unwrap_or(DEFAULT_L1_MULTIPLIER),
    })
}

fn cmd_bench(a: BenchArgs) -> CliResult {
    let format: ReportFormat = a.format.parse()?;
    let config = bench_config(&a)?;
    println!(
        "bench config: {}",
        serde_json::to_string(&config).map_err(Error::from)?
    );
    print_constants(config.c1, config.c3);
    if let Some(j) = a.jobs {
        println!("jobs: {j}");
    }
    let mut report = run_experiment(&config, a.jobs)?;
    if a.mask_wall_time {
        report = report.masked_wall_time();
    }
    println!(
        "{:<14} {:>6} {:>4} {:>8} {:>7} {:>9} {:>17} {:>10} {:>12}",
        "scheme", "n", "k", "epsilon", "trials", "success", "wilson95", "ratio_p50", "measurements"
    );
    for g in &report.aggregates {
        println!(
            "{:<14} {:>6} {:>4} {:>8} {:>7} {:>9.3} [{:>6.3}, {:>6.3}] {:>10.4} {:>12}",
            g.scheme.name(),
            g.n,
            g.k,
            g.epsilon,
            g.trials,
            g.success_rate,
            g.wilson_low,
            g.wilson_high,
            g.ratio_p50,
            g.mean_measurements
        );
    }
    if let Some(out) = &a.out {
        write_file(out, &emit_report(&report, format)?)?;
        println!("wrote {}", out.display());
    }
    Ok(())
}

fn cmd_selfcheck(a: SelfcheckArgs) -> CliResult {
    let golden = match &a.golden {
        Some(p) => read_file(p)?,
        None => selfcheck::GOLDEN_HASHES.to_string(),
    };
    print_constants(DEFAULT_ROW_MULTIPLIER, DEFAULT_L1_MULTIPLIER);
    let results = selfcheck::run_checks(&golden, a.fast);
    let mut failed = Vec::new();
    for (name, outcome) in &results {
        match outcome {
            Ok(()) => println!("PASS {name}"),
            Err(msg) => {
                println!("FAIL {name}: {msg}");
                failed.push(*name);
            }
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError {
            code: EXIT_CHECK,
            message: format!("failed checks: {}", failed.join(", ")),
        })
    }
}
