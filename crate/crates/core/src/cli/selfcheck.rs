//! Invariant checks behind `sparselab selfcheck`.

use crate::countsketch::{CountSketch, SketchConfig};
use crate::harness::{run_trial, Scheme, TrialParams};
use crate::hashing::HashFamily;
use crate::instances::{InstanceKind, InstanceSpec};
use crate::recovery::tail_err;
use crate::seed::{derive, rng};
use crate::signal::{Norm, SignalVector};
use rand::Rng;

/// Rows and range of the hash families recorded in the golden file.
pub const GOLDEN_ROWS: usize = 8;
pub const GOLDEN_RANGE: usize = 1024;
pub const GOLDEN_SEEDS: [u64; 4] = [0, 1, 0xDEAD_BEEF, u64::MAX];
pub const GOLDEN_INDICES: [u64; 8] = [0, 1, 2, 1023, 4096, 65_535, (1 << 32) + 7, (1 << 61) - 2];

pub const GOLDEN_HASHES: &str = include_str!("../../tests/data/golden_hashes.csv");

pub type CheckOutcome = Result<(), String>;

/// One golden tuple.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GoldenRow {
    pub seed: u64,
    pub row: usize,
    pub index: u64,
    pub bucket: usize,
    pub sign: i8,
}

/// Computes the golden tuples from the current implementation.
pub fn golden_rows() -> Vec<GoldenRow> {
    let mut out = Vec::with_capacity(GOLDEN_SEEDS.len() * GOLDEN_ROWS * GOLDEN_INDICES.len());
    for &seed in &GOLDEN_SEEDS {
        let fam = HashFamily::new(seed, GOLDEN_ROWS, GOLDEN_RANGE).expect("valid golden family");
        for row in 0..GOLDEN_ROWS {
            for &index in &GOLDEN_INDICES {
                out.push(GoldenRow {
                    seed,
                    row,
                    index,
                    bucket: fam.bucket_unchecked(row, index),
                    sign: fam.sign_unchecked(row, index),
                });
            }
        }
    }
    out
}

pub fn render_golden_csv(rows: &[GoldenRow]) -> String {
    let mut s = String::from("seed,row,index,bucket,sign\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            r.seed, r.row, r.index, r.bucket, r.sign
        ));
    }
    s
}

pub fn parse_golden_csv(text: &str) -> Result<Vec<GoldenRow>, String> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| e.to_string())?.clone();
    if headers.iter().collect::<Vec<_>>() != ["seed", "row", "index", "bucket", "sign"] {
        return Err(format!("unexpected header {:?}", headers));
    }
    let mut rows = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| e.to_string())?;
        let field = |i: usize| rec.get(i).unwrap_or("").trim().to_string();
        let bad = |what: &str| format!("record {}: bad {what}", line + 1);
        rows.push(GoldenRow {
            seed: field(0).parse().map_err(|_| bad("seed"))?,
            row: field(1).parse().map_err(|_| bad("row"))?,
            index: field(2).parse().map_err(|_| bad("index"))?,
            bucket: field(3).parse().map_err(|_| bad("bucket"))?,
            sign: field(4).parse().map_err(|_| bad("sign"))?,
        });
    }
    Ok(rows)
}

/// Compares every tuple of a golden CSV against the hash family.
pub fn check_golden(text: &str) -> CheckOutcome {
    let rows = parse_golden_csv(text)
        .map_err(|e| format!("golden-hash mismatch: unreadable file ({e})"))?;
    if rows.is_empty() {
        return Err("golden-hash mismatch: no tuples".into());
    }
    for r in rows {
        let fam = HashFamily::new(r.seed, r.row + 1, GOLDEN_RANGE).map_err(|e| e.to_string())?;
        let bucket = fam.bucket_unchecked(r.row, r.index);
        let sign = fam.sign_unchecked(r.row, r.index);
        if bucket != r.bucket || sign != r.sign {
            return Err(format!(
                "golden-hash mismatch at seed={} row={} index={}: expected ({}, {}), got ({bucket}, {sign})",
                r.seed, r.row, r.index, r.bucket, r.sign
            ));
        }
    }
    Ok(())
}

fn random_integer_vector(n: usize, seed: u64, density: f64) -> SignalVector {
    let mut g = rng(seed, "selfcheck", &[n as u64]);
    let v = (0..n)
        .map(|_| {
            if g.gen_bool(density) {
                g.gen_range(-50i32..=50) as f64
            } else {
                0.0
            }
        })
        .collect();
    SignalVector::new(v).expect("finite")
}

/// `sketch(x) + sketch(y) == sketch(x + y)` and `sketch(2x) == 2 sketch(x)`, bit for bit.
pub fn check_linearity() -> CheckOutcome {
    for s in 0..5u64 {
        let n = 1000;
        let config =
            SketchConfig::new(n, 7, 50, derive(s, "linearity", &[])).map_err(|e| e.to_string())?;
        let x = random_integer_vector(n, 2 * s, 0.3);
        let y = random_integer_vector(n, 2 * s + 1, 0.3);
        let sum = x.add(&y).map_err(|e| e.to_string())?;
        let sx = CountSketch::from_vector(config, &x).map_err(|e| e.to_string())?;
        let sy = CountSketch::from_vector(config, &y).map_err(|e| e.to_string())?;
        let merged = CountSketch::merge(&sx, &sy).map_err(|e| e.to_string())?;
        let direct = CountSketch::from_vector(config, &sum).map_err(|e| e.to_string())?;
        if merged.tables() != direct.tables() {
            return Err(format!(
                "linearity: merge differs from sketch of sum (seed {s})"
            ));
        }
        let doubled = CountSketch::from_vector(config, &x.scale(2.0)).map_err(|e| e.to_string())?;
        if doubled
            .tables()
            .iter()
            .zip(sx.tables())
            .any(|(a, b)| *a != 2.0 * b)
        {
            return Err(format!("linearity: scaling mismatch (seed {s})"));
        }
    }
    Ok(())
}

fn sorted_median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len();
    if m % 2 == 1 {
        v[m / 2]
    } else {
        (v[m / 2 - 1] + v[m / 2]) / 2.0
    }
}

/// Sketch tables and estimates match a straight-line reference at n = 256.
pub fn check_oracle() -> CheckOutcome {
    let n = 256;
    for (s, d) in [(3u64, 9usize), (4, 8)] {
        let w = 32;
        let config = SketchConfig::new(n, d, w, s).map_err(|e| e.to_string())?;
        let x = random_integer_vector(n, 100 + s, 0.5);
        let sketch = CountSketch::from_vector(config, &x).map_err(|e| e.to_string())?;
        let fam = HashFamily::new(s, d, w).map_err(|e| e.to_string())?;
        let mut table = vec![vec![0.0; w]; d];
        for (r, row) in table.iter_mut().enumerate() {
            for i in 0..n {
                let b = fam.bucket_of(r, i as u64).map_err(|e| e.to_string())?;
                let g = fam.sign_of(r, i as u64).map_err(|e| e.to_string())?;
                row[b] += f64::from(g) * x[i];
            }
        }
        for (r, row) in table.iter().enumerate() {
            if sketch.row(r) != row.as_slice() {
                return Err(format!("oracle-equivalence: row {r} differs (seed {s})"));
            }
        }
        let est = sketch.estimate_all();
        for i in 0..n {
            let votes = (0..d)
                .map(|r| {
                    let b = fam.bucket_of(r, i as u64).unwrap();
                    f64::from(fam.sign_of(r, i as u64).unwrap()) * table[r][b]
                })
                .collect();
            let want = sorted_median(votes);
            if est[i] != want {
                return Err(format!(
                    "oracle-equivalence: estimate of {i} is {} not {want} (seed {s})",
                    est[i]
                ));
            }
        }
    }
    Ok(())
}

/// Tail error matches exhaustive search over all k-subsets for tiny vectors.
pub fn check_tail() -> CheckOutcome {
    for s in 0..20u64 {
        let n = 4 + (s as usize % 6);
        let x = random_integer_vector(n, 500 + s, 0.8);
        for k in 0..=n {
            for p in [Norm::L1, Norm::L2] {
                let mut best = f64::INFINITY;
                for mask in 0u32..(1 << n) {
                    if mask.count_ones() as usize != k {
                        continue;
                    }
                    let rest: Vec<f64> = (0..n)
                        .filter(|i| mask & (1 << i) == 0)
                        .map(|i| x[i])
                        .collect();
                    best = best.min(SignalVector::new(rest).unwrap().norm(p));
                }
                let got = tail_err(&x, k, p);
                if (got - best).abs() > 1e-9 * best.max(1.0) {
                    return Err(format!("tail-oracle: n={n} k={k} {p:?}: {got} vs {best}"));
                }
            }
        }
    }
    Ok(())
}

fn success_count(
    spec: InstanceSpec,
    scheme: Scheme,
    params: TrialParams,
    trials: u64,
) -> Result<usize, String> {
    let mut hits = 0;
    for t in 0..trials {
        let r = run_trial(
            &spec,
            scheme,
            &params,
            derive(0x5E1F, "selfcheck-trial", &[t]),
        )
        .map_err(|e| e.to_string())?;
        hits += usize::from(r.success);
    }
    Ok(hits)
}

/// Small Monte-Carlo runs of both recovery schemes.
pub fn check_monte_carlo() -> CheckOutcome {
    let exact = InstanceSpec {
        n: 1024,
        k: 4,
        kind: InstanceKind::ExactSparse { value_scale: 10.0 },
        permute: false,
    };
    let hits = success_count(exact, Scheme::L2Top2k, TrialParams::new(4, 0.25), 20)?;
    if hits < 20 {
        return Err(format!("l2 exact-sparse recovery succeeded in {hits}/20"));
    }
    let spike = InstanceSpec {
        n: 1024,
        k: 1,
        kind: InstanceKind::SpikeFlat {
            f: 0.5,
            c_exponent: 1.0,
        },
        permute: true,
    };
    let hits = success_count(spike, Scheme::L1Multiscale, TrialParams::new(1, 0.25), 20)?;
    if hits < 18 {
        return Err(format!("l1 spike-flat recovery succeeded in {hits}/20"));
    }
    Ok(())
}

/// Runs all checks in order; Monte-Carlo checks are skipped when `fast`.
pub fn run_checks(golden_csv: &str, fast: bool) -> Vec<(&'static str, CheckOutcome)> {
    let mut out = vec![
        ("golden-hashes", check_golden(golden_csv)),
        ("linearity", check_linearity()),
        ("oracle-equivalence", check_oracle()),
        ("tail-oracle", check_tail()),
    ];
    if !fast {
        out.push(("monte-carlo", check_monte_carlo()));
    }
    out
}
