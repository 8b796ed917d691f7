use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sparselab::countsketch::{default_rows, CountSketch, SketchConfig};
use sparselab::recovery::tail_err;
use sparselab::{HashFamily, Norm, SignalVector};

fn straight_line_table(x: &SignalVector, d: usize, w: usize, seed: u64) -> Vec<Vec<f64>> {
    let fam = HashFamily::new(seed, d, w).unwrap();
    let mut t = vec![vec![0.0; w]; d];
    for (r, row) in t.iter_mut().enumerate() {
        for i in 0..x.len() {
            let b = fam.bucket_of(r, i as u64).unwrap();
            row[b] += f64::from(fam.sign_of(r, i as u64).unwrap()) * x[i];
        }
    }
    t
}

fn straight_line_estimate(table: &[Vec<f64>], fam: &HashFamily, i: usize) -> f64 {
    let mut v: Vec<f64> = (0..table.len())
        .map(|r| {
            f64::from(fam.sign_of(r, i as u64).unwrap())
                * table[r][fam.bucket_of(r, i as u64).unwrap()]
        })
        .collect();
    v.sort_by(f64::total_cmp);
    let m = v.len();
    if m % 2 == 1 {
        v[m / 2]
    } else {
        (v[m / 2 - 1] + v[m / 2]) / 2.0
    }
}

fn integer_vector(n: usize, seed: u64) -> SignalVector {
    let mut g = ChaCha8Rng::seed_from_u64(seed);
    SignalVector::new(
        (0..n)
            .map(|_| g.gen_range(-1000i32..=1000) as f64)
            .collect(),
    )
    .unwrap()
}

fn pm_one_vector(n: usize, seed: u64) -> SignalVector {
    let mut g = ChaCha8Rng::seed_from_u64(seed);
    SignalVector::new(
        (0..n)
            .map(|_| if g.gen::<bool>() { 1.0 } else { -1.0 })
            .collect(),
    )
    .unwrap()
}

#[test]
fn default_rows_values() {
    assert_eq!(default_rows(4096, 5.0), 60);
    assert_eq!(default_rows(256, 5.0), 40);
    assert_eq!(default_rows(1, 5.0), 1);
    assert_eq!(default_rows(1000, 5.0), 50);
}

#[test]
fn fresh_sketch_is_zero() {
    let s = CountSketch::new(SketchConfig::new(8, 1, 4, 0).unwrap()).unwrap();
    assert_eq!(s.tables(), &[0.0; 4]);
    assert!((0..8).all(|i| s.estimate_coord(i).unwrap() == 0.0));
    assert_eq!(
        s,
        CountSketch::new(SketchConfig::new(8, 1, 4, 0).unwrap()).unwrap()
    );
    assert_eq!(s.measurement_count(), 4);
}

#[test]
fn single_update_lands_once_per_row() {
    let cfg = SketchConfig::new(16, 2, 4, 9).unwrap();
    let mut s = CountSketch::new(cfg).unwrap();
    s.update(3, 2.5).unwrap();
    let fam = HashFamily::new(9, 2, 4).unwrap();
    for r in 0..2 {
        let nz: Vec<(usize, f64)> = s
            .row(r)
            .iter()
            .copied()
            .enumerate()
            .filter(|(_, v)| *v != 0.0)
            .collect();
        let b = fam.bucket_of(r, 3).unwrap();
        assert_eq!(nz, vec![(b, 2.5 * f64::from(fam.sign_of(r, 3).unwrap()))]);
    }
    let before = s.clone();
    s.update(5, 0.0).unwrap();
    assert_eq!(s, before);
    s.update(3, -2.5).unwrap();
    assert!(s.tables().iter().all(|v| *v == 0.0));
}

#[test]
fn update_rejects_bad_input() {
    let mut s = CountSketch::new(SketchConfig::new(16, 2, 4, 9).unwrap()).unwrap();
    assert!(s.update(16, 1.0).is_err());
    assert!(s.update(0, f64::NAN).is_err());
    assert!(s.estimate_coord(99).is_err());
}

#[test]
fn from_vector_of_scaled_basis_vector() {
    let cfg = SketchConfig::new(32, 5, 8, 4).unwrap();
    let x = SignalVector::from_sparse(32, &[(5, 7.0)]).unwrap();
    let a = CountSketch::from_vector(cfg, &x).unwrap();
    let mut b = CountSketch::new(cfg).unwrap();
    b.update(5, 3.0).unwrap();
    b.update(5, 4.0).unwrap();
    assert_eq!(a, b);
    for r in 0..5 {
        assert_eq!(a.row(r).iter().filter(|v| v.abs() == 7.0).count(), 1);
    }
    assert!(CountSketch::from_vector(cfg, &SignalVector::zeros(32))
        .unwrap()
        .tables()
        .iter()
        .all(|v| *v == 0.0));
}

#[test]
fn merge_matches_sketch_of_sum_at_n64() {
    let cfg = SketchConfig::new(64, 7, 8, 11).unwrap();
    let x = integer_vector(64, 1);
    let y = integer_vector(64, 2);
    let merged = CountSketch::merge(
        &CountSketch::from_vector(cfg, &x).unwrap(),
        &CountSketch::from_vector(cfg, &y).unwrap(),
    )
    .unwrap();
    let direct = CountSketch::from_vector(cfg, &x.add(&y).unwrap()).unwrap();
    assert_eq!(merged.estimate_all(), direct.estimate_all());
}

#[test]
fn merge_rejects_mismatched_configs() {
    let a = CountSketch::new(SketchConfig::new(64, 7, 8, 11).unwrap()).unwrap();
    let b = CountSketch::new(SketchConfig::new(64, 7, 8, 12).unwrap()).unwrap();
    assert!(CountSketch::merge(&a, &b).is_err());
}

#[test]
fn estimates_match_straight_line_oracle() {
    for seed in 0..20u64 {
        let n = 256;
        let d = if seed % 2 == 0 {
            default_rows(n, 5.0)
        } else {
            9
        };
        let cfg = SketchConfig::new(n, d, 64, seed).unwrap();
        let x = integer_vector(n, 100 + seed);
        let s = CountSketch::from_vector(cfg, &x).unwrap();
        let table = straight_line_table(&x, d, 64, seed);
        for (r, row) in table.iter().enumerate() {
            assert_eq!(s.row(r), row.as_slice());
        }
        let est = s.estimate_all();
        let fam = HashFamily::new(seed, d, 64).unwrap();
        for i in 0..n {
            assert_eq!(est[i], straight_line_estimate(&table, &fam, i));
            assert_eq!(est[i], s.estimate_coord(i).unwrap());
        }
        let picks = [0usize, 17, 255];
        assert_eq!(
            s.estimate_many(&picks).unwrap(),
            picks.iter().map(|&i| est[i]).collect::<Vec<_>>()
        );
    }
}

#[test]
fn pointwise_guarantee_on_random_signs() {
    let n = 256;
    let d = default_rows(n, 5.0);
    let mut ok = 0;
    for seed in 0..200u64 {
        let x = pm_one_vector(n, seed);
        let s = CountSketch::from_vector(SketchConfig::new(n, d, 64, seed).unwrap(), &x).unwrap();
        let err = s.estimate_all().sub(&x).unwrap().norm_inf();
        let bound = tail_err(&x, 64, Norm::L2).powi(2) / 64.0;
        ok += usize::from(err * err <= bound);
    }
    assert!(ok >= 198, "{ok}/200");
}

#[test]
fn binary_and_json_round_trip() {
    let cfg = SketchConfig::new(300, 6, 10, 77).unwrap();
    let mut g = ChaCha8Rng::seed_from_u64(3);
    let x = SignalVector::new((0..300).map(|_| g.gen::<f64>() - 0.5).collect()).unwrap();
    let s = CountSketch::from_vector(cfg, &x).unwrap();
    let bytes = s.to_bytes();
    assert_eq!(&bytes[..4], b"CSKT");
    assert_eq!(bytes.len(), 40 + 8 * 60);
    let back = CountSketch::from_bytes(&bytes).unwrap();
    assert!(back
        .tables()
        .iter()
        .zip(s.tables())
        .all(|(a, b)| a.to_bits() == b.to_bits()));
    let json = CountSketch::from_json(&s.to_json().unwrap()).unwrap();
    assert!(json
        .tables()
        .iter()
        .zip(s.tables())
        .all(|(a, b)| a.to_bits() == b.to_bits()));
    assert!(CountSketch::from_bytes(&bytes[..bytes.len() - 1]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn linearity_is_bit_exact(
        seed: u64,
        xs in prop::collection::vec(-1_000_000i64..1_000_000, 1..200),
        ys in prop::collection::vec(-1_000_000i64..1_000_000, 1..200),
    ) {
        let n = xs.len().max(ys.len());
        let pad = |v: &[i64]| {
            let mut out: Vec<f64> = v.iter().map(|&a| a as f64).collect();
            out.resize(n, 0.0);
            SignalVector::new(out).unwrap()
        };
        let (x, y) = (pad(&xs), pad(&ys));
        let cfg = SketchConfig::new(n, 5, 13, seed).unwrap();
        let mut a = CountSketch::from_vector(cfg, &x).unwrap();
        a.merge_from(&CountSketch::from_vector(cfg, &y).unwrap()).unwrap();
        let direct = CountSketch::from_vector(cfg, &x.add(&y).unwrap()).unwrap();
        prop_assert_eq!(a.tables(), direct.tables());
        prop_assert_eq!(a.measurement_count(), 65);
    }

    #[test]
    fn update_order_does_not_matter(seed: u64, ups in prop::collection::vec((0usize..50, -1000i32..1000), 0..100)) {
        let cfg = SketchConfig::new(50, 4, 7, seed).unwrap();
        let mut fwd = CountSketch::new(cfg).unwrap();
        let mut rev = CountSketch::new(cfg).unwrap();
        for &(i, v) in &ups {
            fwd.update(i, f64::from(v)).unwrap();
        }
        for &(i, v) in ups.iter().rev() {
            rev.update(i, f64::from(v)).unwrap();
        }
        prop_assert_eq!(fwd.estimate_all(), rev.estimate_all());
    }
}
