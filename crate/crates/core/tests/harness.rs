use sparselab::harness::{
    aggregate_trials, emit_report, evaluate_recovery, nearest_rank, run_experiment, run_trial,
    wilson_interval, ExperimentConfig, ExperimentReport, ReportFormat, Scheme, TrialParams,
    CSV_COLUMNS, SCHEMA_VERSION,
};
use sparselab::instances::{generate, InstanceKind, InstanceSpec};
use sparselab::recovery::{RecoveryOutput, RecoveryParams};
use sparselab::SignalVector;

fn output_with(estimate: SignalVector) -> RecoveryOutput {
    RecoveryOutput {
        support: estimate.nonzeros().into_iter().map(|(i, _)| i).collect(),
        estimate,
        per_level: Vec::new(),
        total_measurements: 0,
        seed: 0,
        params: RecoveryParams::TopT {
            selected: 0,
            d: 1,
            w: 1,
        },
    }
}

fn config(schemes: Vec<Scheme>, trials: usize, seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        schemes,
        ns: vec![1024],
        ks: vec![4],
        epsilons: vec![0.25],
        instance: InstanceKind::SpikeFlatZipf {
            f: 0.5,
            c_exponent: 1.0,
            zipf_exponent: 1.0,
            zipf_scale: 1.0,
        },
        f_from_epsilon: true,
        permute: false,
        trials,
        master_seed: seed,
        c1: 5.0,
        c3: 1.0,
    }
}

#[test]
fn identity_scheme_on_exact_sparse() {
    let spec = InstanceSpec {
        n: 128,
        k: 3,
        kind: InstanceKind::ExactSparse { value_scale: 10.0 },
        permute: false,
    };
    let inst = generate(&spec, 5).unwrap();
    let report = evaluate_recovery(
        &inst,
        Scheme::L2Top2k,
        &TrialParams::new(3, 0.25),
        &output_with(inst.signal.clone()),
    )
    .unwrap();
    assert_eq!(report.ratio, 0.0);
    assert!(report.zero_benchmark);
    assert!(report.success);
}

#[test]
fn null_scheme_on_spike_flat() {
    let spec = InstanceSpec {
        n: 512,
        k: 1,
        kind: InstanceKind::SpikeFlat {
            f: 0.5,
            c_exponent: 1.0,
        },
        permute: false,
    };
    let inst = generate(&spec, 1).unwrap();
    let report = evaluate_recovery(
        &inst,
        Scheme::L1Multiscale,
        &TrialParams::new(1, 0.25),
        &output_with(SignalVector::zeros(512)),
    )
    .unwrap();
    assert_eq!(report.benchmark, 4.0);
    assert_eq!(report.error, 516.0);
    assert_eq!(report.ratio, 129.0);
    assert!(!report.success);
}

#[test]
fn trial_mismatch_is_a_config_error() {
    let spec = InstanceSpec {
        n: 512,
        k: 2,
        kind: InstanceKind::ExactSparse { value_scale: 2.0 },
        permute: false,
    };
    assert!(run_trial(&spec, Scheme::L2Top2k, &TrialParams::new(3, 0.25), 0).is_err());
    assert!(run_trial(&spec, Scheme::L2Top2k, &TrialParams::new(2, 1.5), 0).is_err());
    assert!("l3_magic".parse::<Scheme>().is_err());
}

#[test]
fn single_trial_aggregate() {
    let report = run_experiment(&config(vec![Scheme::L2Top2k], 1, 3), None).unwrap();
    assert_eq!(report.trials.len(), 1);
    let (t, g) = (&report.trials[0], &report.aggregates[0]);
    assert_eq!(g.trials, 1);
    assert_eq!(g.successes, usize::from(t.success));
    assert_eq!(g.ratio_p50, t.ratio);
    assert_eq!(g.ratio_p99, t.ratio);
    assert_eq!(g.mean_measurements, t.measurements as f64);
}

#[test]
fn hundred_trials_are_counted() {
    let report = run_experiment(
        &config(vec![Scheme::L2Top2k, Scheme::L1Multiscale], 100, 11),
        Some(3),
    )
    .unwrap();
    assert_eq!(report.schema, SCHEMA_VERSION);
    assert_eq!(report.trials.len(), 200);
    assert_eq!(report.aggregates.len(), 2);
    for g in &report.aggregates {
        let mine: Vec<_> = report
            .trials
            .iter()
            .filter(|t| t.scheme == g.scheme)
            .collect();
        assert_eq!(g.trials, 100);
        assert_eq!(g.successes, mine.iter().filter(|t| t.success).count());
        assert_eq!(g.success_rate, g.successes as f64 / 100.0);
        assert_eq!(
            (g.wilson_low, g.wilson_high),
            wilson_interval(g.successes, 100)
        );
    }
    assert_eq!(aggregate_trials(&report.trials), report.aggregates);
}

#[test]
fn schemes_share_instances() {
    let report =
        run_experiment(&config(vec![Scheme::L2Top2k, Scheme::L2Topk], 5, 2), None).unwrap();
    let (a, b) = report.trials.split_at(5);
    for (x, y) in a.iter().zip(b) {
        assert_eq!(x.instance_seed, y.instance_seed);
        assert_eq!(x.recovery_seed, y.recovery_seed);
    }
}

#[test]
fn reports_are_deterministic_across_worker_counts() {
    let cfg = config(vec![Scheme::L2Topk, Scheme::CsPointwise], 20, 99);
    let a = run_experiment(&cfg, Some(1)).unwrap().masked_wall_time();
    let b = run_experiment(&cfg, Some(4)).unwrap().masked_wall_time();
    assert_eq!(a, b);
    assert_eq!(
        emit_report(&a, ReportFormat::Csv).unwrap(),
        emit_report(&b, ReportFormat::Csv).unwrap()
    );
}

#[test]
fn l2_top2k_default_grid_meets_target() {
    let mut cfg = config(vec![Scheme::L2Top2k], 100, 7);
    cfg.ns = vec![4096];
    cfg.ks = vec![10];
    let report = run_experiment(&cfg, None).unwrap();
    assert!(
        report.aggregates[0].success_rate >= 0.95,
        "{:?}",
        report.aggregates[0]
    );
}

#[test]
fn csv_and_json_output() {
    let report = run_experiment(&config(vec![Scheme::L2Top2k], 3, 1), None)
        .unwrap()
        .masked_wall_time();
    let csv = String::from_utf8(emit_report(&report, ReportFormat::Csv).unwrap()).unwrap();
    let lines: Vec<&str> = csv.split_terminator('\n').collect();
    assert_eq!(lines[0], CSV_COLUMNS.join(","));
    assert_eq!(lines.len(), 4);
    assert!(!csv.contains('\r'));
    assert!(lines[1].starts_with("l2_top2k,1024,4,0.25,spike_flat_zipf,"));
    assert!(lines[1].ends_with(",0"));
    let json = emit_report(&report, ReportFormat::Json).unwrap();
    assert_eq!(ExperimentReport::from_json(&json).unwrap(), report);

    let empty = ExperimentReport {
        trials: Vec::new(),
        aggregates: Vec::new(),
        ..report
    };
    assert_eq!(
        emit_report(&empty, ReportFormat::Csv).unwrap(),
        format!("{}\n", CSV_COLUMNS.join(",")).into_bytes()
    );
}

#[test]
fn wilson_and_quantiles() {
    let (lo, hi) = wilson_interval(95, 100);
    // Published value for 95/100 at 95% confidence.
    assert!(
        (lo - 0.8882).abs() < 5e-4 && (hi - 0.9785).abs() < 5e-4,
        "{lo} {hi}"
    );
    assert_eq!(wilson_interval(0, 0), (0.0, 1.0));
    let (lo, hi) = wilson_interval(10, 10);
    assert!(
        (lo - 0.7225).abs() < 5e-4 && (hi - 1.0).abs() < 1e-12,
        "{lo} {hi}"
    );

    let v: Vec<f64> = (1..=10).map(f64::from).collect();
    assert_eq!(nearest_rank(&v, 0.5), 5.0);
    assert_eq!(nearest_rank(&v, 0.9), 9.0);
    assert_eq!(nearest_rank(&v, 0.99), 10.0);
    assert_eq!(nearest_rank(&v, 0.0), 1.0);
}
