use std::collections::BTreeMap;

use proptest::prelude::*;
use saqd::decoder::DecoderKind;
use saqd::experiment::{
    agresti_coull, crossing_threshold, read_results, rescale_threshold, run_sweep, unscale_threshold, DataPoint, ExperimentError,
    RunConfig, Z95,
};
use saqd::lattice::ManifoldKind;

fn config(p: Vec<f64>, trials: u64) -> RunConfig {
    RunConfig {
        manifold: ManifoldKind::Cube,
        d: vec![2],
        l: vec![2],
        p,
        t: vec![2],
        trials,
        validator: DecoderKind::Clustering,
        corrector: DecoderKind::Matching,
        seed: 7,
        out: None,
        z: Z95,
    }
}

fn sweep_bytes(cfg: &RunConfig) -> Vec<u8> {
    let mut out = Vec::new();
    run_sweep(cfg, &mut out, |_| {}).unwrap();
    out
}

fn point(l: usize, p: f64, pfail: f64, half: f64) -> DataPoint {
    DataPoint {
        manifold: ManifoldKind::Cube,
        d: 2,
        l,
        p,
        t: 4,
        validator: DecoderKind::Matching,
        corrector: DecoderKind::Matching,
        trials: 1000,
        failures: 0,
        pfail,
        ci_lo: pfail - half,
        ci_hi: pfail + half,
        seed: 0,
    }
}

fn line_curves(slopes: &[(usize, f64)], grid: &[f64], centre: f64) -> BTreeMap<usize, Vec<DataPoint>> {
    slopes.iter().map(|&(l, a)| (l, grid.iter().map(|&p| point(l, p, a * (p - centre), 0.001)).collect())).collect()
}

#[test]
fn one_point_sweep_writes_header_and_row() {
    let text = String::from_utf8(sweep_bytes(&config(vec![0.01], 50))).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], "manifold,d,L,p,t,validator,corrector,trials,failures,pfail,ci_lo,ci_hi,seed");
    assert!(lines[1].starts_with("cube,2,2,0.01,2,clustering,matching,50,"));
}

#[test]
fn sweeps_are_reproducible_across_worker_counts() {
    let cfg = config(vec![0.02, 0.05], 300);
    let reference = sweep_bytes(&cfg);
    assert_eq!(sweep_bytes(&cfg), reference);
    for workers in [1, 3] {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build().unwrap();
        assert_eq!(pool.install(|| sweep_bytes(&cfg)), reference, "{workers} workers");
    }
    let mut other = cfg.clone();
    other.seed = 8;
    assert_ne!(sweep_bytes(&other), reference);
}

#[test]
fn results_round_trip_through_csv() {
    let cfg = config(vec![0.03], 100);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.csv");
    let rows = run_sweep(&cfg, std::fs::File::create(&path).unwrap(), |_| {}).unwrap();
    assert_eq!(read_results(&path).unwrap(), rows);
}

#[test]
fn zero_noise_never_fails() {
    for kind in ManifoldKind::ALL {
        for d in [2, 3, 16] {
            let mut cfg = config(vec![0.0], 100);
            cfg.manifold = kind;
            cfg.d = vec![d];
            cfg.l = vec![2, 4];
            cfg.corrector = DecoderKind::Clustering;
            let mut rows = Vec::new();
            run_sweep(&cfg, std::io::sink(), |r| rows.push(r.clone())).unwrap();
            assert!(rows.iter().all(|r| r.failures == 0 && r.pfail == 0.0), "{kind} d={d}");
        }
    }
}

#[test]
fn invalid_configs_are_rejected() {
    let mut cfg = config(vec![0.01], 10);
    cfg.d = vec![3];
    assert!(matches!(run_sweep(&cfg, std::io::sink(), |_| {}), Err(ExperimentError::Config(_))));
    let mut cfg = config(vec![1.5], 10);
    assert!(cfg.validate().is_err());
    cfg.p = vec![0.1];
    cfg.trials = 0;
    assert!(cfg.validate().is_err());
}

#[test]
fn straight_lines_cross_at_their_common_root() {
    let grid: Vec<f64> = (0..11).map(|i| 0.005 + 0.001 * i as f64).collect();
    let est = crossing_threshold(&line_curves(&[(4, 10.0), (6, 20.0), (8, 40.0)], &grid, 0.01)).unwrap();
    assert!((est.p_th - 0.01).abs() < 1e-12);
    assert_eq!(est.sizes, (6, 8));
    assert!(est.uncertainty > 0.0);
    let off_grid = line_curves(&[(4, 10.0), (6, 20.0)], &grid, 0.01234);
    assert!((crossing_threshold(&off_grid).unwrap().p_th - 0.01234).abs() < 1e-12);
}

#[test]
fn crossing_needs_two_sizes_and_a_sign_change() {
    let grid = [0.01, 0.02, 0.03];
    let same = line_curves(&[(4, 10.0), (6, 10.0)], &grid, 0.015);
    assert!(matches!(crossing_threshold(&same), Err(ExperimentError::NoCrossing)));
    let apart: BTreeMap<usize, Vec<DataPoint>> =
        [4, 6].iter().map(|&l| (l, grid.iter().map(|&p| point(l, p, p + l as f64, 0.0)).collect())).collect();
    assert!(matches!(crossing_threshold(&apart), Err(ExperimentError::NoCrossing)));
    let single = line_curves(&[(4, 10.0)], &grid, 0.015);
    assert!(matches!(crossing_threshold(&single), Err(ExperimentError::Config(_))));
}

#[test]
fn rescaling_fixed_points() {
    assert_eq!(rescale_threshold(0.0, 16).unwrap(), 0.0);
    assert_eq!(rescale_threshold(0.37, 2).unwrap(), 0.37);
    assert!(matches!(rescale_threshold(0.1, 0), Err(ExperimentError::Config(_))));
    assert!(rescale_threshold(1.0, 4).is_err());
}

proptest! {
    #[test]
    fn interval_brackets_the_estimate(trials in 1u64..100_000, frac in 0.0f64..=1.0) {
        let failures = ((trials as f64) * frac).floor() as u64;
        let (_, lo, hi) = agresti_coull(failures, trials, Z95);
        let p = failures as f64 / trials as f64;
        prop_assert!(0.0 <= lo && lo <= p && p <= hi && hi <= 1.0, "{} {} {} {}", failures, lo, p, hi);
    }

    #[test]
    fn rescaling_round_trips(p in 0.0f64..0.999, d in 2u32..1024) {
        let star = rescale_threshold(p, d).unwrap();
        prop_assert!((0.0..=p).contains(&star));
        prop_assert!((unscale_threshold(star, d).unwrap() - p).abs() <= 1e-12);
    }

    #[test]
    fn crossing_lies_in_the_grid(a in 1.0f64..50.0, b in 1.0f64..50.0, centre in 0.0051f64..0.0149) {
        prop_assume!((a - b).abs() > 0.5);
        let grid: Vec<f64> = (0..11).map(|i| 0.005 + 0.001 * i as f64).collect();
        let est = crossing_threshold(&line_curves(&[(6, a), (8, b)], &grid, centre)).unwrap();
        prop_assert!(est.p_th >= grid[0] && est.p_th <= grid[10]);
        prop_assert!((est.p_th - centre).abs() < 1e-9);
    }
}
