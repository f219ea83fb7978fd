mod common;

use common::*;
use phasebal_core::ingest::rho_schedule;
use phasebal_core::model::{LoadProfile, LookAheadConfig, PhaseAssignment};
use phasebal_core::report::swap_histogram;
use phasebal_core::simulate::{run_rolling, FnForecaster, Perfect, RollingConfig};
use phasebal_core::Result;
use phasebal_milp::SolveConfig;
use rand::Rng;

fn integer_profile(seed: u64, n: usize, t: usize) -> (LoadProfile, Vec<Vec<i64>>) {
    let mut r = rng(seed);
    let d: Vec<Vec<i64>> = (0..t).map(|_| (0..n).map(|_| r.gen_range(1..25)).collect()).collect();
    let series = (0..n).map(|i| d.iter().map(|s| s[i] as f64).collect()).collect();
    (LoadProfile::from_series(series).unwrap(), d)
}

fn config(initial: PhaseAssignment, t1: usize, t2: usize, lambda: f64, s: usize) -> LookAheadConfig {
    let mut la = LookAheadConfig::new(initial);
    la.t1 = t1;
    la.t2 = t2;
    la.lambda = lambda;
    la.swap_budget = s;
    la
}

/// One committed snapshot, no advisory weight, no uncertainty and an unlimited
/// budget: every implemented snapshot is balanced optimally.
#[test]
fn perfect_forecast_reaches_per_snapshot_optimum() {
    let n = 5;
    let (realized, d) = integer_profile(21, n, 9);
    let la = config(PhaseAssignment::packed(&[1; 5]), 1, 2, 0.0, n);
    let mut cfg = RollingConfig::new(la, vec![0.0, 0.0], 0, 8);
    cfg.solver = SolveConfig::exact();
    let run = run_rolling(&realized, &Perfect, &cfg).unwrap();
    assert!(run.halted.is_none());
    let all = all_assignments(&[1; 5]);
    for rec in run.snapshots() {
        let best = all.iter().map(|a| single_phase_x3(a, &d[rec.snapshot])).min().unwrap() as f64 / 3.0;
        assert!((rec.metrics.nu - best).abs() < 1e-6, "snapshot {}: {} vs {best}", rec.snapshot, rec.metrics.nu);
        assert!(rec.contained);
        assert!((rec.certified_u - best).abs() < 1e-6);
    }
}

#[test]
fn zero_budget_never_swaps() {
    let n = 4;
    let (realized, _) = integer_profile(22, n, 12);
    let initial = all_assignments(&[1; 4])[17].clone();
    let la = config(initial.clone(), 2, 4, 0.5, 0);
    let cfg = RollingConfig::new(la, rho_schedule(2, 4, 0.1, 0.3), 0, 4);
    let run = run_rolling(&realized, &Perfect, &cfg).unwrap();
    assert_eq!(run.total_swaps, 0);
    for (_, a) in run.timeline() {
        assert_eq!(*a, initial);
    }
    assert!(swap_histogram(&run).iter().all(|(_, c)| *c == 0));
}

#[test]
fn epochs_chain_and_respect_budget() {
    let n = 4;
    let (realized, _) = integer_profile(23, n, 10);
    for s in 0..=2 {
        let la = config(PhaseAssignment::packed(&[1; 4]), 2, 4, 1.0 / 3.0, s);
        let cfg = RollingConfig::new(la, rho_schedule(2, 4, 0.1, 0.3), 0, 3);
        let run = run_rolling(&realized, &Perfect, &cfg).unwrap();
        assert_eq!(run.epochs.len(), 3);
        let mut prev = cfg.lookahead.initial_assignment.clone();
        let mut total = 0;
        for e in &run.epochs {
            assert_eq!(e.initial_assignment, prev);
            assert_eq!(e.start_snapshot, 2 * e.epoch_index);
            let implemented = &e.plan.assignments[..e.snapshots.len()];
            let swaps = plan_swaps(&prev, implemented);
            assert_eq!(swaps, e.implemented_swaps.len());
            assert!(swaps <= s);
            total += swaps;
            prev = e.terminal().clone();
        }
        assert_eq!(run.total_swaps, total);
        let hist: usize = swap_histogram(&run).iter().map(|(_, c)| c).sum();
        assert_eq!(hist, total);
    }
}

/// Forecasts off by at most 5 % inside 10 % boxes: every snapshot is
/// contained, so its realized deviation is within the certified bound.
#[test]
fn contained_snapshots_respect_certified_bound() {
    for seed in 0..4u64 {
        let n = 5;
        let (realized, _) = integer_profile(30 + seed, n, 12);
        let noisy = FnForecaster {
            name: "noisy".into(),
            f: move |p: &LoadProfile, start: usize, horizon: usize| -> Result<Vec<Vec<f64>>> {
                let mut r = rng(seed * 1000 + start as u64);
                Ok((start..start + horizon)
                    .map(|t| p.snapshot(t).iter().map(|x| x * (1.0 + r.gen_range(-0.05..0.05))).collect())
                    .collect())
            },
        };
        let la = config(PhaseAssignment::packed(&[1; 5]), 2, 4, 1.0 / 3.0, 1);
        let cfg = RollingConfig::new(la, vec![0.1; 4], 0, 4);
        let run = run_rolling(&realized, &noisy, &cfg).unwrap();
        for rec in run.snapshots() {
            assert!(rec.contained, "seed {seed} snapshot {}", rec.snapshot);
            assert!(rec.metrics.nu <= rec.certified_u + 1e-6, "seed {seed} snapshot {}", rec.snapshot);
        }
    }
}

#[test]
fn rejects_a_horizon_past_the_data() {
    let (realized, _) = integer_profile(24, 3, 6);
    let la = config(PhaseAssignment::packed(&[1; 3]), 2, 4, 0.0, 1);
    let cfg = RollingConfig::new(la, vec![0.1; 4], 0, 3);
    assert!(run_rolling(&realized, &Perfect, &cfg).is_err());
}
