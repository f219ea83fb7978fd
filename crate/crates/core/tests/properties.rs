mod common;

use chrono::NaiveDate;
use common::*;
use phasebal_core::formulation::{BuildOptions, ImbalanceObjective};
use phasebal_core::heuristic::{box_worst_imbalance, greedy_lookahead, lookahead_objective};
use phasebal_core::ingest::{
    aggregate, checksum, estimate_box, random_scale, read_csv, write_csv, CsvLayout, LoadDataset,
};
use phasebal_core::model::{BoxUncertaintySet, LoadProfile, LookAheadConfig, PhaseAssignment, PhaseSet, UncertaintySet};
use phasebal_core::report::{sorted_curve, summarize};
use phasebal_core::simulate::evaluate_assignment;
use phasebal_core::solve::{solve_deterministic, solve_robust};
use phasebal_milp::SolveConfig;
use proptest::prelude::*;

fn matrix(max_loads: usize, max_days: usize, per_day: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    (1..=max_loads, 1..=max_days).prop_flat_map(move |(n, days)| {
        prop::collection::vec(prop::collection::vec(0.0..500.0f64, days * per_day), n)
    })
}

fn dataset(series: Vec<Vec<f64>>, snapshot_hours: u32) -> LoadDataset {
    let start = NaiveDate::from_ymd_opt(2024, 3, 1).unwrap().and_hms_opt(0, 0, 0).unwrap();
    LoadDataset::new(LoadProfile::from_series(series).unwrap(), start, snapshot_hours, "test").unwrap()
}

/// Assignment drawn from per-load indices into the allowed phase sets.
fn pick(widths: &[u8], idx: &[usize]) -> PhaseAssignment {
    let sets: Vec<PhaseSet> = widths
        .iter()
        .zip(idx)
        .map(|(&w, &k)| {
            let c = PhaseSet::of_width(w);
            c[k % c.len()]
        })
        .collect();
    PhaseAssignment::from_sets(&sets)
}

fn instance(max_n: usize) -> impl Strategy<Value = (Vec<u8>, Vec<usize>, Vec<f64>)> {
    (1..=max_n).prop_flat_map(|n| {
        (
            prop::collection::vec(prop::sample::select(vec![1u8, 1, 1, 2, 3]), n),
            prop::collection::vec(0..3usize, n),
            prop::collection::vec(0.0..100.0f64, n),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn csv_round_trip_is_lossless(series in matrix(4, 3, 24), long in any::<bool>()) {
        let ds = dataset(series, 1);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("loads.csv");
        let layout = if long { CsvLayout::Long } else { CsvLayout::Wide };
        write_csv(&ds, &path, layout).unwrap();
        let back = read_csv(&path, layout).unwrap();
        prop_assert_eq!(&back.profile, &ds.profile);
        prop_assert_eq!(back.start, ds.start);
        prop_assert_eq!(checksum(&back.profile), ds.meta.checksum.clone());
    }

    #[test]
    fn slot_box_contains_every_day(series in matrix(4, 5, 4), slot in 0..4usize) {
        prop_assume!(series[0].len() >= 8);
        let ds = dataset(series, 6);
        let b = estimate_box(&ds, slot).unwrap();
        for d in 0..ds.n_days() {
            prop_assert!(b.contains(&ds.profile.snapshot(d * 4 + slot), 1e-9));
        }
    }

    #[test]
    fn scaling_keeps_each_load_proportional(series in matrix(4, 2, 24), seed in any::<u64>()) {
        let ds = dataset(series, 1);
        let scaled = random_scale(&ds, seed, (0.8, 1.2)).unwrap();
        for i in 0..ds.profile.n_loads() {
            let factor = (0..ds.profile.n_snapshots())
                .find(|&t| ds.profile.demand(i, t) > 1e-9)
                .map(|t| scaled.profile.demand(i, t) / ds.profile.demand(i, t));
            if let Some(f) = factor {
                prop_assert!((0.8..=1.2).contains(&f));
                for t in 0..ds.profile.n_snapshots() {
                    let expect = f * ds.profile.demand(i, t);
                    prop_assert!((scaled.profile.demand(i, t) - expect).abs() <= 1e-9 * expect.max(1.0));
                }
            }
        }
        prop_assert_eq!(random_scale(&ds, seed, (0.8, 1.2)).unwrap(), scaled);
    }

    #[test]
    fn aggregation_preserves_daily_energy(series in matrix(3, 2, 24)) {
        let ds = dataset(series, 1);
        let agg = aggregate(&ds, 2).unwrap();
        for i in 0..ds.profile.n_loads() {
            let a: f64 = ds.profile.series(i).iter().sum();
            let b: f64 = agg.profile.series(i).iter().sum::<f64>() * 2.0;
            prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0));
        }
    }

    #[test]
    fn deviation_metrics_are_sandwiched((widths, idx, d) in instance(8)) {
        let a = pick(&widths, &idx);
        let m = evaluate_assignment(&a, &d, &widths).unwrap();
        prop_assert!(m.nu <= m.omega + 1e-9);
        prop_assert!(m.omega <= 2.0 * m.nu + 1e-9);
        let total: f64 = d.iter().zip(&widths).map(|(&x, &w)| x * w as f64).sum();
        prop_assert!((m.phase_sums.iter().sum::<f64>() - total).abs() <= 1e-9 * total.max(1.0));
        match m.upsilon {
            Some(u) => prop_assert!((u * total / 3.0 - m.nu).abs() <= 1e-9 * total.max(1.0)),
            None => prop_assert!(total == 0.0),
        }
    }

    #[test]
    fn merged_stats_match_the_whole(
        xs in prop::collection::vec(-1e3..1e3f64, 1..60),
        ys in prop::collection::vec(-1e3..1e3f64, 1..60),
    ) {
        let all: Vec<f64> = xs.iter().chain(&ys).copied().collect();
        let whole = summarize(&all).unwrap();
        let merged = summarize(&xs).unwrap().merge(&summarize(&ys).unwrap());
        // Two-pass reference.
        let n = all.len() as f64;
        let mean = all.iter().sum::<f64>() / n;
        let std = (all.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
        for s in [whole, merged] {
            prop_assert_eq!(s.n, all.len());
            prop_assert!((s.avg - mean).abs() <= 1e-12 * 1e3);
            prop_assert!((s.std - std).abs() <= 1e-12 * 1e3);
            prop_assert_eq!(s.max, all.iter().copied().fold(f64::MIN, f64::max));
        }
    }

    #[test]
    fn curve_is_a_descending_permutation(xs in prop::collection::vec(0.0..100.0f64, 0..50)) {
        let c = sorted_curve(&xs);
        prop_assert!(c.windows(2).all(|w| w[0] >= w[1]));
        let mut a = xs.clone();
        let mut b = c.clone();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn greedy_plan_stays_within_budget(
        (widths, idx, _) in instance(6),
        s in 0..4usize,
        centers in prop::collection::vec(prop::collection::vec(1.0..50.0f64, 6), 5),
    ) {
        let n = widths.len();
        let initial = pick(&widths, &idx);
        let mut cfg = LookAheadConfig::new(initial.clone());
        cfg.t1 = 3;
        cfg.t2 = 5;
        cfg.swap_budget = s;
        let sets: Vec<BoxUncertaintySet> = centers
            .iter()
            .map(|c| BoxUncertaintySet::relative(c[..n].to_vec(), 0.2).unwrap())
            .collect();
        let plan = greedy_lookahead(&cfg, &widths, &sets);
        prop_assert_eq!(plan.len(), 3);
        prop_assert!(plan_swaps(&initial, &plan) <= s);
        for a in &plan {
            prop_assert!(a.validate(&widths).is_ok());
        }
        // Never worse than standing still.
        let bounds: Vec<(Vec<f64>, Vec<f64>)> = sets.iter().map(|b| (b.lower(), b.upper())).collect();
        let (greedy, _) = lookahead_objective(&plan, &widths, &bounds, cfg.lambda);
        let (idle, _) = lookahead_objective(&vec![initial; 3], &widths, &bounds, cfg.lambda);
        prop_assert!(greedy <= idle + 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// The robust optimum bounds the deviation at every vertex of the box
    /// and is attained at one of them.
    #[test]
    fn robust_bound_is_tight_on_the_box((widths, _, center) in instance(5), rho in 0.0..0.5f64) {
        let set = BoxUncertaintySet::relative(center, rho).unwrap();
        let n = widths.len();
        let p = LoadProfile::from_snapshot(&vec![1.0; n]).unwrap().with_widths(widths.clone()).unwrap();
        let s = solve_robust(&p, &UncertaintySet::Box(set.clone()), BuildOptions::default(), &SolveConfig::exact()).unwrap();
        let v = vertex_worst(&s.assignment, &widths, &set.lower(), &set.upper());
        prop_assert!((v - s.objective).abs() < 1e-6);
        prop_assert!((box_worst_imbalance(&s.assignment, &widths, &set.lower(), &set.upper()) - v).abs() < 1e-9);
    }

    #[test]
    fn deterministic_beats_every_assignment((widths, idx, d) in instance(6)) {
        let n = widths.len();
        let p = LoadProfile::from_snapshot(&vec![1.0; n]).unwrap().with_widths(widths.clone()).unwrap();
        let s = solve_deterministic(&p, &d, ImbalanceObjective::SinglePhase, BuildOptions::default(), &SolveConfig::exact())
            .unwrap();
        let other = pick(&widths, &idx);
        prop_assert!(s.objective <= nu(&other, &d, &widths) + 1e-6);
        prop_assert!((nu(&s.assignment, &d, &widths) - s.objective).abs() < 1e-6);
    }
}
