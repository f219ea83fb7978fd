//! Solver results against brute-force enumeration on small instances.

mod common;

use common::*;
use phasebal_core::formulation::{build_robust, BuildOptions, ImbalanceObjective};
use phasebal_core::model::{
    BoxUncertaintySet, LoadProfile, LookAheadConfig, PhaseAssignment, PolyhedralSet, UncertaintySet,
};
use phasebal_core::solve::{solve_deterministic, solve_lookahead, solve_robust};
use phasebal_milp::{solve_lp, BoundOverrides, SolveConfig};
use rand::Rng;

const TOL: f64 = 1e-6;

fn profile(n: usize, widths: &[u8]) -> LoadProfile {
    LoadProfile::from_snapshot(&vec![1.0; n]).unwrap().with_widths(widths.to_vec()).unwrap()
}

#[test]
fn deterministic_matches_enumeration() {
    let mut r = rng(11);
    for case in 0..40 {
        let n = r.gen_range(2..=7);
        let widths = random_widths(&mut r, n, case % 2 == 1);
        let d: Vec<i64> = (0..n).map(|_| r.gen_range(0..30)).collect();
        let df: Vec<f64> = d.iter().map(|&x| x as f64).collect();
        let all = all_assignments(&widths);
        let p = profile(n, &widths);
        for anchor in [false, true] {
            let options = BuildOptions { anchor };

            let best = all.iter().map(|a| single_phase_x3(a, &d)).min().unwrap();
            let s = solve_deterministic(&p, &df, ImbalanceObjective::SinglePhase, options, &SolveConfig::exact())
                .unwrap();
            assert_eq!(single_phase_x3(&s.assignment, &d), best, "case {case} anchor {anchor}");
            assert!((s.objective - best as f64 / 3.0).abs() < TOL, "case {case}: {} vs {best}/3", s.objective);
            s.assignment.validate(&widths).unwrap();
            if anchor {
                assert!(s.assignment.a[0]);
            }

            let best = all.iter().map(|a| pairwise(a, &d)).min().unwrap();
            let s = solve_deterministic(&p, &df, ImbalanceObjective::Pairwise, options, &SolveConfig::exact())
                .unwrap();
            assert_eq!(pairwise(&s.assignment, &d), best, "pairwise case {case}");
            assert!((s.objective - best as f64).abs() < TOL);
        }
    }
}

#[test]
fn robust_box_matches_vertex_enumeration() {
    let mut r = rng(12);
    for case in 0..25 {
        let n = r.gen_range(2..=5);
        let widths = random_widths(&mut r, n, case % 3 == 2);
        let (center, half) = random_box(&mut r, n);
        let set = BoxUncertaintySet::absolute(center, half).unwrap();
        let (lo, hi) = (set.lower(), set.upper());
        let best = all_assignments(&widths)
            .iter()
            .map(|a| vertex_worst(a, &widths, &lo, &hi))
            .fold(f64::INFINITY, f64::min);
        let s = solve_robust(
            &profile(n, &widths),
            &UncertaintySet::Box(set),
            BuildOptions::default(),
            &SolveConfig::exact(),
        )
        .unwrap();
        assert!((s.objective - best).abs() < TOL, "case {case}: {} vs {best}", s.objective);
        let achieved = vertex_worst(&s.assignment, &widths, &lo, &hi);
        assert!((achieved - best).abs() < TOL, "case {case}: returned assignment scores {achieved}");
    }
}

#[test]
fn zero_width_box_reduces_to_deterministic() {
    let mut r = rng(13);
    for case in 0..15 {
        let n = r.gen_range(2..=7);
        let d: Vec<f64> = (0..n).map(|_| r.gen_range(0..30) as f64).collect();
        let p = LoadProfile::from_snapshot(&d).unwrap();
        let det = solve_deterministic(&p, &d, ImbalanceObjective::SinglePhase, BuildOptions::default(), &SolveConfig::exact())
            .unwrap();
        let set = UncertaintySet::Box(BoxUncertaintySet::singleton(d.clone()).unwrap());
        let rob = solve_robust(&p, &set, BuildOptions::default(), &SolveConfig::exact()).unwrap();
        assert!((det.objective - rob.objective).abs() < TOL, "case {case}");
    }
}

fn fixed(f: &phasebal_core::formulation::Formulation, a: &PhaseAssignment) -> BoundOverrides {
    let mut o = BoundOverrides::new();
    for (v, x) in f.start(a) {
        o.fix(v, x);
    }
    o
}

/// With the assignment fixed, the certificate LP gives the worst case. Checked
/// against the primal support LP of each direction and, for boxes, against
/// the vertices.
#[test]
fn dual_certificate_matches_primal_worst_case() {
    let mut r = rng(14);
    for case in 0..20 {
        let n = r.gen_range(2..=5);
        let widths = random_widths(&mut r, n, case % 2 == 1);
        let (center, half) = random_box(&mut r, n);
        let boxed = BoxUncertaintySet::absolute(center.clone(), half.clone()).unwrap();
        let mut poly = phasebal_core::model::box_to_polyhedron(&boxed);
        // A budget cut on the total upward deviation keeps the set polyhedral
        // but no longer a box.
        let budget: f64 = half.iter().sum::<f64>() * r.gen_range(0.3..0.9);
        let mut rows = poly.rows().to_vec();
        let mut rhs = poly.rhs().to_vec();
        rows.push(vec![1.0; n]);
        rhs.push(center.iter().sum::<f64>() + budget);
        poly = PolyhedralSet::new(rows, rhs).unwrap();

        let p = profile(n, &widths);
        let all = all_assignments(&widths);
        let a = &all[r.gen_range(0..all.len())];

        for set in [UncertaintySet::Box(boxed.clone()), UncertaintySet::Polyhedral(poly.clone())] {
            let f = build_robust(&p, &set, BuildOptions::default()).unwrap();
            let lp = solve_lp(&f.instance, &fixed(&f, a)).unwrap();
            assert!(lp.is_optimal());
            let poly = set.to_polyhedron();
            let mut primal: f64 = 0.0;
            for ph in 0..3 {
                let on = [&a.a, &a.b, &a.c][ph];
                for sign in [1.0, -1.0] {
                    let x: Vec<f64> =
                        (0..n).map(|i| sign * (on[i] as u8 as f64 - widths[i] as f64 / 3.0)).collect();
                    primal = primal.max(poly.support(&x).unwrap());
                }
            }
            assert!((lp.objective - primal).abs() < TOL, "case {case}: dual {} primal {primal}", lp.objective);
            if let UncertaintySet::Box(b) = &set {
                let v = vertex_worst(a, &widths, &b.lower(), &b.upper());
                assert!((lp.objective - v).abs() < TOL, "case {case}: dual {} vertices {v}", lp.objective);
            }
        }
    }
}

/// Exhaustive look-ahead search over every pair of committed assignments.
fn lookahead_oracle(config: &LookAheadConfig, widths: &[u8], sets: &[BoxUncertaintySet]) -> f64 {
    assert_eq!(config.t1, 2);
    let all = all_assignments(widths);
    let worst: Vec<Vec<f64>> = sets
        .iter()
        .map(|s| all.iter().map(|a| vertex_worst(a, widths, &s.lower(), &s.upper())).collect())
        .collect();
    let mut best = f64::INFINITY;
    for (i, a1) in all.iter().enumerate() {
        for (j, a2) in all.iter().enumerate() {
            if plan_swaps(&config.initial_assignment, &[a1.clone(), a2.clone()]) > config.swap_budget {
                continue;
            }
            let u = worst[0][i].max(worst[1][j]);
            let v = worst[2..].iter().map(|w| w[j]).fold(0.0, f64::max);
            best = best.min(u + config.lambda * v);
        }
    }
    best
}

#[test]
fn lookahead_matches_enumeration() {
    let mut r = rng(15);
    for case in 0..8 {
        let n = 4;
        let widths = random_widths(&mut r, n, case % 2 == 1);
        let sets: Vec<BoxUncertaintySet> = (0..4)
            .map(|_| {
                let (c, h) = random_box(&mut r, n);
                BoxUncertaintySet::absolute(c, h).unwrap()
            })
            .collect();
        let all = all_assignments(&widths);
        let initial = all[r.gen_range(0..all.len())].clone();
        let p = profile(n, &widths);
        let usets: Vec<UncertaintySet> = sets.iter().cloned().map(UncertaintySet::Box).collect();
        for s in 0..=2 {
            let mut config = LookAheadConfig::new(initial.clone());
            config.t1 = 2;
            config.t2 = 4;
            config.lambda = r.gen_range(0.0..1.0);
            config.swap_budget = s;
            let expect = lookahead_oracle(&config, &widths, &sets);
            let sol = solve_lookahead(&p, &usets, &config, &SolveConfig::exact()).unwrap();
            let plan = &sol.plan;
            assert!((plan.objective - expect).abs() < TOL, "case {case} s {s}: {} vs {expect}", plan.objective);
            assert!(plan_swaps(&initial, &plan.assignments) <= s);
            assert_eq!(plan.total_swaps(), plan_swaps(&initial, &plan.assignments));
            // Re-score the returned plan independently.
            let u = (0..2)
                .map(|t| vertex_worst(&plan.assignments[t], &widths, &sets[t].lower(), &sets[t].upper()))
                .fold(0.0, f64::max);
            let v = (2..4)
                .map(|t| vertex_worst(&plan.assignments[1], &widths, &sets[t].lower(), &sets[t].upper()))
                .fold(0.0, f64::max);
            assert!((u + config.lambda * v - expect).abs() < TOL, "case {case} s {s}");
        }
    }
}

#[test]
fn larger_budget_never_hurts() {
    let mut r = rng(16);
    for case in 0..5 {
        let n = 4;
        let widths = vec![1; n];
        let sets: Vec<BoxUncertaintySet> = (0..4)
            .map(|_| {
                let (c, h) = random_box(&mut r, n);
                BoxUncertaintySet::absolute(c, h).unwrap()
            })
            .collect();
        let usets: Vec<UncertaintySet> = sets.iter().cloned().map(UncertaintySet::Box).collect();
        let initial = PhaseAssignment::packed(&widths);
        let mut prev = f64::INFINITY;
        for s in 0..=3 {
            let mut config = LookAheadConfig::new(initial.clone());
            config.t1 = 2;
            config.t2 = 4;
            config.swap_budget = s;
            let sol = solve_lookahead(&profile(n, &widths), &usets, &config, &SolveConfig::exact()).unwrap();
            assert!(sol.plan.objective <= prev + TOL, "case {case} s {s}");
            prev = sol.plan.objective;
        }
    }
}
