mod common;

use phasebal_milp::{
    export_mps, parse_mps, solve_lp, solve_milp, BoundOverrides, LpStatus, MilpStatus,
    SolveConfig, VarKind, INTEGRALITY_TOL,
};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mps_round_trip(seed in any::<u64>(), nb in 0usize..6, nc in 0usize..6, rows in 0usize..6) {
        prop_assume!(nb + nc > 0);
        let m = common::random_mixed(seed, nb, nc, rows);
        let doc = export_mps(&m);
        prop_assert_eq!(parse_mps(&doc.text, Some(&doc.names)).unwrap(), m.clone());
        // Without the sidecar the structure survives under exported names.
        let bare = parse_mps(&doc.text, None).unwrap();
        prop_assert_eq!(bare.num_vars(), m.num_vars());
        prop_assert_eq!(bare.constraints().iter().map(|c| &c.terms).collect::<Vec<_>>(),
                        m.constraints().iter().map(|c| &c.terms).collect::<Vec<_>>());
    }

    #[test]
    fn lp_solutions_are_feasible(seed in any::<u64>()) {
        let m = common::random_mixed(seed, 3, 4, 5);
        let s = solve_lp(&m, &BoundOverrides::new()).unwrap();
        if s.status == LpStatus::Optimal {
            prop_assert!(m.max_violation(&s.values) <= 1e-8);
            prop_assert!((m.objective_value(&s.values) - s.objective).abs() <= 1e-8);
        }
    }

    #[test]
    fn search_is_deterministic_and_monotone(seed in any::<u64>(), limit in 1usize..40) {
        let m = common::random_mixed(seed, 7, 3, 5);
        let cfg = SolveConfig { node_limit: Some(limit), record_trace: true, gap_tol: 0.0, ..SolveConfig::default() };
        let a = solve_milp(&m, &cfg).unwrap();
        let b = solve_milp(&m, &cfg).unwrap();
        prop_assert_eq!(a.node_count, b.node_count);
        prop_assert_eq!(a.objective, b.objective);
        prop_assert_eq!(&a.values, &b.values);
        prop_assert_eq!(a.status, b.status);

        for w in a.trace.windows(2) {
            prop_assert!(w[1].bound >= w[0].bound - 1e-9);
            if let (Some(x), Some(y)) = (w[0].incumbent, w[1].incumbent) {
                prop_assert!(y <= x);
            }
            prop_assert!(!(w[0].incumbent.is_some() && w[1].incumbent.is_none()));
        }
    }

    #[test]
    fn incumbents_are_feasible_and_integral(seed in any::<u64>()) {
        let m = common::random_mixed(seed, 8, 3, 6);
        let s = solve_milp(&m, &SolveConfig::default()).unwrap();
        if let Some(obj) = s.objective {
            prop_assert!(m.max_violation(&s.values) <= 1e-8);
            for (v, x) in m.variables().iter().zip(&s.values) {
                if v.kind == VarKind::Binary {
                    prop_assert!(*x == 0.0 || *x == 1.0);
                    prop_assert!((x - x.round()).abs() <= INTEGRALITY_TOL);
                }
            }
            prop_assert!((m.objective_value(&s.values) - obj).abs() <= 1e-9);
            if s.status == MilpStatus::OptimalWithinGap {
                prop_assert!(s.gap <= SolveConfig::default().gap_tol);
            }
        }
    }
}
