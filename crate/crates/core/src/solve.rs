//! Build, seed, solve and decode in one call.

use phasebal_milp::{solve_milp, MilpSolution, MilpStatus, SolveConfig};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::formulation::{
    build_deterministic, build_lookahead, build_robust, extract_plan, BuildOptions, Formulation, ImbalanceObjective,
};
use crate::heuristic::{greedy_lookahead, static_start};
use crate::model::{BalancePlan, BoxUncertaintySet, LoadProfile, LookAheadConfig, PhaseAssignment, UncertaintySet};

/// Solver outcome without the raw variable values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub status: MilpStatus,
    pub gap: f64,
    pub best_bound: f64,
    pub node_count: usize,
    pub lp_iterations: usize,
    #[serde(skip)]
    pub solve_seconds: f64,
}

impl SolveStats {
    fn of(solution: &MilpSolution) -> Self {
        Self {
            status: solution.status,
            gap: solution.gap,
            best_bound: solution.best_bound,
            node_count: solution.node_count,
            lp_iterations: solution.lp_iterations,
            solve_seconds: solution.solve_seconds,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaticSolution {
    pub assignment: PhaseAssignment,
    /// Objective value: the (worst-case) imbalance of `assignment`.
    pub objective: f64,
    pub stats: SolveStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LookAheadSolution {
    pub plan: BalancePlan,
    pub stats: SolveStats,
}

fn with_start(config: &SolveConfig, start: Vec<(phasebal_milp::VarId, f64)>) -> SolveConfig {
    let mut cfg = config.clone();
    if cfg.start.is_none() {
        cfg.start = Some(start);
    }
    cfg
}

fn finish_static(f: &Formulation, solution: MilpSolution) -> Result<StaticSolution> {
    let assignment = f.assignment(&solution)?;
    Ok(StaticSolution {
        assignment,
        objective: solution.objective.unwrap_or(f64::NAN),
        stats: SolveStats::of(&solution),
    })
}

/// Deterministic balancing of demand `d`.
pub fn solve_deterministic(
    profile: &LoadProfile,
    d: &[f64],
    objective: ImbalanceObjective,
    options: BuildOptions,
    config: &SolveConfig,
) -> Result<StaticSolution> {
    let f = build_deterministic(profile, d, objective, options)?;
    let start = static_start(profile.phase_width(), d, d, objective);
    let cfg = with_start(config, f.start(&anchored(start, options)));
    let solution = solve_milp(&f.instance, &cfg)?;
    finish_static(&f, solution)
}

/// Robust single-phase balancing over `set`.
pub fn solve_robust(
    profile: &LoadProfile,
    set: &UncertaintySet,
    options: BuildOptions,
    config: &SolveConfig,
) -> Result<StaticSolution> {
    let f = build_robust(profile, set, options)?;
    let (lo, hi) = bounds_of(set)?;
    let start = static_start(profile.phase_width(), &lo, &hi, ImbalanceObjective::SinglePhase);
    let cfg = with_start(config, f.start(&anchored(start, options)));
    let solution = solve_milp(&f.instance, &cfg)?;
    finish_static(&f, solution)
}

/// Robust look-ahead balancing; `sets[t]` covers snapshot `t + 1`.
pub fn solve_lookahead(
    profile: &LoadProfile,
    sets: &[UncertaintySet],
    lookahead: &LookAheadConfig,
    config: &SolveConfig,
) -> Result<LookAheadSolution> {
    let f = build_lookahead(profile, sets, lookahead)?;
    let boxes = sets
        .iter()
        .map(|s| {
            let (lo, hi) = bounds_of(s)?;
            outer_box(lo, hi)
        })
        .collect::<Result<Vec<_>>>()?;
    let plan = greedy_lookahead(lookahead, profile.phase_width(), &boxes);
    let cfg = with_start(config, f.start_plan(&plan)?);
    let solution = solve_milp(&f.instance, &cfg)?;
    let plan = extract_plan(&f, &solution, lookahead, profile)?;
    Ok(LookAheadSolution {
        plan,
        stats: SolveStats::of(&solution),
    })
}

/// Relabels phases so load 0 sits on phase A when the anchor row is on.
/// Imbalance is invariant under relabelling.
fn anchored(mut a: PhaseAssignment, options: BuildOptions) -> PhaseAssignment {
    if !options.anchor || a.a[0] {
        return a;
    }
    if a.b[0] {
        std::mem::swap(&mut a.a, &mut a.b);
    } else {
        std::mem::swap(&mut a.a, &mut a.c);
    }
    a
}

/// Componentwise bounds; exact for boxes, the bounding box otherwise.
fn bounds_of(set: &UncertaintySet) -> Result<(Vec<f64>, Vec<f64>)> {
    match set {
        UncertaintySet::Box(b) => Ok((b.lower(), b.upper())),
        UncertaintySet::Polyhedral(p) => p.bounding_box(),
    }
}

fn outer_box(lo: Vec<f64>, hi: Vec<f64>) -> Result<BoxUncertaintySet> {
    let center: Vec<f64> = lo.iter().zip(&hi).map(|(l, h)| 0.5 * (l + h)).collect();
    let half: Vec<f64> = lo.iter().zip(&hi).map(|(l, h)| 0.5 * (h - l)).collect();
    Ok(BoxUncertaintySet::absolute(center, half)?.with_clamp(false))
}
