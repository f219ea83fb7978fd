//! Best-first branch-and-bound over binary variables.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::Arc;
use std::time::{Duration, Instant};

use log::debug;
use serde::{Deserialize, Serialize};

use crate::error::{MilpError, Result};
use crate::instance::{MilpInstance, VarId, VarKind};
use crate::simplex::{self, Basis, LpData, LpStatus};

/// Distance from {0, 1} below which a binary counts as integral.
pub const INTEGRALITY_TOL: f64 = 1e-6;
const GAP_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branching {
    /// Branch on the binary farthest from integrality, lowest index on ties.
    #[default]
    MostFractional,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    /// Relative gap `(incumbent - bound) / max(|incumbent|, eps)` at which
    /// the search stops.
    pub gap_tol: f64,
    /// Absolute gap below which the search stops regardless of `gap_tol`.
    pub abs_gap_tol: f64,
    pub node_limit: Option<usize>,
    /// Wall-clock limit in seconds. Runs hitting it are not reproducible.
    pub time_limit: Option<f64>,
    pub branching: Branching,
    /// Optional binary assignment tried as the first incumbent. The
    /// continuous variables are completed by an LP.
    #[serde(skip)]
    pub start: Option<Vec<(VarId, f64)>>,
    /// Keep a per-node record of bound and incumbent.
    #[serde(skip)]
    pub record_trace: bool,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            gap_tol: 1e-3,
            abs_gap_tol: 1e-9,
            node_limit: None,
            time_limit: None,
            branching: Branching::MostFractional,
            start: None,
            record_trace: false,
        }
    }
}

impl SolveConfig {
    pub fn exact() -> Self {
        Self {
            gap_tol: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gap_tol >= 0.0) || !(self.abs_gap_tol >= 0.0) {
            return Err(MilpError::InvalidConfig("gap tolerances must be nonnegative".into()));
        }
        if let Some(t) = self.time_limit {
            if !(t >= 0.0) {
                return Err(MilpError::InvalidConfig("time limit must be nonnegative".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MilpStatus {
    /// Search tree exhausted: the incumbent is optimal up to the absolute
    /// tolerance and all pruning respected the configured gap.
    OptimalWithinGap,
    Infeasible,
    Unbounded,
    /// Stopped with open nodes because the relative gap fell below `gap_tol`.
    GapLimit,
    NodeLimit,
    TimeLimit,
}

impl std::fmt::Display for MilpStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MilpStatus::OptimalWithinGap => "optimal-within-gap",
            MilpStatus::Infeasible => "infeasible",
            MilpStatus::Unbounded => "unbounded",
            MilpStatus::GapLimit => "gap-limit",
            MilpStatus::NodeLimit => "node-limit",
            MilpStatus::TimeLimit => "time-limit",
        })
    }
}

impl MilpStatus {
    pub fn within_gap(self) -> bool {
        matches!(self, MilpStatus::OptimalWithinGap | MilpStatus::GapLimit)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub node: usize,
    pub bound: f64,
    pub incumbent: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MilpSolution {
    pub status: MilpStatus,
    /// Incumbent objective, if any feasible point was found.
    pub objective: Option<f64>,
    /// Incumbent values indexed by [`VarId`]; binaries are rounded. Empty
    /// without an incumbent.
    pub values: Vec<f64>,
    pub best_bound: f64,
    pub gap: f64,
    pub node_count: usize,
    pub lp_iterations: usize,
    pub solve_seconds: f64,
    pub trace: Vec<TracePoint>,
}

impl MilpSolution {
    pub fn has_incumbent(&self) -> bool {
        self.objective.is_some()
    }

    pub fn value(&self, var: VarId) -> f64 {
        self.values[var.0]
    }

    pub fn named_values(&self, instance: &MilpInstance) -> std::collections::BTreeMap<String, f64> {
        instance
            .variables()
            .iter()
            .zip(&self.values)
            .map(|(v, &x)| (v.name.clone(), x))
            .collect()
    }
}

pub fn relative_gap(incumbent: f64, bound: f64) -> f64 {
    (incumbent - bound).max(0.0) / incumbent.abs().max(GAP_EPS)
}

struct Node {
    bound: f64,
    depth: usize,
    id: u64,
    fixes: Vec<(u32, bool)>,
    basis: Option<Arc<Basis>>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // BinaryHeap is a max-heap: the "greatest" node is the one with the
    // lowest bound, then the deepest, then the oldest.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then(self.depth.cmp(&other.depth))
            .then(other.id.cmp(&self.id))
    }
}

struct Incumbent {
    objective: f64,
    values: Vec<f64>,
}

struct Search<'a> {
    instance: &'a MilpInstance,
    config: &'a SolveConfig,
    data: LpData,
    binaries: Vec<usize>,
    incumbent: Option<Incumbent>,
    lp_iterations: usize,
}

impl<'a> Search<'a> {
    fn prune_tol(&self, incumbent: f64) -> f64 {
        self.config.abs_gap_tol.max(self.config.gap_tol * incumbent.abs())
    }

    fn dominated(&self, bound: f64) -> bool {
        match &self.incumbent {
            Some(inc) => bound >= inc.objective - self.prune_tol(inc.objective),
            None => false,
        }
    }

    fn bounds_for(&self, fixes: &[(u32, bool)]) -> (Vec<f64>, Vec<f64>) {
        let mut lo = self.data.lower.clone();
        let mut hi = self.data.upper.clone();
        for &(j, up) in fixes {
            let v = if up { 1.0 } else { 0.0 };
            lo[j as usize] = v;
            hi[j as usize] = v;
        }
        (lo, hi)
    }

    /// Re-solves with every binary fixed at its rounded value so continuous
    /// variables are consistent with exact 0/1 values.
    fn polish(&mut self, x: &[f64], basis: &Basis) -> Result<Option<Incumbent>> {
        let mut lo = self.data.lower.clone();
        let mut hi = self.data.upper.clone();
        for &j in &self.binaries {
            let v = x[j].round().clamp(0.0, 1.0);
            lo[j] = v;
            hi[j] = v;
        }
        let out = simplex::solve(&self.data, &lo, &hi, Some(basis), None)?;
        self.lp_iterations += out.iterations;
        if out.status != LpStatus::Optimal {
            return Ok(None);
        }
        let mut values = out.x[..self.data.n].to_vec();
        for &j in &self.binaries {
            values[j] = lo[j];
        }
        Ok(Some(Incumbent {
            objective: self.instance.objective_value(&values),
            values,
        }))
    }

    fn offer(&mut self, cand: Incumbent) -> bool {
        let better = self
            .incumbent
            .as_ref()
            .map_or(true, |inc| cand.objective < inc.objective);
        if better {
            debug!("new incumbent {:.9}", cand.objective);
            self.incumbent = Some(cand);
        }
        better
    }

    /// Evaluates a start assignment; returns the basis of its LP when the
    /// assignment is feasible, for warm-starting the root.
    fn try_start(&mut self, start: &[(VarId, f64)]) -> Result<Option<Basis>> {
        let mut lo = self.data.lower.clone();
        let mut hi = self.data.upper.clone();
        for &(v, val) in start {
            if v.0 >= self.data.n || self.instance.variable(v).kind != VarKind::Binary {
                return Err(MilpError::InvalidConfig(format!(
                    "start value for {} is not a binary variable",
                    v.0
                )));
            }
            let r = val.round().clamp(0.0, 1.0);
            lo[v.0] = r;
            hi[v.0] = r;
        }
        let out = simplex::solve(&self.data, &lo, &hi, None, None)?;
        self.lp_iterations += out.iterations;
        if out.status != LpStatus::Optimal {
            debug!("start assignment is infeasible");
            return Ok(None);
        }
        if self.binaries.iter().any(|&j| {
            let v = out.x[j];
            (v - v.round()).abs() > INTEGRALITY_TOL
        }) {
            // Partial start: complete it through the search instead.
            return Ok(Some(out.basis));
        }
        if let Some(inc) = self.polish(&out.x, &out.basis)? {
            self.offer(inc);
        }
        Ok(Some(out.basis))
    }
}

/// Solves `instance` by LP-based branch-and-bound.
pub fn solve_milp(instance: &MilpInstance, config: &SolveConfig) -> Result<MilpSolution> {
    config.validate()?;
    if instance.num_vars() == 0 {
        return Err(MilpError::Empty);
    }
    let started = Instant::now();
    let time_limit = config.time_limit.map(Duration::from_secs_f64);
    let data = LpData::from_instance(instance);
    let binaries: Vec<usize> = instance.binaries().map(|v| v.0).collect();
    let mut search = Search {
        instance,
        config,
        data,
        binaries,
        incumbent: None,
        lp_iterations: 0,
    };
    let root_basis = match &config.start {
        Some(start) => search.try_start(start)?.map(Arc::new),
        None => None,
    };

    let mut heap = BinaryHeap::new();
    heap.push(Node {
        bound: f64::NEG_INFINITY,
        depth: 0,
        id: 0,
        fixes: Vec::new(),
        basis: root_basis,
    });
    let mut next_id = 1u64;
    let mut nodes = 0usize;
    let mut trace = Vec::new();
    let mut root_status: Option<LpStatus> = None;

    let status = loop {
        let Some(top) = heap.peek() else {
            break MilpStatus::OptimalWithinGap;
        };
        if search.dominated(top.bound) {
            let inc = search.incumbent.as_ref().expect("dominated implies incumbent");
            let remaining_gap = inc.objective - top.bound;
            break if remaining_gap <= config.abs_gap_tol {
                MilpStatus::OptimalWithinGap
            } else {
                MilpStatus::GapLimit
            };
        }
        if config.node_limit.is_some_and(|l| nodes >= l) {
            break MilpStatus::NodeLimit;
        }
        if time_limit.is_some_and(|l| started.elapsed() >= l) {
            break MilpStatus::TimeLimit;
        }

        let node = heap.pop().expect("peeked");
        let (lo, hi) = search.bounds_for(&node.fixes);
        let out = simplex::solve(&search.data, &lo, &hi, node.basis.as_deref(), None)?;
        search.lp_iterations += out.iterations;
        nodes += 1;
        if root_status.is_none() {
            root_status = Some(out.status);
            if out.status == LpStatus::Unbounded {
                break MilpStatus::Unbounded;
            }
        }

        if out.status == LpStatus::Optimal {
            let bound = out.objective.max(node.bound);
            if !search.dominated(bound) {
                let mut branch: Option<(usize, f64)> = None;
                for &j in &search.binaries {
                    let v = out.x[j];
                    let frac = (v - v.round()).abs();
                    if frac > INTEGRALITY_TOL && branch.map_or(true, |(_, f)| frac > f) {
                        branch = Some((j, frac));
                    }
                }
                match branch {
                    None => {
                        if let Some(inc) = search.polish(&out.x, &out.basis)? {
                            search.offer(inc);
                        }
                    }
                    Some((j, _)) => {
                        let basis = Arc::new(out.basis);
                        let up_first = out.x[j] >= 0.5;
                        for up in [up_first, !up_first] {
                            let mut fixes = node.fixes.clone();
                            fixes.push((j as u32, up));
                            heap.push(Node {
                                bound,
                                depth: node.depth + 1,
                                id: next_id,
                                fixes,
                                basis: Some(Arc::clone(&basis)),
                            });
                            next_id += 1;
                        }
                    }
                }
            }
        }

        if config.record_trace {
            let open = heap.peek().map_or(f64::INFINITY, |n| n.bound);
            let inc = search.incumbent.as_ref().map(|i| i.objective);
            trace.push(TracePoint {
                node: nodes,
                bound: open.min(inc.unwrap_or(f64::INFINITY)),
                incumbent: inc,
            });
        }
    };

    let open_bound = heap.peek().map(|n| n.bound);
    let elapsed = started.elapsed().as_secs_f64();
    let (objective, values, best_bound, gap, status) = match search.incumbent {
        Some(inc) => {
            let bound = match status {
                MilpStatus::OptimalWithinGap if heap.is_empty() => inc.objective,
                _ => open_bound.unwrap_or(inc.objective).min(inc.objective),
            };
            let gap = relative_gap(inc.objective, bound);
            (Some(inc.objective), inc.values, bound, gap, status)
        }
        None => {
            let status = match status {
                MilpStatus::OptimalWithinGap | MilpStatus::GapLimit => MilpStatus::Infeasible,
                s => s,
            };
            let bound = if status == MilpStatus::Infeasible {
                f64::INFINITY
            } else if status == MilpStatus::Unbounded {
                f64::NEG_INFINITY
            } else {
                open_bound.unwrap_or(f64::NEG_INFINITY)
            };
            (None, Vec::new(), bound, f64::INFINITY, status)
        }
    };

    Ok(MilpSolution {
        status,
        objective,
        values,
        best_bound,
        gap,
        node_count: nodes,
        lp_iterations: search.lp_iterations,
        solve_seconds: elapsed,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::RowSense;

    #[test]
    fn two_binaries_hand_checked() {
        // min -(3x + 2y) s.t. x + y <= 1
        let mut m = MilpInstance::new("hand");
        let x = m.add_binary("x", -3.0).unwrap();
        let y = m.add_binary("y", -2.0).unwrap();
        m.add_constraint("c", [(x, 1.0), (y, 1.0)], RowSense::Le, 1.0).unwrap();
        let s = solve_milp(&m, &SolveConfig::default()).unwrap();
        assert_eq!(s.status, MilpStatus::OptimalWithinGap);
        assert_eq!(s.objective, Some(-3.0));
        assert_eq!(s.value(x), 1.0);
        assert_eq!(s.value(y), 0.0);
    }

    #[test]
    fn infeasible_root() {
        let mut m = MilpInstance::new("inf");
        let x = m.add_binary("x", 1.0).unwrap();
        m.add_constraint("c", [(x, 1.0)], RowSense::Ge, 2.0).unwrap();
        let s = solve_milp(&m, &SolveConfig::default()).unwrap();
        assert_eq!(s.status, MilpStatus::Infeasible);
        assert!(!s.has_incumbent());
    }

    #[test]
    fn integer_infeasible_with_feasible_relaxation() {
        let mut m = MilpInstance::new("inf");
        let x = m.add_binary("x", 1.0).unwrap();
        let y = m.add_binary("y", 1.0).unwrap();
        m.add_constraint("c", [(x, 2.0), (y, 2.0)], RowSense::Eq, 1.0).unwrap();
        let s = solve_milp(&m, &SolveConfig::default()).unwrap();
        assert_eq!(s.status, MilpStatus::Infeasible);
    }

    #[test]
    fn node_limit_without_incumbent() {
        let mut m = MilpInstance::new("lim");
        let x = m.add_binary("x", 1.0).unwrap();
        let y = m.add_binary("y", 1.0).unwrap();
        m.add_constraint("c", [(x, 2.0), (y, 2.0)], RowSense::Eq, 1.0).unwrap();
        let cfg = SolveConfig {
            node_limit: Some(1),
            ..SolveConfig::default()
        };
        let s = solve_milp(&m, &cfg).unwrap();
        assert_eq!(s.status, MilpStatus::NodeLimit);
        assert!(!s.has_incumbent());
    }

    #[test]
    fn start_assignment_becomes_incumbent() {
        let mut m = MilpInstance::new("start");
        let x = m.add_binary("x", -3.0).unwrap();
        let y = m.add_binary("y", -2.0).unwrap();
        m.add_constraint("c", [(x, 1.0), (y, 1.0)], RowSense::Le, 1.0).unwrap();
        let cfg = SolveConfig {
            node_limit: Some(0),
            start: Some(vec![(x, 0.0), (y, 1.0)]),
            ..SolveConfig::default()
        };
        let s = solve_milp(&m, &cfg).unwrap();
        assert_eq!(s.status, MilpStatus::NodeLimit);
        assert_eq!(s.objective, Some(-2.0));
    }

    #[test]
    fn unbounded_relaxation() {
        let mut m = MilpInstance::new("unb");
        let x = m.add_continuous("x", -1.0).unwrap();
        let b = m.add_binary("b", 0.0).unwrap();
        m.add_constraint("c", [(x, 1.0), (b, -1.0)], RowSense::Ge, 0.0).unwrap();
        let s = solve_milp(&m, &SolveConfig::default()).unwrap();
        assert_eq!(s.status, MilpStatus::Unbounded);
    }
}
