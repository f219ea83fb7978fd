//! MILP builders for deterministic, robust and look-ahead phase balancing.
//!
//! Robust rows are obtained by LP duality: the constraint
//! `max { x . d : H d <= h } <= bound` holds exactly when some `p >= 0`
//! satisfies `h . p <= bound` and `H^T p = x`.

use std::fmt;
use std::str::FromStr;

use phasebal_milp::{MilpInstance, MilpSolution, RowSense, VarId, INTEGRALITY_TOL};
use serde::{Deserialize, Serialize};

use crate::error::{dim, invalid, CoreError, Result};
use crate::model::{
    swap_events, BalancePlan, LoadProfile, LookAheadConfig, Phase, PhaseAssignment, PhaseSet,
    PolyhedralSet, UncertaintySet,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ImbalanceObjective {
    /// Largest deviation of a phase total from one third of the total.
    #[default]
    SinglePhase,
    /// Largest difference between two phase totals.
    Pairwise,
}

impl fmt::Display for ImbalanceObjective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ImbalanceObjective::SinglePhase => "single-phase",
            ImbalanceObjective::Pairwise => "pairwise",
        })
    }
}

impl FromStr for ImbalanceObjective {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single-phase" => Ok(ImbalanceObjective::SinglePhase),
            "pairwise" => Ok(ImbalanceObjective::Pairwise),
            _ => Err(invalid(format!(
                "unknown objective {s:?} (expected single-phase or pairwise)"
            ))),
        }
    }
}

/// Affine expression `sum(coef * var) + constant`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinExpr {
    pub terms: Vec<(VarId, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn constant(c: f64) -> Self {
        Self {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn var(v: VarId) -> Self {
        Self {
            terms: vec![(v, 1.0)],
            constant: 0.0,
        }
    }

    pub fn plus(mut self, v: VarId, coef: f64) -> Self {
        self.terms.push((v, coef));
        self
    }

    pub fn scaled(mut self, k: f64) -> Self {
        for t in &mut self.terms {
            t.1 *= k;
        }
        self.constant *= k;
        self
    }

    pub fn eval(&self, values: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(v, c)| c * values[v.0]).sum::<f64>()
    }
}

/// Emits the dual certificate of `max { x . d : d in set } <= bound`.
///
/// Adds nonnegative variables `p` (one per polyhedron row) tagged
/// `dual:{family}{label}[row=r]`, the row `h . p - bound <= 0` and one row
/// `H^T p = x` per coordinate. Returns the `p` variables.
pub fn dualize_row(
    instance: &mut MilpInstance,
    set: &PolyhedralSet,
    x: &[LinExpr],
    bound: &LinExpr,
    family: &str,
    label: &str,
) -> Result<Vec<VarId>> {
    let n = set.dim();
    if x.len() != n {
        return Err(dim(format!("direction has {} entries, set dimension {n}", x.len())));
    }
    let mut p = Vec::with_capacity(set.num_rows());
    for r in 0..set.num_rows() {
        let name = format!("{family}{label}[row={r}]");
        let v = instance.add_continuous(name.clone(), 0.0)?;
        instance.tag(v, format!("dual:{name}"));
        p.push(v);
    }

    let mut terms: Vec<(VarId, f64)> = p.iter().copied().zip(set.rhs().iter().copied()).collect();
    terms.extend(bound.terms.iter().map(|&(v, c)| (v, -c)));
    instance.add_constraint(
        format!("cert_{family}{label}"),
        terms,
        RowSense::Le,
        bound.constant,
    )?;

    for (j, xj) in x.iter().enumerate() {
        let mut terms: Vec<(VarId, f64)> = set
            .rows()
            .iter()
            .zip(&p)
            .filter(|(row, _)| row[j] != 0.0)
            .map(|(row, &pv)| (pv, row[j]))
            .collect();
        terms.extend(xj.terms.iter().map(|&(v, c)| (v, -c)));
        instance.add_constraint(
            format!("dir_{family}{label}[load={j}]"),
            terms,
            RowSense::Eq,
            xj.constant,
        )?;
    }
    Ok(p)
}

/// Binary assignment variables of one snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentVars {
    pub a: Vec<VarId>,
    pub b: Vec<VarId>,
    pub c: Vec<VarId>,
}

impl AssignmentVars {
    fn add(instance: &mut MilpInstance, n: usize, label: &str) -> Result<Self> {
        let mut mk = |ph: &str| -> Result<Vec<VarId>> {
            (0..n)
                .map(|i| {
                    let name = format!("{ph}{label}[load={i}]");
                    let v = instance.add_binary(name.clone(), 0.0)?;
                    instance.tag(v, format!("assignment:{name}"));
                    Ok(v)
                })
                .collect()
        };
        Ok(Self {
            a: mk("a")?,
            b: mk("b")?,
            c: mk("c")?,
        })
    }

    pub fn phase(&self, p: Phase) -> &[VarId] {
        match p {
            Phase::A => &self.a,
            Phase::B => &self.b,
            Phase::C => &self.c,
        }
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    /// Reads an assignment from solver values; entries must be within the
    /// integrality tolerance of 0 or 1.
    pub fn read(&self, values: &[f64]) -> Result<PhaseAssignment> {
        let get = |vars: &[VarId]| -> Result<Vec<bool>> {
            vars.iter()
                .map(|v| {
                    let x = values[v.0];
                    if (x - x.round()).abs() > INTEGRALITY_TOL {
                        Err(invalid(format!("binary variable {} has fractional value {x}", v.0)))
                    } else {
                        Ok(x.round() >= 1.0)
                    }
                })
                .collect()
        };
        PhaseAssignment::new(get(&self.a)?, get(&self.b)?, get(&self.c)?)
    }

    /// Start values encoding `assignment`.
    pub fn start(&self, assignment: &PhaseAssignment) -> Vec<(VarId, f64)> {
        Phase::ALL
            .iter()
            .flat_map(|&p| {
                self.phase(p)
                    .iter()
                    .zip(assignment.vector(p))
                    .map(|(&v, &on)| (v, on as u8 as f64))
            })
            .collect()
    }
}

/// Emits `a_i + b_i + c_i = w_i` for every load.
pub fn build_multiphase_constraints(
    instance: &mut MilpInstance,
    vars: &AssignmentVars,
    widths: &[u8],
    label: &str,
) -> Result<()> {
    if widths.len() != vars.len() {
        return Err(dim(format!("{} widths for {} loads", widths.len(), vars.len())));
    }
    for (i, &w) in widths.iter().enumerate() {
        if !(1..=3).contains(&w) {
            return Err(invalid(format!("load {i} has phase width {w}")));
        }
        instance.add_constraint(
            format!("width{label}[load={i}]"),
            [(vars.a[i], 1.0), (vars.b[i], 1.0), (vars.c[i], 1.0)],
            RowSense::Eq,
            w as f64,
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BuildOptions {
    /// Forces load 0 onto phase A, removing the phase-relabelling symmetry.
    pub anchor: bool,
}

/// A built instance plus handles on the variables needed to decode it.
#[derive(Debug, Clone)]
pub struct Formulation {
    pub instance: MilpInstance,
    /// One entry per decision snapshot.
    pub assignments: Vec<AssignmentVars>,
    pub u: VarId,
    /// Advisory-period imbalance; present for look-ahead instances only.
    pub v: Option<VarId>,
}

impl Formulation {
    /// Start values holding `assignment` at every decision snapshot.
    pub fn start(&self, assignment: &PhaseAssignment) -> Vec<(VarId, f64)> {
        self.assignments.iter().flat_map(|s| s.start(assignment)).collect()
    }

    /// Start values for a per-snapshot plan; `plan[t]` feeds decision
    /// snapshot `t + 1`.
    pub fn start_plan(&self, plan: &[PhaseAssignment]) -> Result<Vec<(VarId, f64)>> {
        if plan.len() != self.assignments.len() {
            return Err(dim(format!(
                "plan covers {} snapshots, formulation has {}",
                plan.len(),
                self.assignments.len()
            )));
        }
        Ok(self.assignments.iter().zip(plan).flat_map(|(s, a)| s.start(a)).collect())
    }

    /// First-snapshot assignment of a solved instance.
    pub fn assignment(&self, solution: &MilpSolution) -> Result<PhaseAssignment> {
        if !solution.has_incumbent() {
            return Err(no_incumbent(solution));
        }
        self.assignments[0].read(&solution.values)
    }
}

fn no_incumbent(solution: &MilpSolution) -> CoreError {
    CoreError::Solver {
        status: solution.status.to_string(),
        context: format!(" after {} nodes", solution.node_count),
    }
}

fn check_profile(profile: &LoadProfile, n: usize) -> Result<()> {
    if profile.n_loads() == 0 {
        return Err(invalid("no loads"));
    }
    if n != profile.n_loads() {
        return Err(dim(format!("{n} demand entries for {} loads", profile.n_loads())));
    }
    Ok(())
}

fn anchor(instance: &mut MilpInstance, vars: &AssignmentVars) -> Result<()> {
    instance.add_constraint("anchor", [(vars.a[0], 1.0)], RowSense::Eq, 1.0)?;
    Ok(())
}

/// Deviation `+-(p_i - w_i/3)` of each load's share on phase `p`.
fn deviation(vars: &AssignmentVars, p: Phase, widths: &[u8], sign: f64) -> Vec<LinExpr> {
    vars.phase(p)
        .iter()
        .zip(widths)
        .map(|(&v, &w)| LinExpr::constant(-(w as f64) / 3.0).plus(v, 1.0).scaled(sign))
        .collect()
}

const FAMILIES: [(Phase, f64, &str); 6] = [
    (Phase::A, 1.0, "p_a"),
    (Phase::A, -1.0, "q_a"),
    (Phase::B, 1.0, "p_b"),
    (Phase::B, -1.0, "q_b"),
    (Phase::C, 1.0, "p_c"),
    (Phase::C, -1.0, "q_c"),
];

/// Deterministic balancing of one demand vector.
pub fn build_deterministic(
    profile: &LoadProfile,
    d: &[f64],
    objective: ImbalanceObjective,
    options: BuildOptions,
) -> Result<Formulation> {
    check_profile(profile, d.len())?;
    if d.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(invalid("demand must be finite and nonnegative"));
    }
    let n = d.len();
    let widths = profile.phase_width();
    let mut m = MilpInstance::new(format!("dpb_{objective}"));
    let u = m.add_continuous("u", 1.0)?;
    m.tag(u, "imbalance:u");
    let vars = AssignmentVars::add(&mut m, n, "[t=1]")?;
    build_multiphase_constraints(&mut m, &vars, widths, "[t=1]")?;
    if options.anchor {
        anchor(&mut m, &vars)?;
    }

    match objective {
        ImbalanceObjective::SinglePhase => {
            let third: f64 = d.iter().zip(widths).map(|(&x, &w)| x * w as f64).sum::<f64>() / 3.0;
            for p in Phase::ALL {
                let load: Vec<(VarId, f64)> =
                    vars.phase(p).iter().zip(d).map(|(&v, &x)| (v, x)).collect();
                let over = load.iter().copied().chain([(u, -1.0)]);
                m.add_constraint(format!("over_{}", p.name()), over, RowSense::Le, third)?;
                let under = load.iter().copied().chain([(u, 1.0)]);
                m.add_constraint(format!("under_{}", p.name()), under, RowSense::Ge, third)?;
            }
        }
        ImbalanceObjective::Pairwise => {
            for (p, q) in [(Phase::A, Phase::B), (Phase::B, Phase::C), (Phase::A, Phase::C)] {
                let diff: Vec<(VarId, f64)> = (0..n)
                    .flat_map(|i| [(vars.phase(p)[i], d[i]), (vars.phase(q)[i], -d[i])])
                    .collect();
                let tag = format!("{}{}", p.name(), q.name());
                let hi = diff.iter().copied().chain([(u, -1.0)]);
                m.add_constraint(format!("diff_hi_{tag}"), hi, RowSense::Le, 0.0)?;
                let lo = diff.iter().copied().chain([(u, 1.0)]);
                m.add_constraint(format!("diff_lo_{tag}"), lo, RowSense::Ge, 0.0)?;
            }
        }
    }
    Ok(Formulation {
        instance: m,
        assignments: vec![vars],
        u,
        v: None,
    })
}

/// Robust single-phase balancing against every demand vector in `set`.
pub fn build_robust(
    profile: &LoadProfile,
    set: &UncertaintySet,
    options: BuildOptions,
) -> Result<Formulation> {
    check_profile(profile, set.dim())?;
    let poly = set.to_polyhedron();
    let widths = profile.phase_width();
    let mut m = MilpInstance::new("rpb");
    let u = m.add_continuous("u", 1.0)?;
    m.tag(u, "imbalance:u");
    let vars = AssignmentVars::add(&mut m, profile.n_loads(), "[t=1]")?;
    build_multiphase_constraints(&mut m, &vars, widths, "[t=1]")?;
    if options.anchor {
        anchor(&mut m, &vars)?;
    }
    for (p, sign, family) in FAMILIES {
        let x = deviation(&vars, p, widths, sign);
        dualize_row(&mut m, &poly, &x, &LinExpr::var(u), family, "[t=1]")?;
    }
    Ok(Formulation {
        instance: m,
        assignments: vec![vars],
        u,
        v: None,
    })
}

/// Two-period robust look-ahead balancing with a swap budget.
///
/// `sets[t]` is the uncertainty set of snapshot `t + 1`. Snapshots
/// `1..=t1` get their own assignment and are bounded by `u`; snapshots
/// `t1+1..=t2` reuse the last committed assignment and are bounded by `v`.
pub fn build_lookahead(
    profile: &LoadProfile,
    sets: &[UncertaintySet],
    config: &LookAheadConfig,
) -> Result<Formulation> {
    let widths = profile.phase_width();
    config.validate(widths)?;
    if sets.len() != config.t2 {
        return Err(dim(format!(
            "{} uncertainty sets for a horizon of {} snapshots",
            sets.len(),
            config.t2
        )));
    }
    let n = profile.n_loads();
    for (t, s) in sets.iter().enumerate() {
        if s.dim() != n {
            return Err(dim(format!("set {} has dimension {}, expected {n}", t + 1, s.dim())));
        }
    }

    let mut m = MilpInstance::new("rlapb");
    let u = m.add_continuous("u", 1.0)?;
    m.tag(u, "imbalance:u");
    let v = m.add_continuous("v", config.lambda)?;
    m.tag(v, "imbalance:v");

    let mut snaps: Vec<AssignmentVars> = Vec::with_capacity(config.t1);
    for t in 1..=config.t1 {
        let label = format!("[t={t}]");
        let vars = AssignmentVars::add(&mut m, n, &label)?;
        build_multiphase_constraints(&mut m, &vars, widths, &label)?;
        snaps.push(vars);
    }

    for (t, set) in sets.iter().enumerate() {
        let t = t + 1;
        let poly = set.to_polyhedron();
        let (vars, bound) = if t <= config.t1 {
            (&snaps[t - 1], u)
        } else {
            (&snaps[config.t1 - 1], v)
        };
        let label = format!("[t={t}]");
        for (p, sign, family) in FAMILIES {
            let x = deviation(vars, p, widths, sign);
            dualize_row(&mut m, &poly, &x, &LinExpr::var(bound), family, &label)?;
        }
    }

    // |a[t] - a[t-1]| <= w[t] with a[0] the initial assignment.
    let init = &config.initial_assignment;
    let mut budget: Vec<(VarId, f64)> = Vec::new();
    for t in 1..=config.t1 {
        for p in Phase::ALL {
            let cur = snaps[t - 1].phase(p);
            for i in 0..n {
                let name = format!("w_{}[t={t}][load={i}]", p.name().to_ascii_lowercase());
                let w = m.add_continuous(name.clone(), 0.0)?;
                m.tag(w, format!("swap:{name}"));
                budget.push((w, 1.0));
                let (prev_terms, rhs) = if t == 1 {
                    (Vec::new(), init.vector(p)[i] as u8 as f64)
                } else {
                    (vec![(snaps[t - 2].phase(p)[i], -1.0)], 0.0)
                };
                let base: Vec<(VarId, f64)> =
                    [(cur[i], 1.0)].into_iter().chain(prev_terms).collect();
                m.add_constraint(
                    format!("swap_hi_{name}"),
                    base.iter().copied().chain([(w, -1.0)]),
                    RowSense::Le,
                    rhs,
                )?;
                m.add_constraint(
                    format!("swap_lo_{name}"),
                    base.iter().copied().chain([(w, 1.0)]),
                    RowSense::Ge,
                    rhs,
                )?;
            }
        }
    }
    m.add_constraint(
        "swap_budget",
        budget,
        RowSense::Le,
        2.0 * config.swap_budget as f64,
    )?;

    Ok(Formulation {
        instance: m,
        assignments: snaps,
        u,
        v: Some(v),
    })
}

/// Decodes a solved look-ahead instance into a plan.
pub fn extract_plan(
    formulation: &Formulation,
    solution: &MilpSolution,
    config: &LookAheadConfig,
    profile: &LoadProfile,
) -> Result<BalancePlan> {
    if !solution.has_incumbent() {
        return Err(no_incumbent(solution));
    }
    let v = formulation
        .v
        .ok_or_else(|| invalid("formulation has no advisory period"))?;
    let assignments = formulation
        .assignments
        .iter()
        .map(|s| s.read(&solution.values))
        .collect::<Result<Vec<_>>>()?;
    let swap_events = swap_events(&config.initial_assignment, &assignments, profile.load_ids());
    let advisory_assignment = assignments.last().cloned().expect("t1 >= 1");
    Ok(BalancePlan {
        u: solution.values[formulation.u.0].max(0.0),
        v: solution.values[v.0].max(0.0),
        advisory_assignment,
        assignments,
        swap_events,
        objective: solution.objective.unwrap_or(f64::NAN),
        gap: solution.gap,
    })
}

/// Greedy largest-first assignment onto the currently lightest phases.
/// Used as a starting incumbent for the static problems.
pub fn greedy_assignment(d: &[f64], widths: &[u8]) -> PhaseAssignment {
    let mut order: Vec<usize> = (0..d.len()).collect();
    order.sort_by(|&i, &j| d[j].total_cmp(&d[i]).then(i.cmp(&j)));
    let mut sums = [0.0f64; 3];
    let mut sets = vec![PhaseSet::EMPTY; d.len()];
    for i in order {
        let mut phases = Phase::ALL;
        phases.sort_by(|p, q| sums[p.index()].total_cmp(&sums[q.index()]));
        let chosen = &phases[..widths[i] as usize];
        let mut bits = [false; 3];
        for p in chosen {
            bits[p.index()] = true;
            sums[p.index()] += d[i];
        }
        sets[i] = PhaseSet::from_bits(bits);
    }
    PhaseAssignment::from_sets(&sets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::BoxUncertaintySet;
    use phasebal_milp::{solve_lp, solve_milp, BoundOverrides, MilpStatus, SolveConfig};

    fn profile(d: &[f64]) -> LoadProfile {
        LoadProfile::from_snapshot(d).unwrap()
    }

    #[test]
    fn zero_direction_certificate() {
        let set = BoxUncertaintySet::absolute(vec![1.0, 2.0], vec![0.5, 0.5]).unwrap();
        let poly = crate::model::box_to_polyhedron(&set);
        let mut m = MilpInstance::new("z");
        let bound = m.add_continuous("beta", 1.0).unwrap();
        let x = vec![LinExpr::constant(0.0), LinExpr::constant(0.0)];
        dualize_row(&mut m, &poly, &x, &LinExpr::var(bound), "p", "").unwrap();
        let lp = solve_lp(&m, &BoundOverrides::new()).unwrap();
        assert_eq!(lp.objective, 0.0);
    }

    #[test]
    fn perfect_balance_on_equal_loads() {
        let p = profile(&[1.0, 1.0, 1.0]);
        let f = build_deterministic(&p, &[1.0, 1.0, 1.0], ImbalanceObjective::SinglePhase, BuildOptions::default())
            .unwrap();
        let s = solve_milp(&f.instance, &SolveConfig::exact()).unwrap();
        assert_eq!(s.status, MilpStatus::OptimalWithinGap);
        assert!(s.objective.unwrap().abs() < 1e-12);
        let a = f.assignment(&s).unwrap();
        assert_eq!(a.phase_sums(&[1.0, 1.0, 1.0]).unwrap(), [1.0, 1.0, 1.0]);
    }

    #[test]
    fn width_three_load_is_on_every_phase() {
        let p = LoadProfile::from_snapshot(&[4.0, 1.0]).unwrap().with_widths(vec![3, 1]).unwrap();
        let f = build_deterministic(&p, &[4.0, 1.0], ImbalanceObjective::SinglePhase, BuildOptions::default())
            .unwrap();
        let s = solve_milp(&f.instance, &SolveConfig::exact()).unwrap();
        let a = f.assignment(&s).unwrap();
        assert_eq!(a.phases_of(0).to_string(), "ABC");
        // Totals 5/4/4 against a third of 13.
        assert!((s.objective.unwrap() - (5.0 - 13.0 / 3.0)).abs() < 1e-9);
    }

    #[test]
    fn greedy_is_valid() {
        let a = greedy_assignment(&[5.0, 4.0, 3.0, 3.0, 1.0], &[1, 2, 1, 1, 3]);
        a.validate(&[1, 2, 1, 1, 3]).unwrap();
    }

    #[test]
    fn objective_names_parse() {
        assert_eq!("pairwise".parse::<ImbalanceObjective>().unwrap(), ImbalanceObjective::Pairwise);
        assert!("max".parse::<ImbalanceObjective>().is_err());
        assert_eq!(ImbalanceObjective::SinglePhase.to_string(), "single-phase");
    }

    #[test]
    fn lookahead_rejects_wrong_set_count() {
        let p = profile(&[1.0, 2.0]);
        let mut cfg = LookAheadConfig::new(PhaseAssignment::from_phases(&[Phase::A, Phase::B]));
        cfg.t1 = 1;
        cfg.t2 = 2;
        let set: UncertaintySet = BoxUncertaintySet::singleton(vec![1.0, 2.0]).unwrap().into();
        assert!(build_lookahead(&p, &[set.clone()], &cfg).is_err());
        assert!(build_lookahead(&p, &[set.clone(), set], &cfg).is_ok());
    }
}
