//! Loads, phase assignments, uncertainty sets and horizon configuration.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use phasebal_milp::{solve_lp, BoundOverrides, LpStatus, MilpInstance, RowSense, VarId};
use serde::{Deserialize, Serialize};

use crate::error::{dim, invalid, CoreError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Phase {
    A,
    B,
    C,
}

impl Phase {
    pub const ALL: [Phase; 3] = [Phase::A, Phase::B, Phase::C];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        ["A", "B", "C"][self.index()]
    }
}

/// Set of phases a load occupies, as a 3-bit mask (A = bit 0).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PhaseSet(u8);

impl PhaseSet {
    pub const EMPTY: PhaseSet = PhaseSet(0);

    pub fn from_bits(bits: [bool; 3]) -> Self {
        PhaseSet(bits[0] as u8 | (bits[1] as u8) << 1 | (bits[2] as u8) << 2)
    }

    pub fn single(p: Phase) -> Self {
        PhaseSet(1 << p.index())
    }

    pub fn contains(self, p: Phase) -> bool {
        self.0 & (1 << p.index()) != 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn bits(self) -> [bool; 3] {
        [self.0 & 1 != 0, self.0 & 2 != 0, self.0 & 4 != 0]
    }

    pub fn phases(self) -> impl Iterator<Item = Phase> {
        Phase::ALL.into_iter().filter(move |&p| self.contains(p))
    }

    /// All phase sets of the given width, in lexicographic order of names.
    pub fn of_width(width: u8) -> Vec<PhaseSet> {
        let mut out: Vec<PhaseSet> = (1u8..8)
            .map(PhaseSet)
            .filter(|s| s.len() == width as usize)
            .collect();
        out.sort_by_key(|s| s.to_string());
        out
    }
}

impl fmt::Display for PhaseSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return f.write_str("-");
        }
        for p in self.phases() {
            f.write_str(p.name())?;
        }
        Ok(())
    }
}

impl FromStr for PhaseSet {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        let mut bits = [false; 3];
        for ch in s.trim().chars() {
            let i = match ch.to_ascii_uppercase() {
                'A' => 0,
                'B' => 1,
                'C' => 2,
                _ => return Err(invalid(format!("unknown phase {ch:?} in {s:?}"))),
            };
            if bits[i] {
                return Err(invalid(format!("phase {ch} repeated in {s:?}")));
            }
            bits[i] = true;
        }
        if bits == [false; 3] {
            return Err(invalid("empty phase set"));
        }
        Ok(PhaseSet::from_bits(bits))
    }
}

impl Serialize for PhaseSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PhaseSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Demand matrix of `n_loads x n_snapshots` kW values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadProfile {
    load_ids: Vec<String>,
    phase_width: Vec<u8>,
    n_snapshots: usize,
    /// Load-major: `demand[i * n_snapshots + t]`.
    demand: Vec<f64>,
}

impl LoadProfile {
    /// Builds a profile from one demand series per load.
    pub fn new(load_ids: Vec<String>, series: Vec<Vec<f64>>, phase_width: Vec<u8>) -> Result<Self> {
        let n = load_ids.len();
        if n == 0 {
            return Err(invalid("profile has no loads"));
        }
        if series.len() != n || phase_width.len() != n {
            return Err(dim(format!(
                "{n} load ids, {} series, {} widths",
                series.len(),
                phase_width.len()
            )));
        }
        let n_snapshots = series[0].len();
        if n_snapshots == 0 {
            return Err(invalid("profile has no snapshots"));
        }
        let mut seen = HashSet::new();
        for id in &load_ids {
            if !seen.insert(id.as_str()) {
                return Err(invalid(format!("duplicate load id {id:?}")));
            }
        }
        for (i, &w) in phase_width.iter().enumerate() {
            if !(1..=3).contains(&w) {
                return Err(invalid(format!("load {:?} has phase width {w}", load_ids[i])));
            }
        }
        let mut demand = Vec::with_capacity(n * n_snapshots);
        for (i, s) in series.iter().enumerate() {
            if s.len() != n_snapshots {
                return Err(dim(format!(
                    "load {:?} has {} snapshots, expected {n_snapshots}",
                    load_ids[i],
                    s.len()
                )));
            }
            for (t, &v) in s.iter().enumerate() {
                if !(v >= 0.0) || !v.is_finite() {
                    return Err(invalid(format!(
                        "load {:?} snapshot {t}: demand {v} is not a nonnegative number",
                        load_ids[i]
                    )));
                }
            }
            demand.extend_from_slice(s);
        }
        Ok(Self {
            load_ids,
            phase_width,
            n_snapshots,
            demand,
        })
    }

    /// Single-phase loads with ids `L0, L1, ...`.
    pub fn from_series(series: Vec<Vec<f64>>) -> Result<Self> {
        let n = series.len();
        Self::new((0..n).map(|i| format!("L{i}")).collect(), series, vec![1; n])
    }

    /// One snapshot of single-phase loads.
    pub fn from_snapshot(d: &[f64]) -> Result<Self> {
        Self::from_series(d.iter().map(|&v| vec![v]).collect())
    }

    pub fn with_widths(mut self, widths: Vec<u8>) -> Result<Self> {
        let series = (0..self.n_loads()).map(|i| self.series(i).to_vec()).collect();
        let ids = std::mem::take(&mut self.load_ids);
        Self::new(ids, series, widths)
    }

    pub fn n_loads(&self) -> usize {
        self.load_ids.len()
    }

    pub fn n_snapshots(&self) -> usize {
        self.n_snapshots
    }

    pub fn load_ids(&self) -> &[String] {
        &self.load_ids
    }

    pub fn phase_width(&self) -> &[u8] {
        &self.phase_width
    }

    pub fn demand(&self, load: usize, t: usize) -> f64 {
        self.demand[load * self.n_snapshots + t]
    }

    pub fn series(&self, load: usize) -> &[f64] {
        &self.demand[load * self.n_snapshots..(load + 1) * self.n_snapshots]
    }

    /// Demand vector of all loads at snapshot `t`.
    pub fn snapshot(&self, t: usize) -> Vec<f64> {
        (0..self.n_loads()).map(|i| self.demand(i, t)).collect()
    }

    /// Sub-profile over snapshots `start..end`.
    pub fn window(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.n_snapshots {
            return Err(dim(format!(
                "window {start}..{end} outside 0..{}",
                self.n_snapshots
            )));
        }
        let series = (0..self.n_loads())
            .map(|i| self.series(i)[start..end].to_vec())
            .collect();
        Self::new(self.load_ids.clone(), series, self.phase_width.clone())
    }

    /// Applies `f(load, value)` to every entry.
    pub fn map(&self, f: impl Fn(usize, f64) -> f64) -> Result<Self> {
        let series = (0..self.n_loads())
            .map(|i| self.series(i).iter().map(|&v| f(i, v)).collect())
            .collect();
        Self::new(self.load_ids.clone(), series, self.phase_width.clone())
    }
}

/// Three parallel binary vectors: `a[i]` is true when load `i` sits on phase A.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PhaseAssignment {
    pub a: Vec<bool>,
    pub b: Vec<bool>,
    pub c: Vec<bool>,
}

impl PhaseAssignment {
    pub fn new(a: Vec<bool>, b: Vec<bool>, c: Vec<bool>) -> Result<Self> {
        if a.len() != b.len() || a.len() != c.len() {
            return Err(dim("phase vectors differ in length"));
        }
        let out = Self { a, b, c };
        for i in 0..out.len() {
            if out.phases_of(i).is_empty() {
                return Err(invalid(format!("load {i} is on no phase")));
            }
        }
        Ok(out)
    }

    pub fn from_sets(sets: &[PhaseSet]) -> Self {
        let mut out = Self {
            a: Vec::with_capacity(sets.len()),
            b: Vec::with_capacity(sets.len()),
            c: Vec::with_capacity(sets.len()),
        };
        for s in sets {
            let [a, b, c] = s.bits();
            out.a.push(a);
            out.b.push(b);
            out.c.push(c);
        }
        out
    }

    pub fn from_phases(phases: &[Phase]) -> Self {
        let sets: Vec<PhaseSet> = phases.iter().map(|&p| PhaseSet::single(p)).collect();
        Self::from_sets(&sets)
    }

    /// Width-compatible default: every load starts on its first phases
    /// in A, B, C order.
    pub fn packed(widths: &[u8]) -> Self {
        let sets: Vec<PhaseSet> = widths
            .iter()
            .map(|&w| PhaseSet::from_bits([w >= 1, w >= 2, w >= 3]))
            .collect();
        Self::from_sets(&sets)
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    pub fn phases_of(&self, load: usize) -> PhaseSet {
        PhaseSet::from_bits([self.a[load], self.b[load], self.c[load]])
    }

    pub fn sets(&self) -> Vec<PhaseSet> {
        (0..self.len()).map(|i| self.phases_of(i)).collect()
    }

    pub fn vector(&self, p: Phase) -> &[bool] {
        match p {
            Phase::A => &self.a,
            Phase::B => &self.b,
            Phase::C => &self.c,
        }
    }

    /// Checks that every load occupies exactly as many phases as its width.
    pub fn validate(&self, widths: &[u8]) -> Result<()> {
        if widths.len() != self.len() {
            return Err(dim(format!(
                "assignment covers {} loads, profile has {}",
                self.len(),
                widths.len()
            )));
        }
        for (i, &w) in widths.iter().enumerate() {
            let occ = self.phases_of(i).len();
            if occ != w as usize {
                return Err(invalid(format!("load {i} occupies {occ} phases, width is {w}")));
            }
        }
        Ok(())
    }

    /// Per-phase kW totals; a multi-phase load counts fully on each phase
    /// it occupies.
    pub fn phase_sums(&self, d: &[f64]) -> Result<[f64; 3]> {
        if d.len() != self.len() {
            return Err(dim(format!("{} demands for {} loads", d.len(), self.len())));
        }
        let mut s = [0.0; 3];
        for (i, &di) in d.iter().enumerate() {
            for p in self.phases_of(i).phases() {
                s[p.index()] += di;
            }
        }
        Ok(s)
    }
}

/// Number of loads whose phase set differs between two assignments.
pub fn count_swaps(prev: &PhaseAssignment, next: &PhaseAssignment) -> Result<usize> {
    if prev.len() != next.len() {
        return Err(dim(format!(
            "assignments cover {} and {} loads",
            prev.len(),
            next.len()
        )));
    }
    Ok((0..prev.len())
        .filter(|&i| prev.phases_of(i) != next.phases_of(i))
        .count())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxUncertaintySet {
    center: Vec<f64>,
    half_width: Vec<f64>,
    /// Clamp lower bounds at zero.
    clamp: bool,
}

impl BoxUncertaintySet {
    /// `center +- half_width`, lower bound clamped at zero.
    pub fn absolute(center: Vec<f64>, half_width: Vec<f64>) -> Result<Self> {
        if center.len() != half_width.len() {
            return Err(dim(format!(
                "center has {} entries, half-width {}",
                center.len(),
                half_width.len()
            )));
        }
        if center.is_empty() {
            return Err(invalid("empty uncertainty set dimension"));
        }
        if center.iter().any(|v| !v.is_finite()) {
            return Err(invalid("non-finite set center"));
        }
        if half_width.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
            return Err(invalid("half-width must be finite and nonnegative"));
        }
        Ok(Self {
            center,
            half_width,
            clamp: true,
        })
    }

    /// `(1 +- rho) * center`.
    pub fn relative(center: Vec<f64>, rho: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&rho) {
            return Err(invalid(format!("rho {rho} outside [0, 1)")));
        }
        let hw = center.iter().map(|c| rho * c.abs()).collect();
        Self::absolute(center, hw)
    }

    pub fn singleton(center: Vec<f64>) -> Result<Self> {
        let n = center.len();
        Self::absolute(center, vec![0.0; n])
    }

    /// Disables (or re-enables) clamping the lower bound at zero.
    pub fn with_clamp(mut self, clamp: bool) -> Self {
        self.clamp = clamp;
        self
    }

    pub fn clamped(&self) -> bool {
        self.clamp
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn half_width(&self) -> &[f64] {
        &self.half_width
    }

    pub fn lower(&self) -> Vec<f64> {
        self.center
            .iter()
            .zip(&self.half_width)
            .map(|(c, w)| if self.clamp { (c - w).max(0.0) } else { c - w })
            .collect()
    }

    pub fn upper(&self) -> Vec<f64> {
        self.center
            .iter()
            .zip(&self.half_width)
            .map(|(c, w)| c + w)
            .collect()
    }

    pub fn contains(&self, d: &[f64], tol: f64) -> bool {
        d.len() == self.dim()
            && d.iter()
                .zip(self.lower().iter().zip(self.upper()))
                .all(|(&x, (&lo, hi))| x >= lo - tol && x <= hi + tol)
    }

    /// Same center, half-widths multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let hw = self.half_width.iter().map(|w| w * factor).collect();
        Ok(Self::absolute(self.center.clone(), hw)?.with_clamp(self.clamp))
    }
}

/// `{d : H d <= h}`, nonempty and bounded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyhedralSet {
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
}

impl PolyhedralSet {
    /// Validates the set by solving the 2n bounding LPs `max/min d_j`.
    pub fn new(rows: Vec<Vec<f64>>, rhs: Vec<f64>) -> Result<Self> {
        let set = Self::unchecked(rows, rhs)?;
        set.bounding_box()?;
        Ok(set)
    }

    fn unchecked(rows: Vec<Vec<f64>>, rhs: Vec<f64>) -> Result<Self> {
        if rows.is_empty() {
            return Err(invalid("polyhedron needs at least one row"));
        }
        if rows.len() != rhs.len() {
            return Err(dim(format!("{} rows, {} right-hand sides", rows.len(), rhs.len())));
        }
        let n = rows[0].len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(dim("polyhedron rows have inconsistent widths"));
        }
        if rows.iter().flatten().chain(&rhs).any(|v| !v.is_finite()) {
            return Err(invalid("non-finite polyhedron data"));
        }
        Ok(Self { rows, rhs })
    }

    pub fn dim(&self) -> usize {
        self.rows[0].len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    pub fn contains(&self, d: &[f64], tol: f64) -> bool {
        self.rows
            .iter()
            .zip(&self.rhs)
            .all(|(r, &h)| r.iter().zip(d).map(|(a, x)| a * x).sum::<f64>() <= h + tol)
    }

    /// Maximum of `x . d` over the set, by LP with `d` split into
    /// nonnegative parts.
    pub fn support(&self, x: &[f64]) -> Result<f64> {
        let n = self.dim();
        if x.len() != n {
            return Err(dim(format!("direction has {} entries, set dimension {n}", x.len())));
        }
        let mut m = MilpInstance::new("support");
        let plus: Vec<VarId> = (0..n)
            .map(|j| m.add_continuous(format!("dp{j}"), -x[j]))
            .collect::<std::result::Result<_, _>>()?;
        let minus: Vec<VarId> = (0..n)
            .map(|j| m.add_continuous(format!("dm{j}"), x[j]))
            .collect::<std::result::Result<_, _>>()?;
        for (i, (r, &h)) in self.rows.iter().zip(&self.rhs).enumerate() {
            let terms = (0..n).flat_map(|j| [(plus[j], r[j]), (minus[j], -r[j])]);
            m.add_constraint(format!("h{i}"), terms, RowSense::Le, h)?;
        }
        let lp = solve_lp(&m, &BoundOverrides::new())?;
        match lp.status {
            LpStatus::Optimal => Ok(-lp.objective),
            LpStatus::Infeasible => Err(CoreError::BadSet("empty")),
            LpStatus::Unbounded => Err(CoreError::BadSet("unbounded")),
        }
    }

    /// Componentwise `(min, max)` over the set.
    pub fn bounding_box(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = self.dim();
        let mut lo = Vec::with_capacity(n);
        let mut hi = Vec::with_capacity(n);
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            hi.push(self.support(&e)?);
            e[j] = -1.0;
            lo.push(-self.support(&e)?);
        }
        Ok((lo, hi))
    }
}

/// Stacks `+I` over `-I`: upper bounds first, then negated lower bounds.
pub fn box_to_polyhedron(set: &BoxUncertaintySet) -> PolyhedralSet {
    let n = set.dim();
    let mut rows = Vec::with_capacity(2 * n);
    for sign in [1.0, -1.0] {
        for j in 0..n {
            let mut r = vec![0.0; n];
            r[j] = sign;
            rows.push(r);
        }
    }
    let rhs = set
        .upper()
        .into_iter()
        .chain(set.lower().into_iter().map(|l| -l))
        .collect();
    PolyhedralSet { rows, rhs }
}

/// Either uncertainty representation accepted by the robust builders.
#[derive(Debug, Clone, PartialEq)]
pub enum UncertaintySet {
    Box(BoxUncertaintySet),
    Polyhedral(PolyhedralSet),
}

impl UncertaintySet {
    pub fn dim(&self) -> usize {
        match self {
            UncertaintySet::Box(b) => b.dim(),
            UncertaintySet::Polyhedral(p) => p.dim(),
        }
    }

    pub fn to_polyhedron(&self) -> PolyhedralSet {
        match self {
            UncertaintySet::Box(b) => box_to_polyhedron(b),
            UncertaintySet::Polyhedral(p) => p.clone(),
        }
    }

    pub fn contains(&self, d: &[f64], tol: f64) -> bool {
        match self {
            UncertaintySet::Box(b) => b.contains(d, tol),
            UncertaintySet::Polyhedral(p) => p.contains(d, tol),
        }
    }
}

impl From<BoxUncertaintySet> for UncertaintySet {
    fn from(b: BoxUncertaintySet) -> Self {
        UncertaintySet::Box(b)
    }
}

impl From<PolyhedralSet> for UncertaintySet {
    fn from(p: PolyhedralSet) -> Self {
        UncertaintySet::Polyhedral(p)
    }
}

pub const DEFAULT_T1: usize = 24;
pub const DEFAULT_T2: usize = 48;
pub const DEFAULT_LAMBDA: f64 = 1.0 / 3.0;
pub const DEFAULT_SWAP_BUDGET: usize = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LookAheadConfig {
    /// Snapshots in the committed period.
    pub t1: usize,
    /// Snapshots in the whole horizon, advisory period included.
    pub t2: usize,
    /// Weight on the advisory-period imbalance.
    pub lambda: f64,
    /// Maximum number of loads changing phase over the committed period.
    pub swap_budget: usize,
    /// Assignment in force before the first snapshot.
    pub initial_assignment: PhaseAssignment,
}

impl LookAheadConfig {
    pub fn new(initial_assignment: PhaseAssignment) -> Self {
        Self {
            t1: DEFAULT_T1,
            t2: DEFAULT_T2,
            lambda: DEFAULT_LAMBDA,
            swap_budget: DEFAULT_SWAP_BUDGET,
            initial_assignment,
        }
    }

    pub fn validate(&self, widths: &[u8]) -> Result<()> {
        if self.t1 < 1 || self.t2 <= self.t1 {
            return Err(invalid(format!(
                "horizon needs t2 > t1 >= 1, got t1 = {}, t2 = {}",
                self.t1, self.t2
            )));
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(invalid(format!("lambda {} must be finite and >= 0", self.lambda)));
        }
        self.initial_assignment.validate(widths)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SwapEvent {
    /// 1-based snapshot within the committed period at which the new phase
    /// takes effect.
    pub snapshot: usize,
    pub load_id: String,
    pub from: PhaseSet,
    pub to: PhaseSet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalancePlan {
    /// Assignment for each committed snapshot `1..=t1`.
    pub assignments: Vec<PhaseAssignment>,
    /// Certified worst single-phase imbalance over the committed period (kW).
    pub u: f64,
    /// Certified worst single-phase imbalance over the advisory period (kW).
    pub v: f64,
    /// Assignment held over the advisory period; equals the last committed one.
    pub advisory_assignment: PhaseAssignment,
    pub swap_events: Vec<SwapEvent>,
    pub objective: f64,
    pub gap: f64,
}

impl BalancePlan {
    pub fn terminal(&self) -> &PhaseAssignment {
        self.assignments.last().expect("plan has at least one snapshot")
    }

    pub fn total_swaps(&self) -> usize {
        self.swap_events.len()
    }
}

/// Swap events between consecutive assignments, starting from `initial`.
pub fn swap_events(
    initial: &PhaseAssignment,
    assignments: &[PhaseAssignment],
    load_ids: &[String],
) -> Vec<SwapEvent> {
    let mut out = Vec::new();
    let mut prev = initial;
    for (t, cur) in assignments.iter().enumerate() {
        for i in 0..cur.len() {
            let (from, to) = (prev.phases_of(i), cur.phases_of(i));
            if from != to {
                out.push(SwapEvent {
                    snapshot: t + 1,
                    load_id: load_ids[i].clone(),
                    from,
                    to,
                });
            }
        }
        prev = cur;
    }
    out
}
