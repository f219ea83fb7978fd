//! Bounded-variable revised primal simplex.
//!
//! Rows are written as `A x + s = b` with one logical `s_i` per row whose
//! bounds encode the row sense. Phase 1 minimizes the sum of bound
//! infeasibilities of basic variables (composite method), phase 2 the true
//! objective. Pricing is Dantzig's rule; after a streak of degenerate pivots
//! the entering and leaving choices switch to Bland's rule until the
//! objective moves again.

use log::{debug, trace};

use crate::error::{MilpError, Result};
use crate::instance::{MilpInstance, RowSense, VarKind};
use crate::lu::SparseLu;

pub(crate) const FEAS_TOL: f64 = 1e-9;
const OPT_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const DEGENERATE_STREAK: usize = 50;
const REFACTOR_INTERVAL: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Column-compressed constraint matrix plus costs and bounds.
#[derive(Debug, Clone)]
pub(crate) struct LpData {
    pub m: usize,
    pub n: usize,
    col_start: Vec<usize>,
    row_idx: Vec<usize>,
    vals: Vec<f64>,
    pub cost: Vec<f64>,
    pub rhs: Vec<f64>,
    /// Bounds for structurals followed by logicals, length `n + m`.
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl LpData {
    pub fn from_instance(inst: &MilpInstance) -> Self {
        let n = inst.num_vars();
        let m = inst.num_rows();
        let mut counts = vec![0usize; n + 1];
        for c in inst.constraints() {
            for &(v, _) in &c.terms {
                counts[v.0 + 1] += 1;
            }
        }
        for j in 0..n {
            counts[j + 1] += counts[j];
        }
        let col_start = counts.clone();
        let mut fill = counts;
        let nnz = col_start[n];
        let mut row_idx = vec![0; nnz];
        let mut vals = vec![0.0; nnz];
        for (i, c) in inst.constraints().iter().enumerate() {
            for &(v, a) in &c.terms {
                let k = fill[v.0];
                row_idx[k] = i;
                vals[k] = a;
                fill[v.0] += 1;
            }
        }

        let mut lower = Vec::with_capacity(n + m);
        let mut upper = Vec::with_capacity(n + m);
        for v in inst.variables() {
            lower.push(0.0);
            upper.push(match v.kind {
                VarKind::Continuous => f64::INFINITY,
                VarKind::Binary => 1.0,
            });
        }
        for c in inst.constraints() {
            let (lo, hi) = match c.sense {
                RowSense::Le => (0.0, f64::INFINITY),
                RowSense::Ge => (f64::NEG_INFINITY, 0.0),
                RowSense::Eq => (0.0, 0.0),
            };
            lower.push(lo);
            upper.push(hi);
        }

        LpData {
            m,
            n,
            col_start,
            row_idx,
            vals,
            cost: inst.variables().iter().map(|v| v.objective).collect(),
            rhs: inst.constraints().iter().map(|c| c.rhs).collect(),
            lower,
            upper,
        }
    }

    fn column(&self, j: usize) -> Column<'_> {
        if j < self.n {
            let r = self.col_start[j]..self.col_start[j + 1];
            Column::Structural(&self.row_idx[r.clone()], &self.vals[r])
        } else {
            Column::Logical(j - self.n)
        }
    }

    fn dot_column(&self, j: usize, y: &[f64]) -> f64 {
        match self.column(j) {
            Column::Structural(rows, vals) => rows.iter().zip(vals).map(|(&i, &a)| a * y[i]).sum(),
            Column::Logical(i) => y[i],
        }
    }
}

/// Triangular crash basis for cold starts. Equality rows are visited in
/// order; each one trades its (fixed) logical for a structural that has a
/// nonzero in the row and none in rows already traded, so the basis stays
/// triangular. Candidates whose resulting value respects their bounds are
/// preferred, then short columns, then large pivots.
fn crash(data: &LpData, lower: &[f64], upper: &[f64]) -> Vec<VarStatus> {
    let (n, m) = (data.n, data.m);
    let mut status: Vec<VarStatus> = (0..n + m)
        .map(|j| if j >= n { VarStatus::Basic } else { VarStatus::AtLower })
        .collect();
    let mut x: Vec<f64> = (0..n)
        .map(|j| nonbasic_value(nonbasic_status(VarStatus::AtLower, lower[j], upper[j]), lower[j], upper[j]))
        .collect();

    let mut row_start = vec![0usize; m + 1];
    for &i in &data.row_idx {
        row_start[i + 1] += 1;
    }
    for i in 0..m {
        row_start[i + 1] += row_start[i];
    }
    let mut fill = row_start.clone();
    let mut row_col = vec![0usize; data.row_idx.len()];
    let mut row_val = vec![0.0; data.row_idx.len()];
    for j in 0..n {
        for k in data.col_start[j]..data.col_start[j + 1] {
            let i = data.row_idx[k];
            row_col[fill[i]] = j;
            row_val[fill[i]] = data.vals[k];
            fill[i] += 1;
        }
    }

    let mut blocked = vec![false; m];
    let mut chosen = vec![false; n];
    for r in 0..m {
        if lower[n + r] != upper[n + r] {
            continue;
        }
        let entries = row_start[r]..row_start[r + 1];
        let residual = data.rhs[r]
            - entries.clone().map(|k| row_val[k] * x[row_col[k]]).sum::<f64>();
        let mut best: Option<((bool, usize, f64, usize), usize, f64)> = None;
        for k in entries {
            let (j, a) = (row_col[k], row_val[k]);
            if chosen[j] || lower[j] == upper[j] || a.abs() < 1e-7 {
                continue;
            }
            let col = data.col_start[j]..data.col_start[j + 1];
            if data.row_idx[col.clone()].iter().any(|&i| blocked[i]) {
                continue;
            }
            let value = x[j] + residual / a;
            let feasible = value >= lower[j] - FEAS_TOL && value <= upper[j] + FEAS_TOL;
            let key = (!feasible, col.len(), -a.abs(), j);
            let better = match &best {
                None => true,
                Some((bk, _, _)) => {
                    (key.0, key.1).cmp(&(bk.0, bk.1)).then(key.2.total_cmp(&bk.2)).then(key.3.cmp(&bk.3))
                        == std::cmp::Ordering::Less
                }
            };
            if better {
                best = Some((key, j, value));
            }
        }
        if let Some((_, j, value)) = best {
            chosen[j] = true;
            blocked[r] = true;
            x[j] = value;
            status[j] = VarStatus::Basic;
            status[n + r] = VarStatus::AtLower;
        }
    }
    status
}

enum Column<'a> {
    Structural(&'a [usize], &'a [f64]),
    Logical(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
enum VarStatus {
    Basic = 0,
    AtLower = 1,
    AtUpper = 2,
    Free = 3,
}

/// Compact basis snapshot used for warm starts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Basis(Vec<u8>);

#[derive(Debug, Clone)]
pub(crate) struct SimplexOutcome {
    pub status: LpStatus,
    /// Values of structurals followed by logicals.
    pub x: Vec<f64>,
    /// Row duals of the phase-2 basis.
    pub y: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub basis: Basis,
}

struct Simplex<'a> {
    data: &'a LpData,
    lower: &'a [f64],
    upper: &'a [f64],
    m: usize,
    head: Vec<usize>,
    status: Vec<VarStatus>,
    x: Vec<f64>,
    lu: SparseLu,
    iterations: usize,
    // scratch
    work_row: Vec<f64>,
    work_pos: Vec<f64>,
    alpha: Vec<f64>,
    y: Vec<f64>,
    cost_buf: Vec<f64>,
}

pub(crate) fn solve(
    data: &LpData,
    lower: &[f64],
    upper: &[f64],
    warm: Option<&Basis>,
    max_iterations: Option<usize>,
) -> Result<SimplexOutcome> {
    let n_total = data.n + data.m;
    debug_assert_eq!(lower.len(), n_total);
    for j in 0..n_total {
        if lower[j] > upper[j] {
            return Ok(SimplexOutcome {
                status: LpStatus::Infeasible,
                x: vec![0.0; n_total],
                y: vec![0.0; data.m],
                objective: f64::INFINITY,
                iterations: 0,
                basis: Basis(vec![VarStatus::AtLower as u8; n_total]),
            });
        }
    }
    let mut s = Simplex::new(data, lower, upper, warm)?;
    let limit = max_iterations.unwrap_or(50 * (n_total + 100));
    s.run(limit)
}

impl<'a> Simplex<'a> {
    fn new(data: &'a LpData, lower: &'a [f64], upper: &'a [f64], warm: Option<&Basis>) -> Result<Self> {
        let m = data.m;
        let n_total = data.n + m;
        let mut status: Vec<VarStatus> = match warm {
            Some(b) if b.0.len() == n_total && b.0.iter().filter(|&&s| s == 0).count() == m => b
                .0
                .iter()
                .map(|&s| match s {
                    0 => VarStatus::Basic,
                    1 => VarStatus::AtLower,
                    2 => VarStatus::AtUpper,
                    _ => VarStatus::Free,
                })
                .collect(),
            _ => crash(data, lower, upper),
        };
        for j in 0..n_total {
            if status[j] != VarStatus::Basic {
                status[j] = nonbasic_status(status[j], lower[j], upper[j]);
            }
        }
        let head: Vec<usize> = (0..n_total).filter(|&j| status[j] == VarStatus::Basic).collect();
        let mut x = vec![0.0; n_total];
        for j in 0..n_total {
            x[j] = nonbasic_value(status[j], lower[j], upper[j]);
        }
        let mut s = Simplex {
            data,
            lower,
            upper,
            m,
            head,
            status,
            x,
            lu: SparseLu::factorize(0, Vec::new()).map_err(|_| MilpError::Numerical("empty".into()))?,
            iterations: 0,
            work_row: vec![0.0; m],
            work_pos: vec![0.0; m],
            alpha: vec![0.0; m],
            y: vec![0.0; m],
            cost_buf: vec![0.0; m],
        };
        s.refactor()?;
        Ok(s)
    }

    fn basis_columns(&self) -> Vec<Vec<(usize, f64)>> {
        self.head
            .iter()
            .map(|&j| match self.data.column(j) {
                Column::Structural(rows, vals) => rows.iter().copied().zip(vals.iter().copied()).collect(),
                Column::Logical(i) => vec![(i, 1.0)],
            })
            .collect()
    }

    /// Refactorizes the basis, repairing singular bases with logicals, and
    /// recomputes basic values from scratch.
    fn refactor(&mut self) -> Result<()> {
        for _attempt in 0..10 {
            match SparseLu::factorize(self.m, self.basis_columns()) {
                Ok(lu) => {
                    self.lu = lu;
                    self.recompute_basic_values();
                    return Ok(());
                }
                Err(sing) => {
                    debug!("singular basis: replacing {} columns with logicals", sing.positions.len());
                    for (&pos, &row) in sing.positions.iter().zip(&sing.rows) {
                        let out = self.head[pos];
                        let logical = self.data.n + row;
                        self.status[out] = nonbasic_status(VarStatus::AtLower, self.lower[out], self.upper[out]);
                        self.x[out] = nonbasic_value(self.status[out], self.lower[out], self.upper[out]);
                        self.head[pos] = logical;
                        self.status[logical] = VarStatus::Basic;
                    }
                }
            }
        }
        Err(MilpError::Numerical("could not repair a singular basis".into()))
    }

    fn recompute_basic_values(&mut self) {
        let data = self.data;
        self.work_row.copy_from_slice(&data.rhs);
        for j in 0..data.n + self.m {
            if self.status[j] == VarStatus::Basic {
                continue;
            }
            let xj = self.x[j];
            if xj == 0.0 {
                continue;
            }
            match data.column(j) {
                Column::Structural(rows, vals) => {
                    for (&i, &a) in rows.iter().zip(vals) {
                        self.work_row[i] -= a * xj;
                    }
                }
                Column::Logical(i) => self.work_row[i] -= xj,
            }
        }
        self.lu.ftran(&mut self.work_row, &mut self.work_pos);
        for (p, &j) in self.head.iter().enumerate() {
            self.x[j] = self.work_pos[p];
        }
    }

    fn infeasibility(&self) -> f64 {
        self.head
            .iter()
            .map(|&j| {
                let v = self.x[j];
                (self.lower[j] - v).max(v - self.upper[j]).max(0.0)
            })
            .sum()
    }

    /// Basic cost vector for the current phase; returns whether phase 1 is active.
    fn basic_costs(&self, out: &mut [f64]) -> bool {
        let mut phase1 = false;
        for (p, &j) in self.head.iter().enumerate() {
            let v = self.x[j];
            if v < self.lower[j] - FEAS_TOL {
                out[p] = -1.0;
                phase1 = true;
            } else if v > self.upper[j] + FEAS_TOL {
                out[p] = 1.0;
                phase1 = true;
            } else {
                out[p] = 0.0;
            }
        }
        if !phase1 {
            for (p, &j) in self.head.iter().enumerate() {
                out[p] = if j < self.data.n { self.data.cost[j] } else { 0.0 };
            }
        }
        phase1
    }

    fn compute_duals(&mut self) -> bool {
        let mut cb = std::mem::take(&mut self.cost_buf);
        let phase1 = self.basic_costs(&mut cb);
        self.lu.btran(&mut cb, &mut self.y);
        self.cost_buf = cb;
        phase1
    }

    fn objective(&self) -> f64 {
        (0..self.data.n).map(|j| self.data.cost[j] * self.x[j]).sum()
    }

    fn run(&mut self, limit: usize) -> Result<SimplexOutcome> {
        let n_total = self.data.n + self.m;
        let mut stall = 0usize;
        let mut bland = false;
        let mut confirmations = 0usize;

        loop {
            if self.iterations >= limit {
                return Err(MilpError::Numerical(format!(
                    "iteration limit {limit} reached ({} rows, {} columns)",
                    self.m, self.data.n
                )));
            }
            if self.lu.num_etas() >= REFACTOR_INTERVAL {
                self.refactor()?;
            }

            let phase1 = self.compute_duals();

            // Pricing.
            let mut entering: Option<(usize, f64)> = None;
            for j in 0..n_total {
                let st = self.status[j];
                if st == VarStatus::Basic || self.lower[j] == self.upper[j] {
                    continue;
                }
                let cj = if phase1 || j >= self.data.n { 0.0 } else { self.data.cost[j] };
                let d = cj - self.data.dot_column(j, &self.y);
                let eligible = match st {
                    VarStatus::AtLower => d < -OPT_TOL,
                    VarStatus::AtUpper => d > OPT_TOL,
                    VarStatus::Free => d.abs() > OPT_TOL,
                    VarStatus::Basic => false,
                };
                if !eligible {
                    continue;
                }
                if bland {
                    entering = Some((j, d));
                    break;
                }
                if entering.map_or(true, |(_, bd)| d.abs() > bd.abs()) {
                    entering = Some((j, d));
                }
            }

            let Some((q, dq)) = entering else {
                // Confirm on a fresh factorization before concluding.
                if self.lu.num_etas() > 0 && confirmations < 3 {
                    confirmations += 1;
                    self.refactor()?;
                    continue;
                }
                if phase1 {
                    debug!("phase 1 stalled with infeasibility {:e}", self.infeasibility());
                    return Ok(self.finish(LpStatus::Infeasible));
                }
                return Ok(self.finish(LpStatus::Optimal));
            };
            confirmations = 0;
            let dir = if dq < 0.0 { 1.0 } else { -1.0 };

            // FTRAN the entering column.
            self.work_row.iter_mut().for_each(|v| *v = 0.0);
            match self.data.column(q) {
                Column::Structural(rows, vals) => {
                    for (&i, &a) in rows.iter().zip(vals) {
                        self.work_row[i] = a;
                    }
                }
                Column::Logical(i) => self.work_row[i] = 1.0,
            }
            self.lu.ftran(&mut self.work_row, &mut self.alpha);

            let (leave, theta) = self.ratio_test(dir, bland);
            let range = self.upper[q] - self.lower[q];

            let flip = match leave {
                None => range.is_finite(),
                Some(_) => range <= theta,
            };
            if leave.is_none() && !flip {
                if phase1 {
                    // Cannot happen in exact arithmetic; refresh and retry.
                    self.refactor()?;
                    self.iterations += 1;
                    continue;
                }
                return Ok(self.finish(LpStatus::Unbounded));
            }
            let step = if flip { range } else { theta };

            // Update values.
            if step != 0.0 {
                for (p, &j) in self.head.iter().enumerate() {
                    let a = self.alpha[p];
                    if a != 0.0 {
                        self.x[j] -= dir * a * step;
                    }
                }
                self.x[q] += dir * step;
            }

            if flip {
                self.status[q] = if dir > 0.0 { VarStatus::AtUpper } else { VarStatus::AtLower };
                self.x[q] = if dir > 0.0 { self.upper[q] } else { self.lower[q] };
            } else {
                let (p, to_upper) = leave.expect("leaving row");
                let out = self.head[p];
                self.x[out] = if to_upper { self.upper[out] } else { self.lower[out] };
                self.status[out] = if to_upper { VarStatus::AtUpper } else { VarStatus::AtLower };
                self.head[p] = q;
                self.status[q] = VarStatus::Basic;
                self.lu.push_eta(p, &self.alpha);
            }
            self.iterations += 1;

            if step * dq.abs() <= 1e-12 {
                stall += 1;
                if stall > DEGENERATE_STREAK && !bland {
                    trace!("switching to Bland's rule after {stall} degenerate pivots");
                    bland = true;
                }
            } else {
                stall = 0;
                bland = false;
            }
        }
    }

    /// Returns the leaving position (and whether it leaves at its upper bound)
    /// together with the step length.
    fn ratio_test(&self, dir: f64, bland: bool) -> (Option<(usize, bool)>, f64) {
        // Candidate: (position, rate magnitude, exact ratio, relaxed ratio, to_upper)
        let mut cands: Vec<(usize, f64, f64, f64, bool)> = Vec::new();
        for (p, &j) in self.head.iter().enumerate() {
            let a = self.alpha[p];
            if a.abs() <= PIVOT_TOL {
                continue;
            }
            let rate = -dir * a;
            let v = self.x[j];
            let (lo, hi) = (self.lower[j], self.upper[j]);
            if rate < 0.0 {
                let target = if v > hi + FEAS_TOL {
                    hi
                } else if v >= lo - FEAS_TOL {
                    lo
                } else {
                    continue;
                };
                if target == f64::NEG_INFINITY {
                    continue;
                }
                let exact = ((v - target) / -rate).max(0.0);
                let relaxed = (v - target + FEAS_TOL) / -rate;
                cands.push((p, -rate, exact, relaxed, target == hi));
            } else {
                let target = if v < lo - FEAS_TOL {
                    lo
                } else if v <= hi + FEAS_TOL {
                    hi
                } else {
                    continue;
                };
                if target == f64::INFINITY {
                    continue;
                }
                let exact = ((target - v) / rate).max(0.0);
                let relaxed = (target - v + FEAS_TOL) / rate;
                cands.push((p, rate, exact, relaxed, target == hi));
            }
        }
        if cands.is_empty() {
            return (None, f64::INFINITY);
        }
        if bland {
            let min = cands.iter().map(|c| c.2).fold(f64::INFINITY, f64::min);
            let best = cands
                .iter()
                .filter(|c| c.2 <= min + 1e-12)
                .min_by_key(|c| self.head[c.0])
                .expect("nonempty");
            return (Some((best.0, best.4)), best.2);
        }
        let bound = cands.iter().map(|c| c.3).fold(f64::INFINITY, f64::min);
        let best = cands
            .iter()
            .filter(|c| c.2 <= bound)
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(b.0.cmp(&a.0)))
            .expect("harris pass keeps the minimum ratio");
        (Some((best.0, best.4)), best.2)
    }

    fn finish(&mut self, status: LpStatus) -> SimplexOutcome {
        if status == LpStatus::Optimal {
            self.compute_duals();
        }
        // A variable fixed at its natural upper bound is recorded as at-upper so
        // that relaxing the fixing keeps the snapshot primal feasible.
        let data = self.data;
        let basis = Basis(
            self.status
                .iter()
                .enumerate()
                .map(|(j, &s)| {
                    if s == VarStatus::AtLower && self.lower[j] == self.upper[j] && self.x[j] == data.upper[j] {
                        VarStatus::AtUpper as u8
                    } else {
                        s as u8
                    }
                })
                .collect(),
        );
        SimplexOutcome {
            status,
            x: self.x.clone(),
            y: self.y.clone(),
            objective: if status == LpStatus::Optimal { self.objective() } else { f64::NAN },
            iterations: self.iterations,
            basis,
        }
    }
}

fn nonbasic_status(preferred: VarStatus, lo: f64, hi: f64) -> VarStatus {
    match preferred {
        VarStatus::AtUpper if hi.is_finite() => VarStatus::AtUpper,
        _ if lo.is_finite() => VarStatus::AtLower,
        _ if hi.is_finite() => VarStatus::AtUpper,
        _ => VarStatus::Free,
    }
}

fn nonbasic_value(st: VarStatus, lo: f64, hi: f64) -> f64 {
    match st {
        VarStatus::AtLower => lo,
        VarStatus::AtUpper => hi,
        VarStatus::Free | VarStatus::Basic => 0.0,
    }
}
