//! LP relaxation entry point.

use std::collections::BTreeMap;

use crate::error::{MilpError, Result};
use crate::instance::{MilpInstance, VarId};
use crate::simplex::{self, LpData};

pub use crate::simplex::LpStatus;

/// Per-variable bound overrides, intersected with the natural bounds
/// (`[0, inf)` for continuous variables, `[0, 1]` for binaries).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BoundOverrides(BTreeMap<VarId, (f64, f64)>);

impl BoundOverrides {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn fix(&mut self, var: VarId, value: f64) -> &mut Self {
        self.0.insert(var, (value, value));
        self
    }

    pub fn set(&mut self, var: VarId, lower: f64, upper: f64) -> &mut Self {
        self.0.insert(var, (lower, upper));
        self
    }

    pub fn iter(&self) -> impl Iterator<Item = (VarId, (f64, f64))> + '_ {
        self.0.iter().map(|(&v, &b)| (v, b))
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Objective value; `NaN` unless optimal.
    pub objective: f64,
    /// Structural values indexed by [`VarId`].
    pub values: Vec<f64>,
    /// Row duals `y` with reduced costs `c - A^T y`.
    pub duals: Vec<f64>,
    pub iterations: usize,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    pub fn value(&self, var: VarId) -> f64 {
        self.values[var.0]
    }
}

/// Solves the LP relaxation of `instance` under the given bound overrides.
pub fn solve_lp(instance: &MilpInstance, overrides: &BoundOverrides) -> Result<LpSolution> {
    if instance.num_vars() == 0 {
        return Err(MilpError::Empty);
    }
    let data = LpData::from_instance(instance);
    let mut lower = data.lower.clone();
    let mut upper = data.upper.clone();
    for (v, (lo, hi)) in overrides.iter() {
        if v.0 >= data.n || lo.is_nan() || hi.is_nan() {
            return Err(MilpError::InvalidBound {
                index: v.0,
                lower: lo,
                upper: hi,
            });
        }
        lower[v.0] = lower[v.0].max(lo);
        upper[v.0] = upper[v.0].min(hi);
    }
    let out = simplex::solve(&data, &lower, &upper, None, None)?;
    Ok(LpSolution {
        status: out.status,
        objective: out.objective,
        values: out.x[..data.n].to_vec(),
        duals: out.y,
        iterations: out.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::RowSense;

    #[test]
    fn min_x_with_lower_bound_row() {
        let mut m = MilpInstance::new("lp");
        let x = m.add_continuous("x", 1.0).unwrap();
        m.add_constraint("c", [(x, 1.0)], RowSense::Ge, 3.0).unwrap();
        let s = solve_lp(&m, &BoundOverrides::new()).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective - 3.0).abs() < 1e-12);
        assert!((s.duals[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn detects_infeasible_and_unbounded() {
        let mut m = MilpInstance::new("lp");
        let x = m.add_continuous("x", 1.0).unwrap();
        m.add_constraint("a", [(x, 1.0)], RowSense::Ge, 3.0).unwrap();
        m.add_constraint("b", [(x, 1.0)], RowSense::Le, 2.0).unwrap();
        assert_eq!(solve_lp(&m, &BoundOverrides::new()).unwrap().status, LpStatus::Infeasible);

        let mut m = MilpInstance::new("lp");
        let x = m.add_continuous("x", -1.0).unwrap();
        let y = m.add_continuous("y", 0.0).unwrap();
        m.add_constraint("a", [(x, 1.0), (y, -1.0)], RowSense::Le, 1.0).unwrap();
        assert_eq!(solve_lp(&m, &BoundOverrides::new()).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn overrides_fix_binaries() {
        let mut m = MilpInstance::new("lp");
        let x = m.add_binary("x", -1.0).unwrap();
        let y = m.add_binary("y", -1.0).unwrap();
        m.add_constraint("c", [(x, 1.0), (y, 1.0)], RowSense::Le, 1.5).unwrap();
        let s = solve_lp(&m, &BoundOverrides::new()).unwrap();
        assert!((s.objective + 1.5).abs() < 1e-12);
        let mut o = BoundOverrides::new();
        o.fix(x, 0.0);
        let s = solve_lp(&m, &o).unwrap();
        assert!((s.objective + 1.0).abs() < 1e-12);
        assert_eq!(s.value(x), 0.0);
    }

    #[test]
    fn conflicting_override_is_infeasible() {
        let mut m = MilpInstance::new("lp");
        let x = m.add_binary("x", 1.0).unwrap();
        let mut o = BoundOverrides::new();
        o.set(x, 2.0, 3.0);
        assert_eq!(solve_lp(&m, &o).unwrap().status, LpStatus::Infeasible);
    }
}
