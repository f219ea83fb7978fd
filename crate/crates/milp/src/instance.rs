//! Standard-form MILP instances: a variable registry, linear rows and
//! free-form semantic tags attached to variables.
//!
//! All variables are nonnegative. Binaries carry the implicit bounds `[0, 1]`.
//! The objective is always minimized.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{MilpError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VarId(pub usize);

impl VarId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VarKind {
    /// Continuous on `[0, +inf)`.
    Continuous,
    /// Integer on `[0, 1]`.
    Binary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub objective: f64,
}

impl Variable {
    pub fn upper_bound(&self) -> f64 {
        match self.kind {
            VarKind::Continuous => f64::INFINITY,
            VarKind::Binary => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RowSense {
    Le,
    Eq,
    Ge,
}

impl fmt::Display for RowSense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RowSense::Le => "<=",
            RowSense::Eq => "=",
            RowSense::Ge => ">=",
        })
    }
}

/// A linear row `sum(coef * var) <sense> rhs`. Terms are sorted by variable
/// index with duplicates merged and exact zeros removed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub name: String,
    pub terms: Vec<(VarId, f64)>,
    pub sense: RowSense,
    pub rhs: f64,
}

impl Constraint {
    pub fn activity(&self, values: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, c)| c * values[v.0]).sum()
    }

    /// Amount by which `values` violate this row (0 when satisfied).
    pub fn violation(&self, values: &[f64]) -> f64 {
        let lhs = self.activity(values);
        match self.sense {
            RowSense::Le => (lhs - self.rhs).max(0.0),
            RowSense::Ge => (self.rhs - lhs).max(0.0),
            RowSense::Eq => (lhs - self.rhs).abs(),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct MilpInstance {
    name: String,
    variables: Vec<Variable>,
    constraints: Vec<Constraint>,
    metadata: BTreeMap<String, String>,
    var_index: HashMap<String, VarId>,
    row_index: HashMap<String, usize>,
}

impl PartialEq for MilpInstance {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
            && self.variables == other.variables
            && self.constraints == other.constraints
            && self.metadata == other.metadata
    }
}

impl MilpInstance {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            ..Self::default()
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn add_variable(
        &mut self,
        name: impl Into<String>,
        kind: VarKind,
        objective: f64,
    ) -> Result<VarId> {
        let name = name.into();
        if !objective.is_finite() {
            return Err(MilpError::NonFinite(name));
        }
        if self.var_index.contains_key(&name) {
            return Err(MilpError::DuplicateVariable(name));
        }
        let id = VarId(self.variables.len());
        self.var_index.insert(name.clone(), id);
        self.variables.push(Variable {
            name,
            kind,
            objective,
        });
        Ok(id)
    }

    pub fn add_continuous(&mut self, name: impl Into<String>, objective: f64) -> Result<VarId> {
        self.add_variable(name, VarKind::Continuous, objective)
    }

    pub fn add_binary(&mut self, name: impl Into<String>, objective: f64) -> Result<VarId> {
        self.add_variable(name, VarKind::Binary, objective)
    }

    pub fn set_objective(&mut self, var: VarId, coefficient: f64) -> Result<()> {
        let v = self
            .variables
            .get_mut(var.0)
            .ok_or_else(|| MilpError::UnknownVariable {
                row: "objective".into(),
                index: var.0,
            })?;
        if !coefficient.is_finite() {
            return Err(MilpError::NonFinite(v.name.clone()));
        }
        v.objective = coefficient;
        Ok(())
    }

    /// Adds a row. Terms are canonicalized (sorted, merged, zeros dropped).
    pub fn add_constraint<I>(
        &mut self,
        name: impl Into<String>,
        terms: I,
        sense: RowSense,
        rhs: f64,
    ) -> Result<usize>
    where
        I: IntoIterator<Item = (VarId, f64)>,
    {
        let name = name.into();
        if self.row_index.contains_key(&name) {
            return Err(MilpError::DuplicateConstraint(name));
        }
        if !rhs.is_finite() {
            return Err(MilpError::NonFinite(name));
        }
        let mut terms: Vec<(VarId, f64)> = terms.into_iter().collect();
        for &(v, c) in &terms {
            if v.0 >= self.variables.len() {
                return Err(MilpError::UnknownVariable {
                    row: name,
                    index: v.0,
                });
            }
            if !c.is_finite() {
                return Err(MilpError::NonFinite(name));
            }
        }
        terms.sort_by_key(|&(v, _)| v);
        let mut merged: Vec<(VarId, f64)> = Vec::with_capacity(terms.len());
        for (v, c) in terms {
            match merged.last_mut() {
                Some(last) if last.0 == v => last.1 += c,
                _ => merged.push((v, c)),
            }
        }
        merged.retain(|&(_, c)| c != 0.0);

        let idx = self.constraints.len();
        self.row_index.insert(name.clone(), idx);
        self.constraints.push(Constraint {
            name,
            terms: merged,
            sense,
            rhs,
        });
        Ok(idx)
    }

    /// Attaches a semantic tag to a variable, replacing any previous tag.
    pub fn tag(&mut self, var: VarId, tag: impl Into<String>) {
        let name = self.variables[var.0].name.clone();
        self.metadata.insert(name, tag.into());
    }

    pub fn set_metadata(&mut self, metadata: BTreeMap<String, String>) {
        self.metadata = metadata;
    }

    pub fn metadata(&self) -> &BTreeMap<String, String> {
        &self.metadata
    }

    pub fn tag_of(&self, var: VarId) -> Option<&str> {
        self.metadata
            .get(&self.variables[var.0].name)
            .map(String::as_str)
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn variable(&self, var: VarId) -> &Variable {
        &self.variables[var.0]
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn var_by_name(&self, name: &str) -> Option<VarId> {
        self.var_index.get(name).copied()
    }

    pub fn row_by_name(&self, name: &str) -> Option<usize> {
        self.row_index.get(name).copied()
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn num_rows(&self) -> usize {
        self.constraints.len()
    }

    pub fn binaries(&self) -> impl Iterator<Item = VarId> + '_ {
        self.variables
            .iter()
            .enumerate()
            .filter(|(_, v)| v.kind == VarKind::Binary)
            .map(|(i, _)| VarId(i))
    }

    pub fn num_binaries(&self) -> usize {
        self.binaries().count()
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.variables
            .iter()
            .zip(values)
            .map(|(v, x)| v.objective * x)
            .sum()
    }

    /// Largest violation over rows and variable bounds. Integrality is not
    /// part of this measure.
    pub fn max_violation(&self, values: &[f64]) -> f64 {
        let rows = self
            .constraints
            .iter()
            .map(|c| c.violation(values))
            .fold(0.0, f64::max);
        let bounds = self
            .variables
            .iter()
            .zip(values)
            .map(|(v, &x)| (-x).max(x - v.upper_bound()).max(0.0))
            .fold(0.0, f64::max);
        rows.max(bounds)
    }

    /// Largest distance of a binary variable from {0, 1}.
    pub fn max_fractionality(&self, values: &[f64]) -> f64 {
        self.binaries()
            .map(|v| {
                let x = values[v.0];
                (x - x.round()).abs()
            })
            .fold(0.0, f64::max)
    }
}
