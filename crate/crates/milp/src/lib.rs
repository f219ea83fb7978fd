//! Small self-contained MILP toolkit: instances with binary and nonnegative
//! continuous variables, a sparse bounded primal simplex, best-first
//! branch-and-bound with gap control, and MPS import/export.

mod bnb;
mod error;
mod instance;
mod lp;
mod lu;
mod mps;
mod simplex;

pub use bnb::{
    relative_gap, solve_milp, Branching, MilpSolution, MilpStatus, SolveConfig, TracePoint,
    INTEGRALITY_TOL,
};
pub use error::{MilpError, Result};
pub use instance::{Constraint, MilpInstance, RowSense, VarId, VarKind, Variable};
pub use lp::{solve_lp, BoundOverrides, LpSolution, LpStatus};
pub use mps::{export_mps, parse_mps, read_mps, sidecar_path, write_mps, MpsDocument, NameMap};
