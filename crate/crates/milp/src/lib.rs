//! Exact solver for small mixed-binary linear programs.
//!
//! Programs are always maximised and every variable carries finite bounds.
//! LP relaxations are solved with a bounded-variable dual simplex on a dense
//! tableau; binaries are resolved by depth-first branch-and-bound. An
//! exhaustive enumeration over binary fixings is provided as a test oracle.

mod branch;
mod error;
mod program;
mod simplex;

pub use branch::{enumerate_binaries, solve_milp, MilpOptions, DEFAULT_NODE_LIMIT, MAX_ENUMERATED_BINARIES};
pub use error::SolverError;
pub use program::{Constraint, MixedIntegerProgram, Relation, VarId, Variable};
pub use simplex::solve_lp;

/// Absolute tolerance for constraint residuals of an accepted solution.
pub const FEASIBILITY_TOL: f64 = 1e-6;

/// Tolerance within which a binary value is treated as integral.
pub const INTEGRALITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Optimal,
    Infeasible,
    /// Never produced for programs with finite bounds; kept so callers can
    /// match exhaustively on the full set of LP outcomes.
    Unbounded,
}

/// Result of an LP or MILP solve.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub status: Status,
    /// One value per program variable. Empty unless `status` is optimal.
    pub values: Vec<f64>,
    /// Objective including the program's constant term.
    pub objective_value: f64,
    /// Branch-and-bound nodes explored (1 for a plain LP solve).
    pub nodes: u64,
}

impl Solution {
    pub fn infeasible(nodes: u64) -> Self {
        Solution {
            status: Status::Infeasible,
            values: Vec::new(),
            objective_value: f64::NEG_INFINITY,
            nodes,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }

    pub fn value(&self, var: VarId) -> f64 {
        self.values[var.index()]
    }
}
