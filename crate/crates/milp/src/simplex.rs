//! Bounded-variable dual simplex on a dense tableau.
//!
//! Every row `i` of the program becomes `sum_j a_ij x_j - r_i = 0` with a
//! logical variable `r_i` whose bounds encode the relation. Because every
//! column is boxed, any basis can be made dual feasible by parking each
//! nonbasic column at the bound matching the sign of its reduced cost. The
//! solver therefore never needs a phase one: it starts from the logical
//! basis (or from whatever basis a previous solve left behind) and runs the
//! dual simplex until the basic values are within bounds.

use crate::error::SolverError;
use crate::program::{MixedIntegerProgram, Relation};
use crate::{Solution, Status};

const PRIMAL_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const DUAL_TOL: f64 = 1e-11;
const DROP_TOL: f64 = 1e-14;
/// Non-improving iterations tolerated before switching to Bland's rule.
const STALL_LIMIT: u32 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Position {
    Basic(usize),
    AtLower,
    AtUpper,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum LpOutcome {
    Optimal,
    Infeasible,
    /// The dual bound fell below the caller's cutoff before optimality.
    CutOff,
}

/// Solves the LP relaxation of `program` (binaries relaxed to their bounds).
pub fn solve_lp(program: &MixedIntegerProgram) -> Result<Solution, SolverError> {
    program.validate()?;
    let mut engine = match Tableau::new(program) {
        Some(engine) => engine,
        None => return Ok(Solution::infeasible(1)),
    };
    match engine.solve(None)? {
        LpOutcome::Optimal => Ok(Solution {
            status: Status::Optimal,
            values: engine.structural_values(),
            objective_value: engine.objective(),
            nodes: 1,
        }),
        _ => Ok(Solution::infeasible(1)),
    }
}

/// Dense simplex tableau `B^-1 [A | -I]` with reduced costs and bounds.
pub(crate) struct Tableau {
    rows: usize,
    structurals: usize,
    cols: usize,
    /// Row-major, `rows * cols`.
    t: Vec<f64>,
    reduced: Vec<f64>,
    cost: Vec<f64>,
    constant: f64,
    lower: Vec<f64>,
    upper: Vec<f64>,
    x: Vec<f64>,
    basis: Vec<usize>,
    position: Vec<Position>,
    /// Sparse copy of the original rows (structural part only).
    a_rows: Vec<Vec<(usize, f64)>>,
    iteration_limit: u64,
}

impl Tableau {
    /// Builds the logical-basis tableau. Returns `None` when a row is
    /// trivially infeasible (empty row with a violated right-hand side, or
    /// a right-hand side outside the row's activity range).
    pub(crate) fn new(program: &MixedIntegerProgram) -> Option<Self> {
        let n = program.num_vars();
        let mut a_rows: Vec<Vec<(usize, f64)>> = Vec::new();
        let mut row_bounds: Vec<(f64, f64)> = Vec::new();

        for c in &program.constraints {
            let mut terms: Vec<(usize, f64)> = Vec::with_capacity(c.terms.len());
            for &(v, a) in &c.terms {
                match terms.iter_mut().find(|(j, _)| *j == v.index()) {
                    Some(e) => e.1 += a,
                    None => terms.push((v.index(), a)),
                }
            }
            terms.retain(|&(_, a)| a != 0.0);
            terms.sort_by_key(|&(j, _)| j);

            let (mut min_act, mut max_act) = (0.0, 0.0);
            for &(j, a) in &terms {
                let (l, u) = (program.variables[j].lower, program.variables[j].upper);
                if a > 0.0 {
                    min_act += a * l;
                    max_act += a * u;
                } else {
                    min_act += a * u;
                    max_act += a * l;
                }
            }
            let slack = PRIMAL_TOL * (1.0 + c.rhs.abs());
            let bounds = match c.relation {
                Relation::LessEq => {
                    if c.rhs < min_act - slack {
                        return None;
                    }
                    (min_act.min(c.rhs), c.rhs)
                }
                Relation::GreaterEq => {
                    if c.rhs > max_act + slack {
                        return None;
                    }
                    (c.rhs, max_act.max(c.rhs))
                }
                Relation::Equal => {
                    if c.rhs < min_act - slack || c.rhs > max_act + slack {
                        return None;
                    }
                    (c.rhs, c.rhs)
                }
            };
            if terms.is_empty() {
                // Feasibility of an empty row was settled above.
                continue;
            }
            a_rows.push(terms);
            row_bounds.push(bounds);
        }

        let m = a_rows.len();
        let cols = n + m;
        let mut cost = vec![0.0; cols];
        cost[..n].copy_from_slice(&program.objective_dense());
        let mut lower = Vec::with_capacity(cols);
        let mut upper = Vec::with_capacity(cols);
        for v in &program.variables {
            lower.push(v.lower);
            upper.push(v.upper);
        }
        for &(l, u) in &row_bounds {
            lower.push(l);
            upper.push(u);
        }

        let mut tableau = Tableau {
            rows: m,
            structurals: n,
            cols,
            t: vec![0.0; m * cols],
            reduced: vec![0.0; cols],
            cost,
            constant: program.objective_constant,
            lower,
            upper,
            x: vec![0.0; cols],
            basis: Vec::new(),
            position: vec![Position::AtLower; cols],
            a_rows,
            iteration_limit: 50_000 + 50 * cols as u64,
        };
        tableau.reset_to_logical_basis();
        tableau.park_nonbasics();
        Some(tableau)
    }

    fn reset_to_logical_basis(&mut self) {
        let (m, n, cols) = (self.rows, self.structurals, self.cols);
        self.t.iter_mut().for_each(|v| *v = 0.0);
        for (i, row) in self.a_rows.iter().enumerate() {
            let base = i * cols;
            for &(j, a) in row {
                self.t[base + j] = -a;
            }
            self.t[base + n + i] = 1.0;
        }
        self.basis = (n..n + m).collect();
        for j in 0..n {
            if matches!(self.position[j], Position::Basic(_)) {
                self.position[j] = Position::AtLower;
            }
        }
        for i in 0..m {
            self.position[n + i] = Position::Basic(i);
        }
        self.reduced.copy_from_slice(&self.cost);
    }

    pub(crate) fn set_bounds(&mut self, col: usize, lower: f64, upper: f64) {
        self.lower[col] = lower;
        self.upper[col] = upper;
    }

    pub(crate) fn bounds(&self, col: usize) -> (f64, f64) {
        (self.lower[col], self.upper[col])
    }

    /// Moves every nonbasic column to the bound that keeps it dual feasible
    /// and recomputes the basic values.
    fn park_nonbasics(&mut self) {
        for j in 0..self.cols {
            let pos = match self.position[j] {
                Position::Basic(_) => continue,
                p => p,
            };
            let d = self.reduced[j];
            let pos = if self.lower[j] == self.upper[j] {
                Position::AtLower
            } else if d > DUAL_TOL {
                Position::AtUpper
            } else if d < -DUAL_TOL {
                Position::AtLower
            } else {
                pos
            };
            self.position[j] = pos;
            self.x[j] = match pos {
                Position::AtUpper => self.upper[j],
                _ => self.lower[j],
            };
        }
        self.recompute_basic_values();
    }

    fn recompute_basic_values(&mut self) {
        let cols = self.cols;
        for i in 0..self.rows {
            let row = &self.t[i * cols..(i + 1) * cols];
            let mut acc = 0.0;
            for (j, &tij) in row.iter().enumerate() {
                if tij != 0.0 && !matches!(self.position[j], Position::Basic(_)) {
                    acc -= tij * self.x[j];
                }
            }
            self.x[self.basis[i]] = acc;
        }
    }

    pub(crate) fn objective(&self) -> f64 {
        self.constant
            + self.cost[..self.structurals]
                .iter()
                .zip(&self.x)
                .map(|(c, x)| c * x)
                .sum::<f64>()
    }

    pub(crate) fn structural_values(&self) -> Vec<f64> {
        self.x[..self.structurals].to_vec()
    }

    fn infeasibility(&self, col: usize) -> f64 {
        let v = self.x[col];
        let tol = PRIMAL_TOL * (1.0 + v.abs().min(1e3));
        if v < self.lower[col] - tol {
            self.lower[col] - v
        } else if v > self.upper[col] + tol {
            v - self.upper[col]
        } else {
            0.0
        }
    }

    fn max_row_residual(&self) -> f64 {
        let n = self.structurals;
        self.a_rows
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let act: f64 = row.iter().map(|&(j, a)| a * self.x[j]).sum();
                (act - self.x[n + i]).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Rebuilds the tableau from the original rows for the current basis.
    fn reinvert(&mut self) {
        let target: Vec<usize> = self
            .basis
            .iter()
            .copied()
            .filter(|&j| j < self.structurals)
            .collect();
        let in_target = {
            let mut flags = vec![false; self.cols];
            for &j in &target {
                flags[j] = true;
            }
            flags
        };
        self.reset_to_logical_basis();
        for &q in &target {
            let mut best: Option<(usize, f64)> = None;
            for i in 0..self.rows {
                let b = self.basis[i];
                if b < self.structurals || in_target[b] {
                    continue;
                }
                let v = self.t[i * self.cols + q].abs();
                if v > 1e-10 && best.is_none_or(|(_, bv)| v > bv) {
                    best = Some((i, v));
                }
            }
            if let Some((r, _)) = best {
                let leaving = self.basis[r];
                self.pivot(r, q);
                self.position[leaving] = Position::AtLower;
            }
        }
        self.park_nonbasics();
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let cols = self.cols;
        let piv = self.t[r * cols + q];
        let row_r = r * cols;
        for v in &mut self.t[row_r..row_r + cols] {
            *v /= piv;
        }
        self.t[row_r + q] = 1.0;
        let nz: Vec<usize> = (0..cols)
            .filter(|&j| self.t[row_r + j] != 0.0)
            .collect();
        let pivot_row: Vec<f64> = nz.iter().map(|&j| self.t[row_r + j]).collect();

        for i in 0..self.rows {
            if i == r {
                continue;
            }
            let base = i * cols;
            let f = self.t[base + q];
            if f == 0.0 {
                continue;
            }
            for (&j, &pv) in nz.iter().zip(&pivot_row) {
                let cell = &mut self.t[base + j];
                *cell -= f * pv;
                if cell.abs() < DROP_TOL {
                    *cell = 0.0;
                }
            }
            self.t[base + q] = 0.0;
        }
        let dq = self.reduced[q];
        if dq != 0.0 {
            for (&j, &pv) in nz.iter().zip(&pivot_row) {
                self.reduced[j] -= dq * pv;
            }
        }
        self.reduced[q] = 0.0;

        let leaving = self.basis[r];
        self.basis[r] = q;
        self.position[q] = Position::Basic(r);
        self.position[leaving] = Position::AtLower;
        self.reduced[leaving] = -dq / piv;
    }

    /// Runs the dual simplex from the current basis. With a `cutoff`, stops
    /// early once the dual bound can no longer exceed it.
    pub(crate) fn solve(&mut self, cutoff: Option<f64>) -> Result<LpOutcome, SolverError> {
        self.park_nonbasics();
        let mut reinverted = false;
        let mut bland = false;
        let mut stall = 0u32;
        let mut best_bound = f64::INFINITY;
        let mut iterations = 0u64;

        loop {
            if let Some(c) = cutoff {
                if self.objective() <= c {
                    return Ok(LpOutcome::CutOff);
                }
            }

            // Leaving row: largest bound violation, or lowest column index
            // under Bland's rule.
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows {
                let col = self.basis[i];
                let inf = self.infeasibility(col);
                if inf <= 0.0 {
                    continue;
                }
                let better = match leave {
                    None => true,
                    Some((li, linf)) => {
                        if bland {
                            col < self.basis[li]
                        } else {
                            inf > linf
                        }
                    }
                };
                if better {
                    leave = Some((i, inf));
                }
            }

            let Some((r, _)) = leave else {
                if !reinverted && self.max_row_residual() > 1e-9 {
                    self.reinvert();
                    reinverted = true;
                    continue;
                }
                return Ok(LpOutcome::Optimal);
            };

            iterations += 1;
            if iterations > self.iteration_limit {
                return Err(SolverError::IterationLimit(self.iteration_limit));
            }

            let leaving = self.basis[r];
            let below = self.x[leaving] < self.lower[leaving];
            let target = if below { self.lower[leaving] } else { self.upper[leaving] };

            // Ratio test over nonbasic columns. alpha_j is the change of the
            // leaving variable per unit increase of x_j.
            let row = &self.t[r * self.cols..(r + 1) * self.cols];
            let mut enter: Option<(usize, f64, f64)> = None;
            for (j, &tij) in row.iter().enumerate() {
                if tij == 0.0 {
                    continue;
                }
                let pos = self.position[j];
                if matches!(pos, Position::Basic(_)) || self.lower[j] == self.upper[j] {
                    continue;
                }
                let alpha = -tij;
                let eligible = match (pos, below) {
                    (Position::AtLower, true) => alpha > PIVOT_TOL,
                    (Position::AtUpper, true) => alpha < -PIVOT_TOL,
                    (Position::AtLower, false) => alpha < -PIVOT_TOL,
                    (Position::AtUpper, false) => alpha > PIVOT_TOL,
                    _ => false,
                };
                if !eligible {
                    continue;
                }
                let ratio = self.reduced[j].abs() / alpha.abs();
                let better = match enter {
                    None => true,
                    Some((_, br, ba)) => {
                        if ratio < br - 1e-12 {
                            true
                        } else if ratio <= br + 1e-12 {
                            !bland && alpha.abs() > ba
                        } else {
                            false
                        }
                    }
                };
                if better {
                    enter = Some((j, ratio, alpha.abs()));
                }
            }

            let Some((q, _, _)) = enter else {
                if !reinverted {
                    self.reinvert();
                    reinverted = true;
                    continue;
                }
                return Ok(LpOutcome::Infeasible);
            };

            // Primal step: move x_q so the leaving variable lands on its bound.
            let cols = self.cols;
            let alpha_q = -self.t[r * cols + q];
            let delta = (target - self.x[leaving]) / alpha_q;
            for i in 0..self.rows {
                let tiq = self.t[i * cols + q];
                if tiq != 0.0 {
                    self.x[self.basis[i]] -= tiq * delta;
                }
            }
            self.x[q] += delta;
            self.pivot(r, q);
            self.x[leaving] = target;
            self.position[leaving] = if below { Position::AtLower } else { Position::AtUpper };

            let bound = self.objective();
            if bound < best_bound - 1e-12 * (1.0 + bound.abs()) {
                best_bound = bound;
                stall = 0;
            } else {
                stall += 1;
                if stall > STALL_LIMIT {
                    bland = true;
                }
            }
        }
    }
}
