use std::fmt::{self, Write as _};

use crate::error::SolverError;

/// Index of a variable inside a [`MixedIntegerProgram`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub(crate) usize);

impl VarId {
    pub fn index(self) -> usize {
        self.0
    }

    pub fn from_index(index: usize) -> Self {
        VarId(index)
    }
}

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "x{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub binary: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    LessEq,
    Equal,
    GreaterEq,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::LessEq => "<=",
            Relation::Equal => "=",
            Relation::GreaterEq => ">=",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub terms: Vec<(VarId, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

impl Constraint {
    pub fn activity(&self, values: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, a)| a * values[v.0]).sum()
    }

    /// Amount by which `values` violate this row (0 when satisfied).
    pub fn violation(&self, values: &[f64]) -> f64 {
        let lhs = self.activity(values);
        match self.relation {
            Relation::LessEq => (lhs - self.rhs).max(0.0),
            Relation::GreaterEq => (self.rhs - lhs).max(0.0),
            Relation::Equal => (lhs - self.rhs).abs(),
        }
    }
}

/// A maximisation program over boxed variables, some of them binary.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MixedIntegerProgram {
    pub variables: Vec<Variable>,
    pub objective: Vec<(VarId, f64)>,
    pub objective_constant: f64,
    pub constraints: Vec<Constraint>,
}

impl MixedIntegerProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> VarId {
        self.variables.push(Variable {
            name: name.into(),
            lower,
            upper,
            binary: false,
        });
        VarId(self.variables.len() - 1)
    }

    pub fn add_binary(&mut self, name: impl Into<String>) -> VarId {
        self.variables.push(Variable {
            name: name.into(),
            lower: 0.0,
            upper: 1.0,
            binary: true,
        });
        VarId(self.variables.len() - 1)
    }

    pub fn set_bounds(&mut self, var: VarId, lower: f64, upper: f64) {
        let v = &mut self.variables[var.0];
        v.lower = lower;
        v.upper = upper;
    }

    /// Adds `coef` to the objective coefficient of `var`.
    pub fn add_objective(&mut self, var: VarId, coef: f64) {
        self.objective.push((var, coef));
    }

    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        terms: Vec<(VarId, f64)>,
        relation: Relation,
        rhs: f64,
    ) -> usize {
        self.constraints.push(Constraint {
            name: name.into(),
            terms,
            relation,
            rhs,
        });
        self.constraints.len() - 1
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn binaries(&self) -> impl Iterator<Item = VarId> + '_ {
        self.variables
            .iter()
            .enumerate()
            .filter(|(_, v)| v.binary)
            .map(|(i, _)| VarId(i))
    }

    /// Dense objective vector with duplicate entries summed.
    pub fn objective_dense(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.variables.len()];
        for &(v, a) in &self.objective {
            c[v.0] += a;
        }
        c
    }

    pub fn evaluate_objective(&self, values: &[f64]) -> f64 {
        self.objective_constant
            + self
                .objective
                .iter()
                .map(|&(v, a)| a * values[v.0])
                .sum::<f64>()
    }

    /// Largest bound or row violation of `values`.
    pub fn max_violation(&self, values: &[f64]) -> f64 {
        let bounds = self
            .variables
            .iter()
            .zip(values)
            .map(|(v, &x)| (v.lower - x).max(x - v.upper).max(0.0));
        let rows = self.constraints.iter().map(|c| c.violation(values));
        bounds.chain(rows).fold(0.0, f64::max)
    }

    /// Checks the structural invariants: finite data, ordered bounds, binary
    /// bounds inside [0, 1] and no dangling variable references.
    pub fn validate(&self) -> Result<(), SolverError> {
        let n = self.variables.len();
        for (i, v) in self.variables.iter().enumerate() {
            if !v.lower.is_finite() || !v.upper.is_finite() {
                return Err(SolverError::Structural(format!(
                    "variable {} ({}) has a non-finite bound",
                    i, v.name
                )));
            }
            if v.lower > v.upper {
                return Err(SolverError::Structural(format!(
                    "variable {} ({}) has lower bound {} above upper bound {}",
                    i, v.name, v.lower, v.upper
                )));
            }
            if v.binary && (v.lower < 0.0 || v.upper > 1.0) {
                return Err(SolverError::Structural(format!(
                    "binary variable {} ({}) has bounds [{}, {}] outside [0, 1]",
                    i, v.name, v.lower, v.upper
                )));
            }
        }
        for &(var, coef) in &self.objective {
            if var.0 >= n {
                return Err(SolverError::Structural(format!(
                    "objective references missing variable {}",
                    var.0
                )));
            }
            if !coef.is_finite() {
                return Err(SolverError::Structural(format!(
                    "objective coefficient of {} is not finite",
                    self.variables[var.0].name
                )));
            }
        }
        if !self.objective_constant.is_finite() {
            return Err(SolverError::Structural(
                "objective constant is not finite".into(),
            ));
        }
        for (i, c) in self.constraints.iter().enumerate() {
            if !c.rhs.is_finite() {
                return Err(SolverError::Structural(format!(
                    "constraint {} ({}) has a non-finite right-hand side",
                    i, c.name
                )));
            }
            for &(var, coef) in &c.terms {
                if var.0 >= n {
                    return Err(SolverError::Structural(format!(
                        "constraint {} ({}) references missing variable {}",
                        i, c.name, var.0
                    )));
                }
                if !coef.is_finite() {
                    return Err(SolverError::Structural(format!(
                        "constraint {} ({}) has a non-finite coefficient",
                        i, c.name
                    )));
                }
            }
        }
        Ok(())
    }

    /// Renders the program in a CPLEX-LP-like text format for cross-checking
    /// with external solvers.
    pub fn to_lp_string(&self) -> String {
        let mut out = String::new();
        let name = |v: VarId| sanitize(&self.variables[v.0].name, v.0);
        out.push_str("\\ objective constant: ");
        let _ = writeln!(out, "{}", self.objective_constant);
        out.push_str("Maximize\n obj:");
        write_terms(&mut out, &merge_terms(&self.objective), &name);
        out.push_str("\nSubject To\n");
        for (i, c) in self.constraints.iter().enumerate() {
            let _ = write!(out, " {}:", sanitize(&c.name, i));
            write_terms(&mut out, &merge_terms(&c.terms), &name);
            let _ = writeln!(out, " {} {}", c.relation, c.rhs);
        }
        out.push_str("Bounds\n");
        for (i, v) in self.variables.iter().enumerate() {
            let _ = writeln!(out, " {} <= {} <= {}", v.lower, name(VarId(i)), v.upper);
        }
        let bins: Vec<String> = self.binaries().map(name).collect();
        if !bins.is_empty() {
            out.push_str("Binaries\n");
            for b in bins {
                let _ = writeln!(out, " {}", b);
            }
        }
        out.push_str("End\n");
        out
    }
}

fn merge_terms(terms: &[(VarId, f64)]) -> Vec<(VarId, f64)> {
    let mut merged: Vec<(VarId, f64)> = Vec::with_capacity(terms.len());
    for &(v, a) in terms {
        match merged.iter_mut().find(|(w, _)| *w == v) {
            Some(entry) => entry.1 += a,
            None => merged.push((v, a)),
        }
    }
    merged
}

fn write_terms(out: &mut String, terms: &[(VarId, f64)], name: &impl Fn(VarId) -> String) {
    if terms.is_empty() {
        out.push_str(" 0");
        return;
    }
    for &(v, a) in terms {
        if a < 0.0 {
            let _ = write!(out, " - {} {}", -a, name(v));
        } else {
            let _ = write!(out, " + {} {}", a, name(v));
        }
    }
}

fn sanitize(name: &str, index: usize) -> String {
    if name.is_empty() {
        return format!("_{}", index);
    }
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '.' { c } else { '_' })
        .collect()
}
