//! Depth-first branch-and-bound over binary variables, and the exhaustive
//! enumeration oracle used to test it.

use crate::error::SolverError;
use crate::program::MixedIntegerProgram;
use crate::simplex::{LpOutcome, Tableau};
use crate::{Solution, Status, INTEGRALITY_TOL};

pub const DEFAULT_NODE_LIMIT: u64 = 1_000_000;

/// Upper limit on free binaries accepted by [`enumerate_binaries`].
pub const MAX_ENUMERATED_BINARIES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MilpOptions {
    pub node_limit: u64,
}

impl Default for MilpOptions {
    fn default() -> Self {
        MilpOptions {
            node_limit: DEFAULT_NODE_LIMIT,
        }
    }
}

fn prune_margin(incumbent: f64) -> f64 {
    1e-9 * (1.0 + incumbent.abs())
}

/// Solves `program` to proven optimality.
///
/// Branches on the most fractional binary (lowest index on ties), explores
/// depth-first with the floor branch first, and prunes nodes whose LP bound
/// does not beat the incumbent. The returned values have every binary set
/// exactly to 0 or 1; continuous values come from a final LP with the
/// binaries fixed.
pub fn solve_milp(
    program: &MixedIntegerProgram,
    options: &MilpOptions,
) -> Result<Solution, SolverError> {
    program.validate()?;
    let Some(mut tableau) = Tableau::new(program) else {
        return Ok(Solution::infeasible(1));
    };
    let binaries: Vec<usize> = program.binaries().map(|v| v.index()).collect();
    let root: Vec<(f64, f64)> = binaries.iter().map(|&j| tableau.bounds(j)).collect();

    let mut stack: Vec<Vec<(f64, f64)>> = vec![root];
    let mut incumbent: Option<(f64, Vec<f64>)> = None;
    let mut nodes = 0u64;

    while let Some(node) = stack.pop() {
        nodes += 1;
        if nodes > options.node_limit {
            let incumbent = match incumbent {
                Some((_, fixing)) => Some(Box::new(polish(&mut tableau, &binaries, &fixing, nodes)?)),
                None => None,
            };
            return Err(SolverError::NodeLimit {
                limit: options.node_limit,
                incumbent,
            });
        }
        for (&j, &(l, u)) in binaries.iter().zip(&node) {
            tableau.set_bounds(j, l, u);
        }
        let cutoff = incumbent.as_ref().map(|(obj, _)| obj + prune_margin(*obj));
        if tableau.solve(cutoff)? != LpOutcome::Optimal {
            continue;
        }
        let bound = tableau.objective();
        if let Some(c) = cutoff {
            if bound <= c {
                continue;
            }
        }

        let values = tableau.structural_values();
        let mut branch_on: Option<(usize, f64)> = None;
        for (k, &j) in binaries.iter().enumerate() {
            let v = values[j];
            let frac = (v - v.floor()).min(v.ceil() - v);
            if frac > INTEGRALITY_TOL && branch_on.is_none_or(|(_, f)| frac > f) {
                branch_on = Some((k, frac));
            }
        }

        match branch_on {
            None => {
                let fixing: Vec<f64> = binaries.iter().map(|&j| values[j].round()).collect();
                incumbent = Some((bound, fixing));
            }
            Some((k, _)) => {
                let v = values[binaries[k]];
                let mut up = node.clone();
                up[k] = (v.ceil(), node[k].1);
                let mut down = node;
                down[k] = (down[k].0, v.floor());
                stack.push(up);
                stack.push(down);
            }
        }
    }

    match incumbent {
        Some((_, fixing)) => polish(&mut tableau, &binaries, &fixing, nodes),
        None => Ok(Solution::infeasible(nodes)),
    }
}

/// Re-solves with every binary fixed to its integral incumbent value.
fn polish(
    tableau: &mut Tableau,
    binaries: &[usize],
    fixing: &[f64],
    nodes: u64,
) -> Result<Solution, SolverError> {
    for (&j, &v) in binaries.iter().zip(fixing) {
        tableau.set_bounds(j, v, v);
    }
    match tableau.solve(None)? {
        LpOutcome::Optimal => {
            let mut values = tableau.structural_values();
            for (&j, &v) in binaries.iter().zip(fixing) {
                values[j] = v;
            }
            Ok(Solution {
                status: Status::Optimal,
                values,
                objective_value: tableau.objective(),
                nodes,
            })
        }
        _ => Ok(Solution::infeasible(nodes)),
    }
}

/// Solves the LP for every 0/1 fixing of the free binaries and keeps the best
/// (first in enumeration order on ties). Binaries whose bounds already fix
/// them are not enumerated.
pub fn enumerate_binaries(program: &MixedIntegerProgram) -> Result<Solution, SolverError> {
    program.validate()?;
    let free: Vec<usize> = program
        .variables
        .iter()
        .enumerate()
        .filter(|(_, v)| v.binary && v.lower < v.upper)
        .map(|(j, _)| j)
        .collect();
    if free.len() > MAX_ENUMERATED_BINARIES {
        return Err(SolverError::TooManyBinaries {
            count: free.len(),
            limit: MAX_ENUMERATED_BINARIES,
        });
    }
    let Some(mut tableau) = Tableau::new(program) else {
        return Ok(Solution::infeasible(0));
    };
    let fixed: Vec<usize> = program
        .variables
        .iter()
        .enumerate()
        .filter(|(_, v)| v.binary && v.lower == v.upper)
        .map(|(j, _)| j)
        .collect();

    let combos = 1u64 << free.len();
    let mut best: Option<Solution> = None;
    for mask in 0..combos {
        for (bit, &j) in free.iter().enumerate() {
            let v = ((mask >> bit) & 1) as f64;
            tableau.set_bounds(j, v, v);
        }
        if tableau.solve(None)? != LpOutcome::Optimal {
            continue;
        }
        let obj = tableau.objective();
        if best.as_ref().is_none_or(|b| obj > b.objective_value) {
            let mut values = tableau.structural_values();
            for &j in free.iter().chain(&fixed) {
                values[j] = values[j].round();
            }
            best = Some(Solution {
                status: Status::Optimal,
                values,
                objective_value: obj,
                nodes: combos,
            });
        }
    }
    Ok(best.unwrap_or_else(|| Solution::infeasible(combos)))
}
