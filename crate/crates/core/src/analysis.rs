//! Profile-payment and tolerance studies built on repeated market solves.

use milp::{solve_milp, MilpOptions, MixedIntegerProgram, Solution, Status};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::formulation::{build_dam_program, Stage, VariableCatalog};
use crate::market::{run_market_day, settlement_report, SolveConfig};
use crate::model::{Demand, Scenario};

/// Step used to certify a cutoff from both sides, in €.
pub const CERTIFICATE_STEP: f64 = 0.01;

/// Day-ahead program whose profile payments come from `cost(d, p)`
/// instead of the scenario. Payments may take any value, including the
/// all-zero baseline that a scenario file cannot express.
fn dam_with_costs(
    s: &Scenario,
    cost: impl Fn(usize, usize) -> f64,
) -> Result<(MixedIntegerProgram, VariableCatalog)> {
    let (mut program, catalog) = build_dam_program(s)?;
    for (d, demand) in s.demands.iter().enumerate() {
        for (p, profile) in demand.profiles.iter().enumerate() {
            let delta = profile.cost - cost(d, p);
            if delta != 0.0 {
                program.add_objective(catalog.profile_choice[d][p], delta);
            }
        }
    }
    Ok((program, catalog))
}

fn solve(program: &MixedIntegerProgram, config: &SolveConfig) -> Result<Solution> {
    solve_milp(program, &MilpOptions { node_limit: config.node_limit }).map_err(|source| {
        Error::Solver {
            stage: Stage::DayAhead,
            source,
        }
    })
}

fn locate(s: &Scenario, demand: &str, profile: &str) -> Result<(usize, usize)> {
    let d = s
        .demand_index(demand)
        .ok_or_else(|| Error::UnknownDemand(demand.to_string()))?;
    let p = s.demands[d]
        .profile_index(profile)
        .ok_or_else(|| Error::UnknownProfile {
            demand: demand.to_string(),
            profile: profile.to_string(),
        })?;
    Ok((d, p))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cutoff {
    /// Largest daily payment at which the profile is still selected.
    Eur(f64),
    /// The profile loses to another profile of the demand even when free.
    NotProfitable,
    /// No other profile of the demand is feasible; any payment is accepted.
    Unbounded,
}

impl Cutoff {
    pub fn value(&self) -> Option<f64> {
        match self {
            Cutoff::Eur(v) => Some(*v),
            _ => None,
        }
    }
}

/// Cutoff payment of `profile` for `demand` against the baseline where
/// every non-default profile of every demand is free.
///
/// The value is the day-ahead profit with the profile forced minus the best
/// profit with it excluded (other demands' choices free in both).
pub fn cutoff_cost(s: &Scenario, demand: &str, profile: &str, config: &SolveConfig) -> Result<Cutoff> {
    let (d, p) = locate(s, demand, profile)?;
    if s.demands[d].default_index() == Some(p) {
        return Err(Error::InvalidArgument(format!(
            "{profile} is the default profile of {demand}"
        )));
    }
    let (program, catalog) = dam_with_costs(s, |_, _| 0.0)?;
    let u = catalog.profile_choice[d][p];

    let mut forced = program.clone();
    forced.set_bounds(u, 1.0, 1.0);
    let with = solve(&forced, config)?;
    let mut excluded = program;
    excluded.set_bounds(u, 0.0, 0.0);
    let without = solve(&excluded, config)?;

    Ok(match (with.status, without.status) {
        (Status::Optimal, Status::Optimal) => {
            let v = with.objective_value - without.objective_value;
            if v < -1e-6 {
                Cutoff::NotProfitable
            } else {
                Cutoff::Eur(v.max(0.0))
            }
        }
        (Status::Optimal, _) => Cutoff::Unbounded,
        _ => Cutoff::NotProfitable,
    })
}

/// Profile chosen for `demand` when `profile` costs `cost` and every other
/// non-default profile is free.
pub fn chosen_at_cost(
    s: &Scenario,
    demand: &str,
    profile: &str,
    cost: f64,
    config: &SolveConfig,
) -> Result<String> {
    let (d, p) = locate(s, demand, profile)?;
    let (program, catalog) =
        dam_with_costs(s, |dd, pp| if (dd, pp) == (d, p) { cost } else { 0.0 })?;
    let sol = solve(&program, config)?;
    if !sol.is_optimal() {
        return Err(Error::Infeasible { stage: Stage::DayAhead });
    }
    let chosen = catalog.chosen_profiles(&sol)[d];
    Ok(s.demands[d].profiles[chosen].id.clone())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CutoffCertificate {
    pub cutoff: f64,
    pub chosen_below: String,
    pub chosen_above: String,
}

impl CutoffCertificate {
    /// True when the profile wins just below the cutoff and loses just
    /// above it.
    pub fn holds(&self, profile: &str) -> bool {
        self.chosen_below == profile && self.chosen_above != profile
    }
}

/// Re-solves at `cutoff - 0.01` and `cutoff + 0.01`.
pub fn certify_cutoff(
    s: &Scenario,
    demand: &str,
    profile: &str,
    cutoff: f64,
    config: &SolveConfig,
) -> Result<CutoffCertificate> {
    Ok(CutoffCertificate {
        cutoff,
        chosen_below: chosen_at_cost(s, demand, profile, cutoff - CERTIFICATE_STEP, config)?,
        chosen_above: chosen_at_cost(s, demand, profile, cutoff + CERTIFICATE_STEP, config)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftCost {
    pub shifted_mwh: f64,
    /// `None` when the profile shifts no energy.
    pub eur_per_mwh: Option<f64>,
}

/// Energy moved by `profile` relative to the default profile, as half the
/// L1 distance, and the cutoff expressed per MWh moved.
pub fn per_mwh_cost(demand: &Demand, profile: usize, cutoff: f64, dt_hours: f64) -> ShiftCost {
    let default = demand.default_index().unwrap_or(0);
    let shifted_mwh = 0.5
        * demand.profiles[profile]
            .power
            .iter()
            .zip(&demand.profiles[default].power)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
        * dt_hours;
    ShiftCost {
        shifted_mwh,
        eur_per_mwh: (shifted_mwh > 0.0).then(|| cutoff / shifted_mwh),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CutoffRow {
    pub demand: String,
    pub profile: String,
    pub cutoff: Cutoff,
    pub shift: ShiftCost,
}

/// Cutoffs of every non-default profile of `demand`, or of every demand
/// when `demand` is `None`.
pub fn cutoff_table(s: &Scenario, demand: Option<&str>, config: &SolveConfig) -> Result<Vec<CutoffRow>> {
    if let Some(id) = demand {
        if s.demand_index(id).is_none() {
            return Err(Error::UnknownDemand(id.to_string()));
        }
    }
    let jobs: Vec<(usize, usize)> = s
        .demands
        .iter()
        .enumerate()
        .filter(|(_, d)| demand.is_none_or(|id| d.id == id))
        .flat_map(|(i, d)| {
            let default = d.default_index();
            (0..d.profiles.len())
                .filter(move |&p| Some(p) != default)
                .map(move |p| (i, p))
        })
        .collect();
    jobs.par_iter()
        .map(|&(d, p)| {
            let dem = &s.demands[d];
            let cutoff = cutoff_cost(s, &dem.id, &dem.profiles[p].id, config)?;
            let mut shift = per_mwh_cost(dem, p, cutoff.value().unwrap_or(0.0), s.dt());
            if cutoff.value().is_none() {
                shift.eur_per_mwh = None;
            }
            Ok(CutoffRow {
                demand: dem.id.clone(),
                profile: dem.profiles[p].id.clone(),
                cutoff,
                shift,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    /// `None` when the point failed.
    pub profit: Option<f64>,
    pub dam_profit: Option<f64>,
    /// Chosen profile id per demand, in scenario order.
    pub chosen: Vec<String>,
    pub uplift: Option<f64>,
    pub failure: Option<String>,
}

impl SweepRow {
    fn failed(value: f64, e: &Error) -> Self {
        SweepRow {
            value,
            profit: None,
            dam_profit: None,
            chosen: Vec::new(),
            uplift: None,
            failure: Some(e.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub parameter: String,
    pub scenario_id: String,
    /// Seconds since the Unix epoch, when the caller supplies one.
    pub timestamp: Option<u64>,
    pub demands: Vec<String>,
    pub rows: Vec<SweepRow>,
}

fn check_increasing(values: &[f64], what: &str) -> Result<()> {
    if values.is_empty() {
        return Err(Error::InvalidArgument(format!("{what} must not be empty")));
    }
    if values.iter().any(|v| !v.is_finite()) || values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(format!(
            "{what} must be finite and strictly increasing"
        )));
    }
    Ok(())
}

fn profile_ids(s: &Scenario, chosen: &[usize]) -> Vec<String> {
    s.demands
        .iter()
        .zip(chosen)
        .map(|(d, &p)| d.profiles[p].id.clone())
        .collect()
}

/// One day-ahead solve per grid value, with every non-default profile of
/// every demand priced at that value.
pub fn simultaneous_cost_sweep(s: &Scenario, grid: &[f64], config: &SolveConfig) -> Result<SweepReport> {
    check_increasing(grid, "cost grid")?;
    if grid[0] < 0.0 {
        return Err(Error::InvalidArgument("cost grid must start at or above 0".into()));
    }
    build_dam_program(s)?;
    let rows = grid
        .par_iter()
        .map(|&c| {
            let point = || -> Result<SweepRow> {
                let (program, catalog) = dam_with_costs(s, |d, p| {
                    if s.demands[d].default_index() == Some(p) {
                        0.0
                    } else {
                        c
                    }
                })?;
                let sol = solve(&program, config)?;
                if !sol.is_optimal() {
                    return Err(Error::Infeasible { stage: Stage::DayAhead });
                }
                Ok(SweepRow {
                    value: c,
                    profit: Some(sol.objective_value),
                    dam_profit: Some(sol.objective_value),
                    chosen: profile_ids(s, &catalog.chosen_profiles(&sol)),
                    uplift: None,
                    failure: None,
                })
            };
            point().unwrap_or_else(|e| SweepRow::failed(c, &e))
        })
        .collect();
    Ok(SweepReport {
        parameter: "profile_cost_eur".into(),
        scenario_id: s.name.clone(),
        timestamp: None,
        demands: s.demands.iter().map(|d| d.id.clone()).collect(),
        rows,
    })
}

/// One full market day per tolerance level (in percent), applied
/// symmetrically to every demand and period. Failed days are recorded in
/// their row and the sweep continues.
pub fn tolerance_sweep(s: &Scenario, levels_percent: &[f64], config: &SolveConfig) -> Result<SweepReport> {
    check_increasing(levels_percent, "tolerance levels")?;
    let rows = levels_percent
        .par_iter()
        .map(|&level| {
            let scenario = s.with_symmetric_tolerance(level / 100.0);
            match run_market_day(&scenario, config) {
                Ok(state) => {
                    let rep = settlement_report(&state);
                    SweepRow {
                        value: level,
                        profit: Some(rep.final_profit),
                        dam_profit: Some(rep.dam_profit),
                        chosen: profile_ids(s, &state.settled.chosen_profiles),
                        uplift: rep.uplift,
                        failure: None,
                    }
                }
                Err(e) => SweepRow::failed(level, &e),
            }
        })
        .collect();
    Ok(SweepReport {
        parameter: "tolerance_percent".into(),
        scenario_id: s.name.clone(),
        timestamp: None,
        demands: s.demands.iter().map(|d| d.id.clone()).collect(),
        rows,
    })
}
