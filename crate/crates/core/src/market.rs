//! Sequential market day: the day-ahead stage, then every intraday session
//! in order, each settled before the next one is built.

use milp::{solve_milp, MilpOptions, MixedIntegerProgram, Solution, Status, DEFAULT_NODE_LIMIT};

use crate::error::{Error, Result};
use crate::formulation::{
    build_dam_program, build_idm_program, objective_terms, AdjustmentCost, FormulationOptions,
    ObjectiveTerms, Schedule, SettledState, Stage, VariableCatalog,
};
use crate::model::Scenario;

/// Solver and formulation settings shared by every stage of a day.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveConfig {
    pub node_limit: u64,
    pub adjustment_cost: AdjustmentCost,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            node_limit: DEFAULT_NODE_LIMIT,
            adjustment_cost: AdjustmentCost::Signed,
        }
    }
}

impl SolveConfig {
    fn formulation(&self) -> FormulationOptions {
        FormulationOptions {
            adjustment_cost: self.adjustment_cost,
        }
    }
}

/// One solved and settled stage.
#[derive(Debug, Clone)]
pub struct StageRecord {
    pub stage: Stage,
    pub program: MixedIntegerProgram,
    pub catalog: VariableCatalog,
    pub solution: Solution,
    /// Objective re-evaluated term by term.
    pub terms: ObjectiveTerms,
}

impl StageRecord {
    pub fn profit(&self) -> f64 {
        self.terms.profit()
    }
}

#[derive(Debug, Clone)]
pub struct MarketDayState {
    pub scenario: Scenario,
    pub config: SolveConfig,
    pub settled: SettledState,
    /// Settled stages in order: day-ahead first, then sessions 1, 2, ...
    pub stages: Vec<StageRecord>,
}

impl MarketDayState {
    pub fn dam(&self) -> Option<&StageRecord> {
        self.stages.first()
    }

    /// Sessions settled so far.
    pub fn sessions_settled(&self) -> usize {
        self.settled.sessions.len()
    }

    pub fn is_complete(&self) -> bool {
        self.dam().is_some() && self.sessions_settled() == self.scenario.market.idm_sessions.len()
    }

    /// Sum of the ledger's stage profits.
    pub fn total_profit(&self) -> f64 {
        self.stages.iter().map(StageRecord::profit).sum()
    }

    /// Sum of the solver's stage objective values.
    pub fn objective_sum(&self) -> f64 {
        self.stages.iter().map(|r| r.solution.objective_value).sum()
    }

    /// Latest physical schedule over the full horizon.
    pub fn final_schedule(&self) -> Option<Schedule> {
        self.settled.current_schedule()
    }

    /// Net traded power per period after every settled stage.
    pub fn final_trade(&self) -> Vec<f64> {
        (0..self.scenario.horizon())
            .map(|t| self.settled.net_position(t))
            .collect()
    }

    /// Day-ahead traded power per period.
    pub fn dam_trade(&self) -> Vec<f64> {
        self.settled
            .dam
            .as_ref()
            .map(|d| d.trade.clone())
            .unwrap_or_default()
    }

    fn settle(&mut self, program: MixedIntegerProgram, catalog: VariableCatalog, solution: Solution) {
        let terms = objective_terms(
            &self.scenario,
            &catalog,
            &solution.values,
            &self.config.formulation(),
        );
        if catalog.stage == Stage::DayAhead {
            self.settled.chosen_profiles = catalog.chosen_profiles(&solution);
        }
        self.settled.settle(catalog.extract(&solution));
        self.stages.push(StageRecord {
            stage: catalog.stage,
            program,
            catalog,
            solution,
            terms,
        });
    }
}

fn solve_stage(stage: Stage, program: &MixedIntegerProgram, config: &SolveConfig) -> Result<Solution> {
    let options = MilpOptions {
        node_limit: config.node_limit,
    };
    let solution = solve_milp(program, &options).map_err(|source| Error::Solver { stage, source })?;
    match solution.status {
        Status::Optimal => Ok(solution),
        Status::Infeasible => Err(Error::Infeasible { stage }),
        Status::Unbounded => unreachable!("every program variable is bounded"),
    }
}

/// Solves and settles the day-ahead stage.
pub fn run_dam(s: &Scenario, config: &SolveConfig) -> Result<MarketDayState> {
    let (program, catalog) = build_dam_program(s)?;
    let solution = solve_stage(Stage::DayAhead, &program, config)?;
    let mut state = MarketDayState {
        scenario: s.clone(),
        config: *config,
        settled: SettledState::default(),
        stages: Vec::new(),
    };
    state.settle(program, catalog, solution);
    Ok(state)
}

/// Solves and settles intraday session `k` (1-based).
pub fn run_idm_session(mut state: MarketDayState, k: usize) -> Result<MarketDayState> {
    let (program, catalog) = build_idm_program(
        &state.scenario,
        k,
        &state.settled,
        &state.config.formulation(),
    )?;
    let solution = solve_stage(Stage::Intraday(k), &program, &state.config)?;
    state.settle(program, catalog, solution);
    Ok(state)
}

/// Day-ahead stage followed by every intraday session.
pub fn run_market_day(s: &Scenario, config: &SolveConfig) -> Result<MarketDayState> {
    let mut state = run_dam(s, config)?;
    for k in 1..=s.market.idm_sessions.len() {
        state = run_idm_session(state, k)?;
    }
    Ok(state)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SettlementRow {
    pub stage: Stage,
    pub revenue: f64,
    /// Variable plus commitment cost.
    pub generation_cost: f64,
    pub profile_payment: f64,
    pub profit: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Settlement {
    pub rows: Vec<SettlementRow>,
    pub dam_profit: f64,
    pub final_profit: f64,
    /// `(final - DAM) / DAM`; `None` when the day-ahead profit is 0 and the
    /// final profit differs from it.
    pub uplift: Option<f64>,
}

impl Settlement {
    pub fn uplift_percent(&self) -> Option<f64> {
        self.uplift.map(|u| 100.0 * u)
    }
}

/// Relative change from `dam` to `fin`.
pub fn uplift(dam: f64, fin: f64) -> Option<f64> {
    if fin == dam {
        Some(0.0)
    } else if dam == 0.0 {
        None
    } else {
        Some((fin - dam) / dam)
    }
}

/// Per-stage revenue and cost breakdown of a day.
pub fn settlement_report(state: &MarketDayState) -> Settlement {
    let rows: Vec<SettlementRow> = state
        .stages
        .iter()
        .map(|r| SettlementRow {
            stage: r.stage,
            revenue: r.terms.trade_revenue,
            generation_cost: r.terms.variable_cost + r.terms.commitment_cost,
            profile_payment: r.terms.profile_payments,
            profit: r.profit(),
        })
        .collect();
    let dam_profit = rows.first().map_or(0.0, |r| r.profit);
    let final_profit = rows.iter().map(|r| r.profit).sum();
    Settlement {
        uplift: uplift(dam_profit, final_profit),
        rows,
        dam_profit,
        final_profit,
    }
}

/// True when the ledger total matches the sum of stage objectives within
/// `1e-6 * (1 + |profit|)`.
pub fn ledger_is_additive(state: &MarketDayState) -> bool {
    let total = state.total_profit();
    (total - state.objective_sum()).abs() <= 1e-6 * (1.0 + total.abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::*;
    use crate::model::*;

    #[test]
    fn empty_portfolio_has_zero_profit() {
        let mut s = one_bus_scenario();
        s.demands.clear();
        let state = run_market_day(&s, &SolveConfig::default()).unwrap();
        assert_eq!(state.total_profit(), 0.0);
        assert_eq!(settlement_report(&state).uplift, Some(0.0));
    }

    #[test]
    fn single_generator_day() {
        // 10 MW for 24 h at 50 €/MWh with 10 €/MWh variable cost.
        let mut s = one_bus_scenario();
        s.demands.clear();
        s.market.horizon = 24;
        s.market.dam_prices = vec![50.0; 24];
        s.dispatchables.push(DispatchableUnit {
            id: "g".into(),
            bus: BusId(1),
            p_min: 0.0,
            p_max: 10.0,
            variable_cost: 10.0,
            startup_cost: 100.0,
            shutdown_cost: 100.0,
            initial_on: true,
        });
        let state = run_dam(&s, &SolveConfig::default()).unwrap();
        assert!((state.total_profit() - 9600.0).abs() < 1e-6);
        assert_eq!(state.stages[0].terms.commitment_cost, 0.0);
    }

    #[test]
    fn dam_picks_profile_aligned_with_cheap_hour() {
        let state = run_dam(&one_bus_scenario(), &SolveConfig::default()).unwrap();
        // base: -5 * 30 = -150; early: -5 * 20 - 10 = -110
        assert_eq!(state.settled.chosen_profiles, vec![1]);
        assert!((state.total_profit() + 110.0).abs() < 1e-9);
        assert!(ledger_is_additive(&state));
    }

    #[test]
    fn unchanged_session_is_a_fixed_point() {
        let state = run_market_day(&two_bus_scenario(), &SolveConfig::default()).unwrap();
        let session = &state.stages[1];
        assert!(session.profit().abs() < 1e-9);
        assert!(state.settled.sessions[0].trade.iter().all(|p| p.abs() < 1e-9));
        let rep = settlement_report(&state);
        assert_eq!(rep.rows.len(), 2);
        assert!((rep.final_profit - rep.dam_profit).abs() < 1e-9);
    }

    #[test]
    fn forecast_loss_buys_back_at_intraday_price() {
        let mut s = two_bus_scenario();
        s.dispatchables.clear();
        s.market.idm_sessions[0]
            .forecast_updates
            .insert("wind".into(), vec![2.0, 8.0]);
        let state = run_market_day(&s, &SolveConfig::default()).unwrap();
        let trade = &state.settled.sessions[0].trade;
        assert!((trade[0] + 10.0).abs() < 1e-9);
        assert!(trade[1].abs() < 1e-9);
        assert!((state.stages[1].profit() + 400.0).abs() < 1e-9);
        assert!(ledger_is_additive(&state));
    }

    #[test]
    fn unreachable_minimum_energy_is_infeasible() {
        let mut s = one_bus_scenario();
        s.demands[0].profiles[0].power = vec![2.0, 3.0];
        s.demands[0].profiles[1].power = vec![3.0, 2.0];
        s.market.idm_sessions.push(IdmSession {
            tau: 2,
            prices: vec![30.0],
            forecast_updates: Default::default(),
        });
        let mut state = run_dam(&s, &SolveConfig::default()).unwrap();
        // Pretend period 1 consumed only 1 MWh: 5 MWh would need 4 MW in
        // period 2, above the 10 % band around either profile.
        state.settled.dam.as_mut().unwrap().schedule.demand_power[0][0] = 1.0;
        assert!(matches!(
            run_idm_session(state, 1),
            Err(Error::Infeasible { stage: Stage::Intraday(1) })
        ));
    }

    #[test]
    fn uplift_edge_cases() {
        assert_eq!(uplift(0.0, 0.0), Some(0.0));
        assert_eq!(uplift(0.0, 5.0), None);
        assert_eq!(uplift(100.0, 114.0).map(|u| (u * 1e6).round()), Some(140000.0));
    }
}
