//! Translation of a [`Scenario`] into the day-ahead program and, given the
//! settled results of earlier stages, into each intraday-session program.
//!
//! Both stages share the balance, network, dispatchable, non-dispatchable
//! and storage families; they differ in the demand model (profile choice
//! day-ahead, tolerance band with ramps and minimum energy intraday), in
//! the trade linkage and in the objective.

use std::fmt;

use milp::{MixedIntegerProgram, Relation, Solution, VarId};

use crate::error::{Error, Result};
use crate::model::{validate_scenario, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    DayAhead,
    /// Intraday session `k`, 1-based.
    Intraday(usize),
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Stage::DayAhead => f.write_str("DAM"),
            Stage::Intraday(k) => write!(f, "IDM{k}"),
        }
    }
}

/// How intraday changes of dispatchable output are charged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AdjustmentCost {
    /// `C^V * (p - p*)`: a decrease credits the variable cost.
    #[default]
    Signed,
    /// `C^V * |p - p*|`, linearised with two nonnegative parts.
    Absolute,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FormulationOptions {
    pub adjustment_cost: AdjustmentCost,
}

/// Variables of one family, indexed by entity and absolute period.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VarGrid {
    first_period: usize,
    vars: Vec<Vec<VarId>>,
}

impl VarGrid {
    fn new(first_period: usize) -> Self {
        VarGrid {
            first_period,
            vars: Vec::new(),
        }
    }

    pub fn get(&self, entity: usize, t: usize) -> VarId {
        self.vars[entity][t - self.first_period]
    }

    pub fn entity(&self, entity: usize) -> &[VarId] {
        &self.vars[entity]
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    fn all(&self) -> impl Iterator<Item = VarId> + '_ {
        self.vars.iter().flatten().copied()
    }

    fn values(&self, solution: &Solution) -> Vec<Vec<f64>> {
        self.vars
            .iter()
            .map(|row| row.iter().map(|&v| solution.value(v)).collect())
            .collect()
    }
}

/// Handles for every program variable of one market stage.
///
/// Entity indices follow the scenario's vectors; PCC trades follow
/// `network.pcc_buses`.
#[derive(Debug, Clone, PartialEq)]
pub struct VariableCatalog {
    pub stage: Stage,
    pub first_period: usize,
    pub horizon: usize,
    pub dres_power: VarGrid,
    pub dres_on: VarGrid,
    pub dres_shutdown_cost: VarGrid,
    pub dres_startup_cost: VarGrid,
    /// Intraday only: signed change of dispatchable output.
    pub dres_adjustment: Option<VarGrid>,
    /// Intraday with [`AdjustmentCost::Absolute`]: (increase, decrease).
    pub dres_adjustment_parts: Option<(VarGrid, VarGrid)>,
    pub ndres_power: VarGrid,
    pub stu_power: VarGrid,
    pub stu_charge: VarGrid,
    pub stu_energy: VarGrid,
    pub demand_power: VarGrid,
    /// Day-ahead only: `profile_choice[d][p]`.
    pub profile_choice: Vec<Vec<VarId>>,
    pub line_flow: VarGrid,
    pub bus_angle: VarGrid,
    pub pcc_trade: VarGrid,
    /// `p^DA_t` day-ahead, `p^ID_{k,t}` intraday.
    pub market_trade: Vec<VarId>,
    /// Start-up/shut-down cost of the previously settled commitment over
    /// this stage's window (0 day-ahead). Credited in the objective.
    pub commitment_baseline: f64,
}

impl VariableCatalog {
    fn new(stage: Stage, first_period: usize, horizon: usize) -> Self {
        let g = || VarGrid::new(first_period);
        VariableCatalog {
            stage,
            first_period,
            horizon,
            dres_power: g(),
            dres_on: g(),
            dres_shutdown_cost: g(),
            dres_startup_cost: g(),
            dres_adjustment: None,
            dres_adjustment_parts: None,
            ndres_power: g(),
            stu_power: g(),
            stu_charge: g(),
            stu_energy: g(),
            demand_power: g(),
            profile_choice: Vec::new(),
            line_flow: g(),
            bus_angle: g(),
            pcc_trade: g(),
            market_trade: Vec::new(),
            commitment_baseline: 0.0,
        }
    }

    pub fn periods(&self) -> std::ops::Range<usize> {
        self.first_period..self.horizon
    }

    pub fn market_trade_at(&self, t: usize) -> VarId {
        self.market_trade[t - self.first_period]
    }

    /// Every handle in the catalog, in a fixed order.
    pub fn all_vars(&self) -> Vec<VarId> {
        let mut out: Vec<VarId> = Vec::new();
        for grid in [
            &self.dres_power,
            &self.dres_on,
            &self.dres_shutdown_cost,
            &self.dres_startup_cost,
            &self.ndres_power,
            &self.stu_power,
            &self.stu_charge,
            &self.stu_energy,
            &self.demand_power,
            &self.line_flow,
            &self.bus_angle,
            &self.pcc_trade,
        ] {
            out.extend(grid.all());
        }
        if let Some(g) = &self.dres_adjustment {
            out.extend(g.all());
        }
        if let Some((up, down)) = &self.dres_adjustment_parts {
            out.extend(up.all());
            out.extend(down.all());
        }
        out.extend(self.profile_choice.iter().flatten().copied());
        out.extend(self.market_trade.iter().copied());
        out
    }

    /// Reads the settled quantities of this stage out of `solution`.
    pub fn extract(&self, solution: &Solution) -> StageSettlement {
        StageSettlement {
            stage: self.stage,
            first_period: self.first_period,
            trade: self.market_trade.iter().map(|&v| solution.value(v)).collect(),
            schedule: Schedule {
                first_period: self.first_period,
                dres_power: self.dres_power.values(solution),
                dres_on: self.dres_on.values(solution),
                ndres_power: self.ndres_power.values(solution),
                stu_power: self.stu_power.values(solution),
                stu_charge: self.stu_charge.values(solution),
                stu_energy: self.stu_energy.values(solution),
                demand_power: self.demand_power.values(solution),
                line_flow: self.line_flow.values(solution),
                bus_angle: self.bus_angle.values(solution),
                pcc_trade: self.pcc_trade.values(solution),
            },
        }
    }

    /// Index of the profile chosen for each demand (day-ahead only).
    pub fn chosen_profiles(&self, solution: &Solution) -> Vec<usize> {
        self.profile_choice
            .iter()
            .map(|us| {
                us.iter()
                    .position(|&u| solution.value(u) > 0.5)
                    .unwrap_or(0)
            })
            .collect()
    }
}

/// Physical schedule over the periods `first_period..horizon`, one vector
/// per entity.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Schedule {
    pub first_period: usize,
    pub dres_power: Vec<Vec<f64>>,
    pub dres_on: Vec<Vec<f64>>,
    pub ndres_power: Vec<Vec<f64>>,
    pub stu_power: Vec<Vec<f64>>,
    pub stu_charge: Vec<Vec<f64>>,
    pub stu_energy: Vec<Vec<f64>>,
    pub demand_power: Vec<Vec<f64>>,
    pub line_flow: Vec<Vec<f64>>,
    pub bus_angle: Vec<Vec<f64>>,
    pub pcc_trade: Vec<Vec<f64>>,
}

impl Schedule {
    fn families_mut(&mut self) -> [&mut Vec<Vec<f64>>; 10] {
        [
            &mut self.dres_power,
            &mut self.dres_on,
            &mut self.ndres_power,
            &mut self.stu_power,
            &mut self.stu_charge,
            &mut self.stu_energy,
            &mut self.demand_power,
            &mut self.line_flow,
            &mut self.bus_angle,
            &mut self.pcc_trade,
        ]
    }

    /// Overwrites the periods covered by `later` with its values.
    fn overlay(&mut self, later: &Schedule) {
        let offset = later.first_period - self.first_period;
        let mut later = later.clone();
        for (mine, theirs) in self.families_mut().into_iter().zip(later.families_mut()) {
            for (row, new) in mine.iter_mut().zip(theirs.iter()) {
                row[offset..offset + new.len()].copy_from_slice(new);
            }
        }
    }
}

/// Settled outcome of one market stage.
#[derive(Debug, Clone, PartialEq)]
pub struct StageSettlement {
    pub stage: Stage,
    pub first_period: usize,
    /// Market trade per period of the stage's window.
    pub trade: Vec<f64>,
    pub schedule: Schedule,
}

/// Results of the day-ahead stage and of the intraday sessions settled so
/// far, in order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SettledState {
    pub dam: Option<StageSettlement>,
    /// Profile index chosen day-ahead for each demand.
    pub chosen_profiles: Vec<usize>,
    pub sessions: Vec<StageSettlement>,
}

impl SettledState {
    /// Latest schedule over the full horizon: the day-ahead schedule with
    /// every settled session's window laid over it in order.
    pub fn current_schedule(&self) -> Option<Schedule> {
        let mut base = self.dam.as_ref()?.schedule.clone();
        for s in &self.sessions {
            base.overlay(&s.schedule);
        }
        Some(base)
    }

    /// `p^DA*_t + sum of settled p^ID*_{k,t}`.
    pub fn net_position(&self, t: usize) -> f64 {
        let dam = self.dam.as_ref().map_or(0.0, |d| d.trade[t]);
        dam + self
            .sessions
            .iter()
            .filter(|s| t >= s.first_period)
            .map(|s| s.trade[t - s.first_period])
            .sum::<f64>()
    }

    /// Appends a settled stage.
    pub fn settle(&mut self, stage: StageSettlement) {
        match stage.stage {
            Stage::DayAhead => self.dam = Some(stage),
            Stage::Intraday(_) => self.sessions.push(stage),
        }
    }
}

/// Start-up plus shut-down cost of a 0/1 commitment trajectory over
/// `on[first..]`, with `before` the state ahead of `first`.
pub fn commitment_cost(startup: f64, shutdown: f64, before: bool, on: &[f64]) -> f64 {
    let mut prev = if before { 1.0 } else { 0.0 };
    let mut total = 0.0;
    for &u in on {
        total += startup * (u - prev).max(0.0) + shutdown * (prev - u).max(0.0);
        prev = u;
    }
    total
}

fn reject_invalid(s: &Scenario) -> Result<()> {
    let violations = validate_scenario(s);
    match violations.first() {
        Some(first) => Err(Error::InvalidScenario {
            first: first.clone(),
            count: violations.len(),
        }),
        None => Ok(()),
    }
}

/// What an intraday program needs to know about earlier stages.
struct IntradayContext {
    session: usize,
    prev: Schedule,
    /// `P*_{d,t}` of the day-ahead profile, full horizon.
    chosen_power: Vec<Vec<f64>>,
    /// Net settled position per period, full horizon.
    base_position: Vec<f64>,
}

struct Builder<'a> {
    s: &'a Scenario,
    p: MixedIntegerProgram,
    cat: VariableCatalog,
    vintage: usize,
    idm: Option<IntradayContext>,
}

impl<'a> Builder<'a> {
    fn new(s: &'a Scenario, stage: Stage, first: usize, idm: Option<IntradayContext>) -> Self {
        Builder {
            s,
            p: MixedIntegerProgram::new(),
            cat: VariableCatalog::new(stage, first, s.horizon()),
            vintage: match stage {
                Stage::DayAhead => 0,
                Stage::Intraday(k) => k,
            },
            idm,
        }
    }

    fn periods(&self) -> std::ops::Range<usize> {
        self.cat.periods()
    }

    fn grid(
        &mut self,
        count: usize,
        mut make: impl FnMut(&mut MixedIntegerProgram, usize, usize) -> VarId,
    ) -> VarGrid {
        let mut g = VarGrid::new(self.cat.first_period);
        for e in 0..count {
            let row = self.periods().map(|t| make(&mut self.p, e, t)).collect();
            g.vars.push(row);
        }
        g
    }

    fn pcc_total(&self) -> f64 {
        self.s
            .network
            .pcc_buses
            .iter()
            .filter_map(|&b| self.s.pcc_limit(b))
            .sum()
    }

    fn angle_bound(&self) -> f64 {
        // Any bus is reachable from the slack along a path whose lines each
        // carry at most limit/susceptance of angle difference.
        self.s
            .network
            .lines
            .iter()
            .map(|l| l.flow_limit / l.susceptance)
            .sum()
    }

    fn declare_variables(&mut self, opts: &FormulationOptions) {
        let s = self.s;
        let idm = self.idm.is_some();

        self.cat.dres_power = self.grid(s.dispatchables.len(), |p, c, t| {
            p.add_var(format!("p_c[{},{}]", s.dispatchables[c].id, t + 1), 0.0, s.dispatchables[c].p_max)
        });
        self.cat.dres_on = self.grid(s.dispatchables.len(), |p, c, t| {
            p.add_binary(format!("u_c[{},{}]", s.dispatchables[c].id, t + 1))
        });
        self.cat.dres_shutdown_cost = self.grid(s.dispatchables.len(), |p, c, t| {
            let u = &s.dispatchables[c];
            p.add_var(format!("c0[{},{}]", u.id, t + 1), 0.0, u.shutdown_cost)
        });
        self.cat.dres_startup_cost = self.grid(s.dispatchables.len(), |p, c, t| {
            let u = &s.dispatchables[c];
            p.add_var(format!("c1[{},{}]", u.id, t + 1), 0.0, u.startup_cost)
        });
        if idm {
            self.cat.dres_adjustment = Some(self.grid(s.dispatchables.len(), |p, c, t| {
                let u = &s.dispatchables[c];
                p.add_var(format!("dp[{},{}]", u.id, t + 1), -u.p_max, u.p_max)
            }));
            if opts.adjustment_cost == AdjustmentCost::Absolute {
                let up = self.grid(s.dispatchables.len(), |p, c, t| {
                    let u = &s.dispatchables[c];
                    p.add_var(format!("dp_up[{},{}]", u.id, t + 1), 0.0, u.p_max)
                });
                let down = self.grid(s.dispatchables.len(), |p, c, t| {
                    let u = &s.dispatchables[c];
                    p.add_var(format!("dp_down[{},{}]", u.id, t + 1), 0.0, u.p_max)
                });
                self.cat.dres_adjustment_parts = Some((up, down));
            }
        }

        let vintage = self.vintage;
        self.cat.ndres_power = self.grid(s.nondispatchables.len(), |p, r, t| {
            let u = &s.nondispatchables[r];
            p.add_var(format!("p_r[{},{}]", u.id, t + 1), u.p_min[t], s.availability(r, vintage, t))
        });

        self.cat.stu_power = self.grid(s.stus.len(), |p, th, t| {
            let u = &s.stus[th];
            p.add_var(format!("p_th[{},{}]", u.id, t + 1), 0.0, u.p_max)
        });
        self.cat.stu_charge = self.grid(s.stus.len(), |p, th, t| {
            let u = &s.stus[th];
            p.add_var(format!("q_th[{},{}]", u.id, t + 1), 0.0, u.charge_limit.min(u.thermal_input[t]))
        });
        self.cat.stu_energy = self.grid(s.stus.len(), |p, th, t| {
            let u = &s.stus[th];
            p.add_var(format!("e_th[{},{}]", u.id, t + 1), 0.0, u.energy_capacity)
        });

        let band = self.idm.as_ref().map(|ctx| ctx.chosen_power.clone());
        self.cat.demand_power = self.grid(s.demands.len(), |p, d, t| {
            let dem = &s.demands[d];
            let (lo, hi) = match &band {
                // Tolerance band around the day-ahead profile.
                Some(chosen) => {
                    let star = chosen[d][t];
                    ((1.0 - dem.tolerance_down[t]) * star, (1.0 + dem.tolerance_up[t]) * star)
                }
                None => {
                    let vals = dem.profiles.iter().map(|pr| pr.power[t]);
                    let lo = vals.clone().fold(f64::INFINITY, f64::min);
                    (lo, vals.fold(f64::NEG_INFINITY, f64::max))
                }
            };
            p.add_var(format!("p_d[{},{}]", dem.id, t + 1), lo, hi)
        });
        if !idm {
            for dem in &s.demands {
                let us = dem
                    .profiles
                    .iter()
                    .map(|pr| self.p.add_binary(format!("u_dp[{},{}]", dem.id, pr.id)))
                    .collect();
                self.cat.profile_choice.push(us);
            }
        }

        self.cat.line_flow = self.grid(s.network.lines.len(), |p, l, t| {
            let line = &s.network.lines[l];
            p.add_var(format!("p_l[{},{}]", line.id, t + 1), -line.flow_limit, line.flow_limit)
        });
        let ab = self.angle_bound();
        let slack = s.network.slack_bus;
        self.cat.bus_angle = self.grid(s.network.buses.len(), |p, b, t| {
            let bus = &s.network.buses[b];
            let bound = if bus.id == slack { 0.0 } else { ab };
            p.add_var(format!("theta[{},{}]", bus.id, t + 1), -bound, bound)
        });
        self.cat.pcc_trade = self.grid(s.network.pcc_buses.len(), |p, i, t| {
            let bus = s.network.pcc_buses[i];
            let lim = s.pcc_limit(bus).unwrap_or(0.0);
            p.add_var(format!("p_m[{},{}]", bus, t + 1), -lim, lim)
        });

        let total = self.pcc_total();
        let (name, bound) = if idm { ("p_id", 2.0 * total) } else { ("p_da", total) };
        self.cat.market_trade = self
            .periods()
            .map(|t| self.p.add_var(format!("{name}[{}]", t + 1), -bound, bound))
            .collect();
    }

    /// Bus balance for PCC buses (with the grid exchange) and all others.
    fn add_bus_balance(&mut self, t: usize, b: usize) {
        let s = self.s;
        let bus = s.network.buses[b].id;
        let mut terms: Vec<(VarId, f64)> = Vec::new();
        for (c, u) in s.dispatchables.iter().enumerate() {
            if u.bus == bus {
                terms.push((self.cat.dres_power.get(c, t), 1.0));
            }
        }
        for (r, u) in s.nondispatchables.iter().enumerate() {
            if u.bus == bus {
                terms.push((self.cat.ndres_power.get(r, t), 1.0));
            }
        }
        for (th, u) in s.stus.iter().enumerate() {
            if u.bus == bus {
                terms.push((self.cat.stu_power.get(th, t), 1.0));
            }
        }
        for (l, line) in s.network.lines.iter().enumerate() {
            if line.from_bus == bus {
                terms.push((self.cat.line_flow.get(l, t), -1.0));
            }
            if line.to_bus == bus {
                terms.push((self.cat.line_flow.get(l, t), 1.0));
            }
        }
        if let Some(i) = s.network.pcc_buses.iter().position(|&p| p == bus) {
            terms.push((self.cat.pcc_trade.get(i, t), -1.0));
        }
        for (d, dem) in s.demands.iter().enumerate() {
            if dem.bus == bus {
                terms.push((self.cat.demand_power.get(d, t), -1.0));
            }
        }
        self.p
            .add_constraint(format!("balance[{},{}]", bus, t + 1), terms, Relation::Equal, 0.0);
    }

    /// DC flow definition per line; flow limits and the slack reference are
    /// variable bounds.
    fn add_network_constraints(&mut self, t: usize) {
        let net = &self.s.network;
        for (l, line) in net.lines.iter().enumerate() {
            let (Some(i), Some(j)) = (net.bus_index(line.from_bus), net.bus_index(line.to_bus)) else {
                continue;
            };
            self.p.add_constraint(
                format!("flow[{},{}]", line.id, t + 1),
                vec![
                    (self.cat.line_flow.get(l, t), 1.0),
                    (self.cat.bus_angle.get(i, t), -line.susceptance),
                    (self.cat.bus_angle.get(j, t), line.susceptance),
                ],
                Relation::Equal,
                0.0,
            );
        }
    }

    /// Commitment-dependent output limits and start-up/shut-down costs.
    /// `before` is the commitment ahead of the window.
    fn add_dres_constraints(&mut self, t: usize, c: usize, before: bool) {
        let u = &self.s.dispatchables[c];
        let cat = &self.cat;
        let (p, on) = (cat.dres_power.get(c, t), cat.dres_on.get(c, t));
        let (c0, c1) = (cat.dres_shutdown_cost.get(c, t), cat.dres_startup_cost.get(c, t));
        let name = |what: &str| format!("{what}[{},{}]", u.id, t + 1);
        self.p
            .add_constraint(name("pmin"), vec![(p, 1.0), (on, -u.p_min)], Relation::GreaterEq, 0.0);
        self.p
            .add_constraint(name("pmax"), vec![(p, 1.0), (on, -u.p_max)], Relation::LessEq, 0.0);

        let prev = if t > self.cat.first_period {
            Some(self.cat.dres_on.get(c, t - 1))
        } else {
            None
        };
        let init = if before { 1.0 } else { 0.0 };
        // c1 >= C1 (u_t - u_{t-1})
        let mut start = vec![(c1, 1.0), (on, -u.startup_cost)];
        // c0 >= C0 (u_{t-1} - u_t)
        let mut stop = vec![(c0, 1.0), (on, u.shutdown_cost)];
        let (start_rhs, stop_rhs) = match prev {
            Some(pv) => {
                start.push((pv, u.startup_cost));
                stop.push((pv, -u.shutdown_cost));
                (0.0, 0.0)
            }
            None => (-u.startup_cost * init, u.shutdown_cost * init),
        };
        self.p.add_constraint(name("startup"), start, Relation::GreaterEq, start_rhs);
        self.p.add_constraint(name("shutdown"), stop, Relation::GreaterEq, stop_rhs);
    }

    /// Thermal store balance. `before` is the stored energy ahead of the
    /// window.
    fn add_stu_constraints(&mut self, t: usize, th: usize, before: f64) {
        let u = &self.s.stus[th];
        let dt = self.s.dt();
        let cat = &self.cat;
        let mut terms = vec![
            (cat.stu_energy.get(th, t), 1.0),
            (cat.stu_charge.get(th, t), -u.efficiency * dt),
            (cat.stu_power.get(th, t), dt),
        ];
        let rhs = if t > cat.first_period {
            terms.push((cat.stu_energy.get(th, t - 1), -1.0));
            0.0
        } else {
            before
        };
        self.p
            .add_constraint(format!("store[{},{}]", u.id, t + 1), terms, Relation::Equal, rhs);
    }

    /// Consumption follows the selected profile; exactly one profile.
    fn add_profile_selection(&mut self, d: usize) {
        let dem = &self.s.demands[d];
        let choice = self.cat.profile_choice[d].clone();
        for t in self.periods() {
            let mut terms = vec![(self.cat.demand_power.get(d, t), 1.0)];
            for (pr, &u) in dem.profiles.iter().zip(&choice) {
                if pr.power[t] != 0.0 {
                    terms.push((u, -pr.power[t]));
                }
            }
            self.p
                .add_constraint(format!("profile[{},{}]", dem.id, t + 1), terms, Relation::Equal, 0.0);
        }
        self.p.add_constraint(
            format!("one_profile[{}]", dem.id),
            choice.iter().map(|&u| (u, 1.0)).collect(),
            Relation::Equal,
            1.0,
        );
    }

    /// Up/down ramp limits of consumption. At the window start the settled
    /// previous-period value is used; the day-ahead window has no ramp rows.
    fn add_demand_ramps(&mut self, d: usize, t: usize) {
        let dem = &self.s.demands[d];
        let dt = self.s.dt();
        let cur = self.cat.demand_power.get(d, t);
        let (up_terms, down_terms, up_rhs, down_rhs) = if t > self.cat.first_period {
            let prev = self.cat.demand_power.get(d, t - 1);
            (
                vec![(cur, 1.0), (prev, -1.0)],
                vec![(prev, 1.0), (cur, -1.0)],
                dem.ramp_up * dt,
                dem.ramp_down * dt,
            )
        } else if t > 0 {
            let settled = self
                .idm
                .as_ref()
                .map_or(0.0, |ctx| ctx.prev.demand_power[d][t - 1 - ctx.prev.first_period]);
            (
                vec![(cur, 1.0)],
                vec![(cur, -1.0)],
                dem.ramp_up * dt + settled,
                dem.ramp_down * dt - settled,
            )
        } else {
            return;
        };
        self.p.add_constraint(
            format!("ramp_up[{},{}]", dem.id, t + 1),
            up_terms,
            Relation::LessEq,
            up_rhs,
        );
        self.p.add_constraint(
            format!("ramp_down[{},{}]", dem.id, t + 1),
            down_terms,
            Relation::LessEq,
            down_rhs,
        );
    }

    /// Settled energy before the window plus planned energy inside it must
    /// reach the demand's minimum.
    fn add_min_energy(&mut self, d: usize) {
        let dem = &self.s.demands[d];
        let dt = self.s.dt();
        let first = self.cat.first_period;
        let settled: f64 = self.idm.as_ref().map_or(0.0, |ctx| {
            ctx.prev.demand_power[d][..first - ctx.prev.first_period]
                .iter()
                .sum::<f64>()
                * dt
        });
        let terms = self
            .periods()
            .map(|t| (self.cat.demand_power.get(d, t), dt))
            .collect();
        self.p.add_constraint(
            format!("min_energy[{}]", dem.id),
            terms,
            Relation::GreaterEq,
            dem.min_energy - settled,
        );
    }

    /// Market trade equals the sum of PCC exchanges, offset intraday by the
    /// settled position.
    fn add_trade_link(&mut self, t: usize) {
        let mut terms = vec![(self.cat.market_trade_at(t), 1.0)];
        for i in 0..self.s.network.pcc_buses.len() {
            terms.push((self.cat.pcc_trade.get(i, t), -1.0));
        }
        let rhs = self.idm.as_ref().map_or(0.0, |ctx| -ctx.base_position[t]);
        let name = match self.cat.stage {
            Stage::DayAhead => "dam_link",
            Stage::Intraday(_) => "idm_link",
        };
        self.p
            .add_constraint(format!("{name}[{}]", t + 1), terms, Relation::Equal, rhs);
    }

    fn add_adjustment_rows(&mut self, t: usize, c: usize) {
        let Some(ctx) = &self.idm else { return };
        let settled = ctx.prev.dres_power[c][t - ctx.prev.first_period];
        let u = &self.s.dispatchables[c];
        let dp = self.cat.dres_adjustment.as_ref().expect("intraday catalog").get(c, t);
        self.p.add_constraint(
            format!("adjust[{},{}]", u.id, t + 1),
            vec![(dp, 1.0), (self.cat.dres_power.get(c, t), -1.0)],
            Relation::Equal,
            -settled,
        );
        if let Some((up, down)) = &self.cat.dres_adjustment_parts {
            self.p.add_constraint(
                format!("adjust_abs[{},{}]", u.id, t + 1),
                vec![(dp, 1.0), (up.get(c, t), -1.0), (down.get(c, t), 1.0)],
                Relation::Equal,
                0.0,
            );
        }
    }

    fn add_common_families(&mut self) {
        let s = self.s;
        let first = self.cat.first_period;
        let dres_before: Vec<bool> = (0..s.dispatchables.len())
            .map(|c| match &self.idm {
                Some(ctx) if first > 0 => ctx.prev.dres_on[c][first - 1 - ctx.prev.first_period] > 0.5,
                _ => s.dispatchables[c].initial_on,
            })
            .collect();
        let stu_before: Vec<f64> = (0..s.stus.len())
            .map(|th| match &self.idm {
                Some(ctx) if first > 0 => ctx.prev.stu_energy[th][first - 1 - ctx.prev.first_period],
                _ => s.stus[th].initial_energy,
            })
            .collect();

        for t in self.periods() {
            for b in 0..s.network.buses.len() {
                self.add_bus_balance(t, b);
            }
            self.add_network_constraints(t);
            for (c, &before) in dres_before.iter().enumerate() {
                self.add_dres_constraints(t, c, before);
                self.add_adjustment_rows(t, c);
            }
            for (th, &before) in stu_before.iter().enumerate() {
                self.add_stu_constraints(t, th, before);
            }
            self.add_trade_link(t);
        }
    }

    fn add_dam_objective(&mut self) {
        let s = self.s;
        let dt = s.dt();
        for t in self.periods() {
            self.p
                .add_objective(self.cat.market_trade_at(t), s.market.dam_prices[t] * dt);
            self.add_commitment_objective(t);
            for (c, u) in s.dispatchables.iter().enumerate() {
                self.p
                    .add_objective(self.cat.dres_power.get(c, t), -u.variable_cost * dt);
            }
        }
        for (d, dem) in s.demands.iter().enumerate() {
            for (pr, &u) in dem.profiles.iter().zip(&self.cat.profile_choice[d]) {
                if pr.cost != 0.0 {
                    self.p.add_objective(u, -pr.cost);
                }
            }
        }
    }

    fn add_commitment_objective(&mut self, t: usize) {
        for c in 0..self.s.dispatchables.len() {
            self.p.add_objective(self.cat.dres_shutdown_cost.get(c, t), -1.0);
            self.p.add_objective(self.cat.dres_startup_cost.get(c, t), -1.0);
        }
    }

    fn add_idm_objective(&mut self, k: usize, opts: &FormulationOptions) {
        let s = self.s;
        let dt = s.dt();
        let session = &s.market.idm_sessions[k - 1];
        for t in self.periods() {
            self.p
                .add_objective(self.cat.market_trade_at(t), session.price(t) * dt);
            self.add_commitment_objective(t);
            for (c, u) in s.dispatchables.iter().enumerate() {
                let coef = -u.variable_cost * dt;
                match (&self.cat.dres_adjustment_parts, opts.adjustment_cost) {
                    (Some((up, down)), AdjustmentCost::Absolute) => {
                        self.p.add_objective(up.get(c, t), coef);
                        self.p.add_objective(down.get(c, t), coef);
                    }
                    _ => {
                        let dp = self.cat.dres_adjustment.as_ref().expect("intraday catalog");
                        self.p.add_objective(dp.get(c, t), coef);
                    }
                }
            }
        }
        self.p.objective_constant = self.cat.commitment_baseline;
    }
}

/// Builds the day-ahead program over the full horizon.
pub fn build_dam_program(s: &Scenario) -> Result<(MixedIntegerProgram, VariableCatalog)> {
    reject_invalid(s)?;
    let mut b = Builder::new(s, Stage::DayAhead, 0, None);
    b.declare_variables(&FormulationOptions::default());
    b.add_common_families();
    for d in 0..s.demands.len() {
        b.add_profile_selection(d);
    }
    b.add_dam_objective();
    Ok((b.p, b.cat))
}

/// Builds the program of intraday session `k` (1-based) on top of the
/// day-ahead result and sessions `1..k` already in `settled`.
pub fn build_idm_program(
    s: &Scenario,
    k: usize,
    settled: &SettledState,
    opts: &FormulationOptions,
) -> Result<(MixedIntegerProgram, VariableCatalog)> {
    reject_invalid(s)?;
    let sessions = s.market.idm_sessions.len();
    if k == 0 || k > sessions {
        return Err(Error::UnknownSession { session: k, sessions });
    }
    let Some(dam) = &settled.dam else {
        return Err(Error::MissingStage {
            session: k,
            detail: "day-ahead result not settled".into(),
        });
    };
    if settled.sessions.len() != k - 1 {
        return Err(Error::MissingStage {
            session: k,
            detail: format!(
                "expected sessions 1..{} settled, found {}",
                k - 1,
                settled.sessions.len()
            ),
        });
    }
    if settled.chosen_profiles.len() != s.demands.len() || dam.trade.len() != s.horizon() {
        return Err(Error::MissingStage {
            session: k,
            detail: "day-ahead settlement does not match the scenario".into(),
        });
    }

    let session = &s.market.idm_sessions[k - 1];
    let first = session.start();
    let prev = settled.current_schedule().expect("day-ahead present");
    let chosen_power = s
        .demands
        .iter()
        .zip(&settled.chosen_profiles)
        .map(|(d, &p)| d.profiles[p].power.clone())
        .collect();
    let base_position = (0..s.horizon()).map(|t| settled.net_position(t)).collect();

    let baseline: f64 = s
        .dispatchables
        .iter()
        .enumerate()
        .map(|(c, u)| {
            let before = if first > 0 { prev.dres_on[c][first - 1] > 0.5 } else { u.initial_on };
            let on: Vec<f64> = prev.dres_on[c][first..].iter().map(|v| v.round()).collect();
            commitment_cost(u.startup_cost, u.shutdown_cost, before, &on)
        })
        .sum();

    let ctx = IntradayContext {
        session: k,
        prev,
        chosen_power,
        base_position,
    };
    let mut b = Builder::new(s, Stage::Intraday(k), first, Some(ctx));
    b.cat.commitment_baseline = baseline;
    b.declare_variables(opts);
    b.add_common_families();
    for d in 0..s.demands.len() {
        for t in b.periods() {
            b.add_demand_ramps(d, t);
        }
        b.add_min_energy(d);
    }
    debug_assert_eq!(b.idm.as_ref().map(|c| c.session), Some(k));
    b.add_idm_objective(k, opts);
    Ok((b.p, b.cat))
}

/// Objective of a stage evaluated term by term from a solution.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ObjectiveTerms {
    /// Market price times traded energy.
    pub trade_revenue: f64,
    /// Variable production cost (of output day-ahead, of adjustments
    /// intraday).
    pub variable_cost: f64,
    /// Start-up and shut-down cost, net of the settled baseline intraday.
    pub commitment_cost: f64,
    /// Payments to demand owners for non-default profiles.
    pub profile_payments: f64,
}

impl ObjectiveTerms {
    pub fn profit(&self) -> f64 {
        self.trade_revenue - self.variable_cost - self.commitment_cost - self.profile_payments
    }
}

/// Evaluates the stage objective from `values` without the program's own
/// objective vector.
pub fn objective_terms(
    s: &Scenario,
    cat: &VariableCatalog,
    values: &[f64],
    opts: &FormulationOptions,
) -> ObjectiveTerms {
    let dt = s.dt();
    let val = |v: VarId| values[v.index()];
    let mut terms = ObjectiveTerms::default();
    for t in cat.periods() {
        let price = match cat.stage {
            Stage::DayAhead => s.market.dam_prices[t],
            Stage::Intraday(k) => s.market.idm_sessions[k - 1].price(t),
        };
        terms.trade_revenue += price * val(cat.market_trade_at(t)) * dt;
        for (c, u) in s.dispatchables.iter().enumerate() {
            let output = match (cat.stage, &cat.dres_adjustment, &cat.dres_adjustment_parts) {
                (Stage::DayAhead, _, _) => val(cat.dres_power.get(c, t)),
                (_, _, Some((up, down))) if opts.adjustment_cost == AdjustmentCost::Absolute => {
                    val(up.get(c, t)) + val(down.get(c, t))
                }
                (_, Some(dp), _) => val(dp.get(c, t)),
                _ => 0.0,
            };
            terms.variable_cost += u.variable_cost * output * dt;
            terms.commitment_cost +=
                val(cat.dres_shutdown_cost.get(c, t)) + val(cat.dres_startup_cost.get(c, t));
        }
    }
    terms.commitment_cost -= cat.commitment_baseline;
    for (d, dem) in s.demands.iter().enumerate() {
        if let Some(us) = cat.profile_choice.get(d) {
            for (pr, &u) in dem.profiles.iter().zip(us) {
                terms.profile_payments += pr.cost * val(u);
            }
        }
    }
    terms
}
