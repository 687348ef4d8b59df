//! Test scenarios and an independent feasibility audit of settled days.
//!
//! The audit reads variable values through the catalog and checks them
//! against the scenario data directly, without looking at the program rows
//! the formulation produced.

#![allow(dead_code)]

use std::collections::BTreeMap;

use vppflex::formulation::{SettledState, Stage};
use vppflex::market::{MarketDayState, StageRecord};
use vppflex::model::*;

pub const TOL: f64 = 1e-6;

pub fn bus(id: u32) -> Bus {
    Bus { id: BusId(id), name: format!("bus{id}") }
}

pub fn line(id: &str, from: u32, to: u32, susceptance: f64, limit: f64) -> Line {
    Line {
        id: id.into(),
        from_bus: BusId(from),
        to_bus: BusId(to),
        susceptance,
        flow_limit: limit,
    }
}

pub fn profile(id: &str, power: &[f64], cost: f64) -> DemandProfile {
    DemandProfile { id: id.into(), power: power.to_vec(), cost }
}

pub fn demand(id: &str, bus: u32, profiles: Vec<DemandProfile>, min_energy: f64, tol: f64) -> Demand {
    let horizon = profiles[0].power.len();
    Demand {
        id: id.into(),
        bus: BusId(bus),
        default_profile: profiles[0].id.clone(),
        profiles,
        min_energy,
        ramp_up: 100.0,
        ramp_down: 100.0,
        tolerance_down: vec![tol; horizon],
        tolerance_up: vec![tol; horizon],
    }
}

pub fn session(tau: usize, prices: &[f64]) -> IdmSession {
    IdmSession { tau, prices: prices.to_vec(), forecast_updates: BTreeMap::new() }
}

/// Buses `1..=n` with bus 1 the grid connection, joined in a chain by
/// uncongested lines, no assets, prices `prices`.
pub fn chain(n: u32, prices: &[f64]) -> Scenario {
    Scenario {
        name: format!("chain-{n}"),
        description: String::new(),
        network: Network {
            buses: (1..=n).map(bus).collect(),
            lines: (1..n)
                .map(|i| line(&format!("l{i}"), i, i + 1, 10.0, 1000.0))
                .collect(),
            pcc_buses: vec![BusId(1)],
            slack_bus: BusId(1),
        },
        dispatchables: vec![],
        nondispatchables: vec![],
        stus: vec![],
        demands: vec![],
        market: MarketStructure {
            horizon: prices.len(),
            dt_hours: 1.0,
            dam_prices: prices.to_vec(),
            idm_sessions: vec![],
        },
        pcc_limits: vec![PccLimit { bus: BusId(1), p_max_trade: 1000.0 }],
    }
}

pub fn hydro(id: &str, bus: u32, p_min: f64, p_max: f64, cost: f64, on: bool) -> DispatchableUnit {
    DispatchableUnit {
        id: id.into(),
        bus: BusId(bus),
        p_min,
        p_max,
        variable_cost: cost,
        startup_cost: 0.0,
        shutdown_cost: 0.0,
        initial_on: on,
    }
}

pub fn wind(id: &str, bus: u32, available: &[f64]) -> NonDispatchableUnit {
    NonDispatchableUnit {
        id: id.into(),
        bus: BusId(bus),
        p_min: vec![0.0; available.len()],
        available: available.to_vec(),
    }
}

struct Audit {
    failures: Vec<String>,
}

impl Audit {
    fn le(&mut self, what: impl FnOnce() -> String, lhs: f64, rhs: f64) {
        if lhs - rhs > TOL {
            self.failures.push(format!("{}: {lhs} > {rhs}", what()));
        }
    }

    fn eq(&mut self, what: impl FnOnce() -> String, lhs: f64, rhs: f64) {
        if (lhs - rhs).abs() > TOL {
            self.failures.push(format!("{}: {lhs} != {rhs}", what()));
        }
    }
}

/// Schedule in force before `stage`: the day-ahead result with every
/// earlier session laid over it.
fn schedule_before(state: &MarketDayState, k: usize) -> vppflex::formulation::Schedule {
    let partial = SettledState {
        dam: state.settled.dam.clone(),
        chosen_profiles: state.settled.chosen_profiles.clone(),
        sessions: state.settled.sessions[..k - 1].to_vec(),
    };
    partial.current_schedule().expect("day-ahead settled")
}

fn audit_stage(a: &mut Audit, state: &MarketDayState, index: usize) {
    let s = &state.scenario;
    let rec: &StageRecord = &state.stages[index];
    let cat = &rec.catalog;
    let x = |v: milp::VarId| rec.solution.values[v.index()];
    let dt = s.dt();
    let stage = rec.stage;
    let (vintage, before) = match stage {
        Stage::DayAhead => (0, None),
        Stage::Intraday(k) => (k, Some(schedule_before(state, k))),
    };
    let first = cat.first_period;
    for t in first..s.horizon() {
        let tag = |what: &str| format!("{stage} t={} {what}", t + 1);
        for bus in &s.network.buses {
            let mut net = 0.0;
            for (c, u) in s.dispatchables.iter().enumerate() {
                if u.bus == bus.id {
                    net += x(cat.dres_power.get(c, t));
                }
            }
            for (r, u) in s.nondispatchables.iter().enumerate() {
                if u.bus == bus.id {
                    net += x(cat.ndres_power.get(r, t));
                }
            }
            for (th, u) in s.stus.iter().enumerate() {
                if u.bus == bus.id {
                    net += x(cat.stu_power.get(th, t));
                }
            }
            for (d, u) in s.demands.iter().enumerate() {
                if u.bus == bus.id {
                    net -= x(cat.demand_power.get(d, t));
                }
            }
            for (l, ln) in s.network.lines.iter().enumerate() {
                if ln.from_bus == bus.id {
                    net -= x(cat.line_flow.get(l, t));
                }
                if ln.to_bus == bus.id {
                    net += x(cat.line_flow.get(l, t));
                }
            }
            if let Some(i) = s.network.pcc_buses.iter().position(|b| *b == bus.id) {
                net -= x(cat.pcc_trade.get(i, t));
            }
            a.eq(|| tag(&format!("balance bus {}", bus.id)), net, 0.0);
        }

        let angle = |b: BusId| x(cat.bus_angle.get(s.network.bus_index(b).unwrap(), t));
        a.eq(|| tag("slack angle"), angle(s.network.slack_bus), 0.0);
        for (l, ln) in s.network.lines.iter().enumerate() {
            let f = x(cat.line_flow.get(l, t));
            a.eq(|| tag(&format!("dc flow {}", ln.id)), f, ln.susceptance * (angle(ln.from_bus) - angle(ln.to_bus)));
            a.le(|| tag(&format!("flow limit {}", ln.id)), f.abs(), ln.flow_limit);
        }

        let mut pcc_sum = 0.0;
        for (i, b) in s.network.pcc_buses.iter().enumerate() {
            let p = x(cat.pcc_trade.get(i, t));
            pcc_sum += p;
            a.le(|| tag(&format!("trade bound bus {b}")), p.abs(), s.pcc_limit(*b).unwrap());
        }
        match stage {
            Stage::DayAhead => a.eq(|| tag("dam link"), x(cat.market_trade_at(t)), pcc_sum),
            Stage::Intraday(k) => {
                let dam = state.settled.dam.as_ref().unwrap().trade[t];
                let ids: f64 = state.settled.sessions[..k]
                    .iter()
                    .filter(|ss| t >= ss.first_period)
                    .map(|ss| ss.trade[t - ss.first_period])
                    .sum();
                a.eq(|| tag("intraday identity"), dam + ids, pcc_sum);
            }
        }

        for (c, u) in s.dispatchables.iter().enumerate() {
            let p = x(cat.dres_power.get(c, t));
            let on = x(cat.dres_on.get(c, t));
            if on != 0.0 && on != 1.0 {
                a.failures.push(tag(&format!("commitment {} not binary: {on}", u.id)));
            }
            a.le(|| tag("dres min"), u.p_min * on, p);
            a.le(|| tag("dres max"), p, u.p_max * on);
            let prev = if t > first {
                x(cat.dres_on.get(c, t - 1))
            } else if let Some(b) = &before {
                if t > 0 { b.dres_on[c][t - 1] } else if u.initial_on { 1.0 } else { 0.0 }
            } else if u.initial_on {
                1.0
            } else {
                0.0
            };
            a.le(|| tag("startup cost"), u.startup_cost * (on - prev), x(cat.dres_startup_cost.get(c, t)));
            a.le(|| tag("shutdown cost"), u.shutdown_cost * (prev - on), x(cat.dres_shutdown_cost.get(c, t)));
        }
        for (r, u) in s.nondispatchables.iter().enumerate() {
            let p = x(cat.ndres_power.get(r, t));
            a.le(|| tag(&format!("ndres min {}", u.id)), u.p_min[t], p);
            a.le(|| tag(&format!("ndres max {}", u.id)), p, s.availability(r, vintage, t));
        }
        for (th, u) in s.stus.iter().enumerate() {
            let e = x(cat.stu_energy.get(th, t));
            let prev = if t > first {
                x(cat.stu_energy.get(th, t - 1))
            } else if let (Some(b), true) = (&before, t > 0) {
                b.stu_energy[th][t - 1]
            } else {
                u.initial_energy
            };
            let q = x(cat.stu_charge.get(th, t));
            let p = x(cat.stu_power.get(th, t));
            a.eq(|| tag("stu energy"), e, prev + (u.efficiency * q - p) * dt);
            a.le(|| tag("stu capacity"), e, u.energy_capacity);
            a.le(|| tag("stu charge"), q, u.charge_limit.min(u.thermal_input[t]));
            a.le(|| tag("stu output"), p, u.p_max);
            a.le(|| tag("stu nonneg"), 0.0, e.min(q).min(p));
        }
    }

    for (d, dem) in s.demands.iter().enumerate() {
        match (&stage, &before) {
            (Stage::DayAhead, _) => {
                let us: Vec<f64> = cat.profile_choice[d].iter().map(|&u| x(u)).collect();
                if us.iter().sum::<f64>() != 1.0 || us.iter().any(|&u| u != 0.0 && u != 1.0) {
                    a.failures.push(format!("{stage} demand {} profile choice {us:?}", dem.id));
                }
                for t in 0..s.horizon() {
                    let expect: f64 = dem.profiles.iter().zip(&us).map(|(p, u)| p.power[t] * u).sum();
                    a.eq(|| format!("{stage} t={} profile power {}", t + 1, dem.id), x(cat.demand_power.get(d, t)), expect);
                }
            }
            (Stage::Intraday(_), Some(b)) => {
                let star = &dem.profiles[state.settled.chosen_profiles[d]].power;
                let mut energy: f64 = b.demand_power[d][..first].iter().sum::<f64>() * dt;
                for t in first..s.horizon() {
                    let p = x(cat.demand_power.get(d, t));
                    energy += p * dt;
                    let tag = |w: &str| format!("{stage} t={} {w} {}", t + 1, dem.id);
                    a.le(|| tag("band low"), (1.0 - dem.tolerance_down[t]) * star[t], p);
                    a.le(|| tag("band high"), p, (1.0 + dem.tolerance_up[t]) * star[t]);
                    if t > 0 {
                        let prev = if t > first { x(cat.demand_power.get(d, t - 1)) } else { b.demand_power[d][t - 1] };
                        a.le(|| tag("ramp up"), p - prev, dem.ramp_up * dt);
                        a.le(|| tag("ramp down"), prev - p, dem.ramp_down * dt);
                    }
                }
                a.le(|| format!("{stage} min energy {}", dem.id), dem.min_energy, energy);
            }
            _ => unreachable!(),
        }
    }
}

/// Every violated constraint of every settled stage, plus the final
/// consumption checks, as readable messages. Empty when the day is
/// feasible within [`TOL`].
pub fn audit_day(state: &MarketDayState) -> Vec<String> {
    let mut a = Audit { failures: Vec::new() };
    for i in 0..state.stages.len() {
        audit_stage(&mut a, state, i);
    }
    let s = &state.scenario;
    let fin = state.final_schedule().unwrap();
    for (d, dem) in s.demands.iter().enumerate() {
        let energy: f64 = fin.demand_power[d].iter().sum::<f64>() * s.dt();
        a.le(|| format!("final min energy {}", dem.id), dem.min_energy, energy);
        if !s.market.idm_sessions.is_empty() {
            let star = &dem.profiles[state.settled.chosen_profiles[d]].power;
            for t in 0..s.horizon() {
                let p = fin.demand_power[d][t];
                a.le(|| format!("final band low {} t={}", dem.id, t + 1), (1.0 - dem.tolerance_down[t]) * star[t], p);
                a.le(|| format!("final band high {} t={}", dem.id, t + 1), p, (1.0 + dem.tolerance_up[t]) * star[t]);
            }
        }
    }
    let trade = state.final_trade();
    for t in 0..s.horizon() {
        let pcc: f64 = fin.pcc_trade.iter().map(|v| v[t]).sum();
        a.eq(|| format!("final position t={}", t + 1), trade[t], pcc);
    }
    a.failures
}
