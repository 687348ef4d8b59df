//! Problem-instance types for the virtual power plant and their validation.
//!
//! Periods are 0-based internally (`0..horizon`); intraday session start
//! periods (`tau`) are 1-based as they appear in scenario files.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

/// Absolute tolerance for equality checks in the quantity's natural unit.
pub const VALIDATION_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BusId(pub u32);

impl fmt::Display for BusId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bus {
    pub id: BusId,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Line {
    pub id: String,
    pub from_bus: BusId,
    pub to_bus: BusId,
    /// MW per radian of angle difference.
    pub susceptance: f64,
    pub flow_limit: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub buses: Vec<Bus>,
    pub lines: Vec<Line>,
    pub pcc_buses: Vec<BusId>,
    pub slack_bus: BusId,
}

impl Network {
    pub fn bus_index(&self, id: BusId) -> Option<usize> {
        self.buses.iter().position(|b| b.id == id)
    }

    pub fn is_pcc(&self, id: BusId) -> bool {
        self.pcc_buses.contains(&id)
    }

    /// True when every bus can be reached from the first one.
    pub fn is_connected(&self) -> bool {
        if self.buses.is_empty() {
            return true;
        }
        let mut seen = BTreeSet::new();
        let mut queue = VecDeque::from([self.buses[0].id]);
        seen.insert(self.buses[0].id);
        while let Some(b) = queue.pop_front() {
            for l in &self.lines {
                let next = if l.from_bus == b {
                    l.to_bus
                } else if l.to_bus == b {
                    l.from_bus
                } else {
                    continue;
                };
                if seen.insert(next) {
                    queue.push_back(next);
                }
            }
        }
        self.buses.iter().all(|b| seen.contains(&b.id))
    }
}

/// Dispatchable renewable unit (hydro), committed like a thermal plant.
#[derive(Debug, Clone, PartialEq)]
pub struct DispatchableUnit {
    pub id: String,
    pub bus: BusId,
    pub p_min: f64,
    pub p_max: f64,
    /// €/MWh
    pub variable_cost: f64,
    /// € per start
    pub startup_cost: f64,
    /// € per stop
    pub shutdown_cost: f64,
    pub initial_on: bool,
}

/// Non-dispatchable renewable unit (wind, PV). `available` is the
/// day-ahead forecast; intraday sessions may replace it from their start.
#[derive(Debug, Clone, PartialEq)]
pub struct NonDispatchableUnit {
    pub id: String,
    pub bus: BusId,
    pub p_min: Vec<f64>,
    pub available: Vec<f64>,
}

/// Solar thermal unit with a single thermal store. Charging applies
/// `efficiency`; discharge into the generator is lossless.
#[derive(Debug, Clone, PartialEq)]
pub struct StorageThermalUnit {
    pub id: String,
    pub bus: BusId,
    pub p_max: f64,
    /// MWh
    pub energy_capacity: f64,
    /// MW
    pub charge_limit: f64,
    pub efficiency: f64,
    /// MWh
    pub initial_energy: f64,
    /// MW of collectable heat per period.
    pub thermal_input: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemandProfile {
    pub id: String,
    /// MW per period.
    pub power: Vec<f64>,
    /// € per day paid to the owner when this profile is chosen.
    pub cost: f64,
}

impl DemandProfile {
    pub fn energy(&self, dt_hours: f64) -> f64 {
        self.power.iter().sum::<f64>() * dt_hours
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Demand {
    pub id: String,
    pub bus: BusId,
    pub profiles: Vec<DemandProfile>,
    /// MWh over the horizon.
    pub min_energy: f64,
    /// MW/h
    pub ramp_up: f64,
    /// MW/h
    pub ramp_down: f64,
    /// Fractions of the chosen profile the intraday market may shed.
    pub tolerance_down: Vec<f64>,
    /// Fractions of the chosen profile the intraday market may add.
    pub tolerance_up: Vec<f64>,
    pub default_profile: String,
}

impl Demand {
    pub fn profile_index(&self, id: &str) -> Option<usize> {
        self.profiles.iter().position(|p| p.id == id)
    }

    pub fn default_index(&self) -> Option<usize> {
        self.profile_index(&self.default_profile)
    }
}

/// True iff every profile of `demand` carries the same energy within
/// [`VALIDATION_TOL`] MWh.
pub fn equal_energy_check(demand: &Demand, dt_hours: f64) -> bool {
    let mut energies = demand.profiles.iter().map(|p| p.energy(dt_hours));
    let Some(first) = energies.next() else {
        return true;
    };
    energies.all(|e| (e - first).abs() <= VALIDATION_TOL)
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdmSession {
    /// First delivery period, 1-based.
    pub tau: usize,
    /// €/MWh for periods `tau..=horizon`.
    pub prices: Vec<f64>,
    /// Replacement availability per non-dispatchable unit id, covering
    /// periods `tau..=horizon`.
    pub forecast_updates: BTreeMap<String, Vec<f64>>,
}

impl IdmSession {
    /// 0-based index of the first delivery period.
    pub fn start(&self) -> usize {
        self.tau.saturating_sub(1)
    }

    pub fn price(&self, t: usize) -> f64 {
        self.prices[t - self.start()]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarketStructure {
    pub horizon: usize,
    pub dt_hours: f64,
    pub dam_prices: Vec<f64>,
    pub idm_sessions: Vec<IdmSession>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PccLimit {
    pub bus: BusId,
    pub p_max_trade: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub description: String,
    pub network: Network,
    pub dispatchables: Vec<DispatchableUnit>,
    pub nondispatchables: Vec<NonDispatchableUnit>,
    pub stus: Vec<StorageThermalUnit>,
    pub demands: Vec<Demand>,
    pub market: MarketStructure,
    pub pcc_limits: Vec<PccLimit>,
}

impl Scenario {
    pub fn horizon(&self) -> usize {
        self.market.horizon
    }

    pub fn dt(&self) -> f64 {
        self.market.dt_hours
    }

    pub fn pcc_limit(&self, bus: BusId) -> Option<f64> {
        self.pcc_limits
            .iter()
            .find(|l| l.bus == bus)
            .map(|l| l.p_max_trade)
    }

    pub fn demand_index(&self, id: &str) -> Option<usize> {
        self.demands.iter().position(|d| d.id == id)
    }

    /// Available output of non-dispatchable unit `unit` in period `t` as
    /// seen by `vintage` (0 = day-ahead, k = intraday session k). A session
    /// without an update for the unit inherits the previous vintage.
    pub fn availability(&self, unit: usize, vintage: usize, t: usize) -> f64 {
        let r = &self.nondispatchables[unit];
        for k in (1..=vintage.min(self.market.idm_sessions.len())).rev() {
            let session = &self.market.idm_sessions[k - 1];
            if t < session.start() {
                continue;
            }
            if let Some(update) = session.forecast_updates.get(&r.id) {
                return update[t - session.start()];
            }
        }
        r.available[t]
    }

    /// Copy of this scenario with every demand's tolerance set to `fraction`
    /// in both directions for every period.
    pub fn with_symmetric_tolerance(&self, fraction: f64) -> Scenario {
        let mut s = self.clone();
        for d in &mut s.demands {
            d.tolerance_down = vec![fraction; s.market.horizon];
            d.tolerance_up = vec![fraction; s.market.horizon];
        }
        s
    }

    /// Copy of this scenario with every non-default profile cost set to
    /// `cost`.
    pub fn with_nondefault_costs(&self, cost: f64) -> Scenario {
        let mut s = self.clone();
        for d in &mut s.demands {
            let default = d.default_profile.clone();
            for p in &mut d.profiles {
                if p.id != default {
                    p.cost = cost;
                }
            }
        }
        s
    }
}

/// A broken invariant: which entity, which rule, and the offending value.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Violation {
    pub entity: String,
    pub invariant: String,
    pub value: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {} (got {})", self.entity, self.invariant, self.value)
    }
}

struct Collector(Vec<Violation>);

impl Collector {
    fn check(&mut self, ok: bool, entity: impl Into<String>, invariant: &str, value: impl fmt::Display) {
        if !ok {
            self.0.push(Violation {
                entity: entity.into(),
                invariant: invariant.to_string(),
                value: value.to_string(),
            });
        }
    }

    fn check_len(&mut self, entity: impl Into<String>, what: &str, len: usize, expected: usize) {
        self.check(
            len == expected,
            entity,
            &format!("{what} must have {expected} entries"),
            format!("{len} entries"),
        );
    }
}

fn fmt_list<T: fmt::Display>(items: &[T]) -> String {
    let parts: Vec<String> = items.iter().map(|x| x.to_string()).collect();
    format!("[{}]", parts.join(", "))
}

/// Lists every broken invariant of `s`. The result is sorted so repeated
/// calls and reordered inputs yield the same list.
pub fn validate_scenario(s: &Scenario) -> Vec<Violation> {
    let mut v = Collector(Vec::new());
    let horizon = s.market.horizon;
    let dt = s.market.dt_hours;
    let net = &s.network;
    let bus_ids: BTreeSet<BusId> = net.buses.iter().map(|b| b.id).collect();

    v.check(
        bus_ids.len() == net.buses.len(),
        "network",
        "bus ids must be unique",
        net.buses.len() - bus_ids.len(),
    );
    v.check(!net.pcc_buses.is_empty(), "network", "at least one PCC bus", "none");
    for b in &net.pcc_buses {
        v.check(bus_ids.contains(b), format!("pcc bus {b}"), "PCC bus must exist", b);
        v.check(
            s.pcc_limit(*b).is_some(),
            format!("pcc bus {b}"),
            "every PCC bus needs a trade limit",
            "missing",
        );
    }
    v.check(
        bus_ids.contains(&net.slack_bus),
        "network",
        "slack bus must exist",
        net.slack_bus,
    );
    v.check(net.is_connected(), "network", "network must be connected", "disconnected");

    let mut line_ids = BTreeSet::new();
    for l in &net.lines {
        let e = format!("line {}", l.id);
        v.check(line_ids.insert(l.id.clone()), e.clone(), "line ids must be unique", &l.id);
        v.check(bus_ids.contains(&l.from_bus), e.clone(), "from bus must exist", l.from_bus);
        v.check(bus_ids.contains(&l.to_bus), e.clone(), "to bus must exist", l.to_bus);
        v.check(l.from_bus != l.to_bus, e.clone(), "endpoints must differ", l.from_bus);
        v.check(l.susceptance > 0.0, e.clone(), "susceptance > 0", l.susceptance);
        v.check(l.flow_limit > 0.0, e, "flow limit > 0", l.flow_limit);
    }

    for p in &s.pcc_limits {
        let e = format!("pcc limit at bus {}", p.bus);
        v.check(net.is_pcc(p.bus), e.clone(), "limit must belong to a PCC bus", p.bus);
        v.check(p.p_max_trade > 0.0, e, "maximum trade > 0", p.p_max_trade);
    }

    let mut asset_ids = BTreeSet::new();
    let mut asset = |v: &mut Collector, kind: &str, id: &str, bus: BusId| -> String {
        let e = format!("{kind} {id}");
        v.check(asset_ids.insert(id.to_string()), e.clone(), "asset ids must be unique", id);
        v.check(bus_ids.contains(&bus), e.clone(), "asset bus must exist", bus);
        e
    };

    for c in &s.dispatchables {
        let e = asset(&mut v, "dispatchable", &c.id, c.bus);
        v.check(c.p_min >= 0.0, e.clone(), "p_min >= 0", c.p_min);
        v.check(c.p_min <= c.p_max, e.clone(), "p_min <= p_max", format!("{} > {}", c.p_min, c.p_max));
        v.check(c.variable_cost >= 0.0, e.clone(), "variable cost >= 0", c.variable_cost);
        v.check(c.startup_cost >= 0.0, e.clone(), "start-up cost >= 0", c.startup_cost);
        v.check(c.shutdown_cost >= 0.0, e, "shut-down cost >= 0", c.shutdown_cost);
    }

    for r in &s.nondispatchables {
        let e = asset(&mut v, "non-dispatchable", &r.id, r.bus);
        v.check_len(e.clone(), "p_min profile", r.p_min.len(), horizon);
        v.check_len(e.clone(), "availability profile", r.available.len(), horizon);
        for (t, (&lo, &hi)) in r.p_min.iter().zip(&r.available).enumerate() {
            v.check(lo >= 0.0, e.clone(), &format!("p_min >= 0 at period {}", t + 1), lo);
            v.check(
                lo <= hi,
                e.clone(),
                &format!("p_min <= availability at period {} (day-ahead)", t + 1),
                format!("{lo} > {hi}"),
            );
        }
    }

    for th in &s.stus {
        let e = asset(&mut v, "storage thermal unit", &th.id, th.bus);
        v.check(th.p_max >= 0.0, e.clone(), "p_max >= 0", th.p_max);
        v.check(th.charge_limit >= 0.0, e.clone(), "charge limit >= 0", th.charge_limit);
        v.check(
            th.efficiency > 0.0 && th.efficiency <= 1.0,
            e.clone(),
            "efficiency in (0, 1]",
            th.efficiency,
        );
        v.check(
            th.initial_energy >= 0.0 && th.initial_energy <= th.energy_capacity,
            e.clone(),
            "0 <= initial energy <= capacity",
            format!("{} of {}", th.initial_energy, th.energy_capacity),
        );
        v.check_len(e.clone(), "thermal input profile", th.thermal_input.len(), horizon);
        if let Some(bad) = th.thermal_input.iter().find(|x| **x < 0.0) {
            v.check(false, e, "thermal input >= 0", bad);
        }
    }

    for d in &s.demands {
        let e = asset(&mut v, "demand", &d.id, d.bus);
        v.check(!d.profiles.is_empty(), e.clone(), "at least one profile", "none");
        let zero_cost = d.profiles.iter().filter(|p| p.cost == 0.0).count();
        v.check(zero_cost == 1, e.clone(), "exactly one zero-cost profile", zero_cost);
        match d.default_index() {
            Some(i) => v.check(
                d.profiles[i].cost == 0.0,
                e.clone(),
                "default profile must cost 0",
                d.profiles[i].cost,
            ),
            None if !d.profiles.is_empty() => {
                v.check(false, e.clone(), "default profile must exist", &d.default_profile)
            }
            None => {}
        }
        v.check(d.ramp_up >= 0.0, e.clone(), "ramp up >= 0", d.ramp_up);
        v.check(d.ramp_down >= 0.0, e.clone(), "ramp down >= 0", d.ramp_down);
        v.check(d.min_energy >= 0.0, e.clone(), "minimum energy >= 0", d.min_energy);
        v.check_len(e.clone(), "tolerance_down", d.tolerance_down.len(), horizon);
        v.check_len(e.clone(), "tolerance_up", d.tolerance_up.len(), horizon);
        for (dir, tol) in [("down", &d.tolerance_down), ("up", &d.tolerance_up)] {
            if let Some(bad) = tol.iter().find(|x| !(0.0..1.0).contains(*x)) {
                v.check(false, e.clone(), &format!("tolerance {dir} in [0, 1)"), bad);
            }
        }
        let mut profile_ids = BTreeSet::new();
        for p in &d.profiles {
            let pe = format!("{e} profile {}", p.id);
            v.check(profile_ids.insert(p.id.clone()), pe.clone(), "profile ids must be unique", &p.id);
            v.check(p.cost >= 0.0, pe.clone(), "profile cost >= 0", p.cost);
            v.check_len(pe.clone(), "power profile", p.power.len(), horizon);
            if let Some(bad) = p.power.iter().find(|x| **x < 0.0) {
                v.check(false, pe.clone(), "power >= 0", bad);
            }
            let energy = p.energy(dt);
            v.check(
                d.min_energy <= energy + VALIDATION_TOL,
                pe,
                "minimum energy must not exceed the profile's energy",
                format!("{} MWh > {} MWh", d.min_energy, energy),
            );
        }
    }

    let m = &s.market;
    v.check(m.horizon >= 1, "market", "horizon >= 1", m.horizon);
    v.check(m.dt_hours > 0.0, "market", "period length > 0", m.dt_hours);
    v.check_len("market", "day-ahead prices", m.dam_prices.len(), horizon);
    let taus: Vec<usize> = m.idm_sessions.iter().map(|k| k.tau).collect();
    v.check(
        taus.windows(2).all(|w| w[0] < w[1]),
        "market",
        "session start periods strictly increasing",
        fmt_list(&taus),
    );
    for (i, k) in m.idm_sessions.iter().enumerate() {
        let e = format!("intraday session {}", i + 1);
        let in_range = k.tau >= 1 && k.tau <= horizon;
        v.check(in_range, e.clone(), "start period within 1..=horizon", k.tau);
        if !in_range {
            continue;
        }
        let window = horizon - k.start();
        v.check_len(e.clone(), "prices", k.prices.len(), window);
        for (unit, update) in &k.forecast_updates {
            let ue = format!("{e} forecast for {unit}");
            match s.nondispatchables.iter().find(|r| &r.id == unit) {
                None => v.check(false, ue, "forecast update must name a non-dispatchable unit", unit),
                Some(r) => {
                    v.check_len(ue.clone(), "forecast update", update.len(), window);
                    for (off, &hi) in update.iter().enumerate() {
                        let t = k.start() + off;
                        let lo = r.p_min.get(t).copied().unwrap_or(0.0);
                        v.check(
                            lo <= hi,
                            ue.clone(),
                            &format!("p_min <= availability at period {}", t + 1),
                            format!("{lo} > {hi}"),
                        );
                    }
                }
            }
        }
    }

    let mut out = v.0;
    out.sort();
    out.dedup();
    out
}
