//! Versioned JSON scenario files.
//!
//! Parsing is strict: unknown fields are rejected and the parsed scenario
//! must pass [`validate_scenario`]. Emission is canonical (fixed field
//! order, pretty-printed, trailing newline), so a parsed file re-emits to
//! the same bytes every time.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    validate_scenario, Bus, BusId, Demand, DemandProfile, DispatchableUnit, IdmSession, Line,
    MarketStructure, Network, NonDispatchableUnit, PccLimit, Scenario, StorageThermalUnit,
    Violation,
};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ScenarioFileError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unsupported scenario format version {found} (expected {FORMAT_VERSION})")]
    Version { found: u32 },
    #[error("{} invalid: {}", violation_count(.0), .0.first().map(|v| v.to_string()).unwrap_or_default())]
    Invalid(Vec<Violation>),
}

fn violation_count(v: &[Violation]) -> String {
    match v.len() {
        1 => "1 field".to_string(),
        n => format!("{n} fields"),
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioDoc {
    version: u32,
    name: String,
    #[serde(default)]
    description: String,
    network: NetworkDoc,
    assets: AssetsDoc,
    demands: Vec<DemandDoc>,
    market: MarketDoc,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkDoc {
    buses: Vec<BusDoc>,
    lines: Vec<LineDoc>,
    pcc: Vec<PccDoc>,
    slack: u32,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BusDoc {
    id: u32,
    name: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LineDoc {
    id: String,
    from: u32,
    to: u32,
    susceptance: f64,
    limit: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PccDoc {
    bus: u32,
    max_trade: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AssetsDoc {
    dres: Vec<DresDoc>,
    ndres: Vec<NdresDoc>,
    stu: Vec<StuDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DresDoc {
    id: String,
    bus: u32,
    p_min: f64,
    p_max: f64,
    variable_cost: f64,
    startup_cost: f64,
    shutdown_cost: f64,
    initial_on: bool,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NdresDoc {
    id: String,
    bus: u32,
    p_min: Vec<f64>,
    available: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StuDoc {
    id: String,
    bus: u32,
    p_max: f64,
    energy_capacity: f64,
    charge_limit: f64,
    efficiency: f64,
    initial_energy: f64,
    thermal_input: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DemandDoc {
    id: String,
    bus: u32,
    min_energy: f64,
    ramp_up: f64,
    ramp_down: f64,
    tolerance_down: Vec<f64>,
    tolerance_up: Vec<f64>,
    default_profile: String,
    profiles: Vec<ProfileDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfileDoc {
    id: String,
    cost: f64,
    power: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MarketDoc {
    horizon: usize,
    dt_hours: f64,
    dam_prices: Vec<f64>,
    idm_sessions: Vec<SessionDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SessionDoc {
    tau: usize,
    prices: Vec<f64>,
    #[serde(default)]
    forecast_updates: BTreeMap<String, Vec<f64>>,
}

impl From<ScenarioDoc> for Scenario {
    fn from(d: ScenarioDoc) -> Self {
        let net = d.network;
        Scenario {
            name: d.name,
            description: d.description,
            network: Network {
                buses: net
                    .buses
                    .into_iter()
                    .map(|b| Bus { id: BusId(b.id), name: b.name })
                    .collect(),
                lines: net
                    .lines
                    .into_iter()
                    .map(|l| Line {
                        id: l.id,
                        from_bus: BusId(l.from),
                        to_bus: BusId(l.to),
                        susceptance: l.susceptance,
                        flow_limit: l.limit,
                    })
                    .collect(),
                pcc_buses: net.pcc.iter().map(|p| BusId(p.bus)).collect(),
                slack_bus: BusId(net.slack),
            },
            pcc_limits: net
                .pcc
                .into_iter()
                .map(|p| PccLimit { bus: BusId(p.bus), p_max_trade: p.max_trade })
                .collect(),
            dispatchables: d
                .assets
                .dres
                .into_iter()
                .map(|c| DispatchableUnit {
                    id: c.id,
                    bus: BusId(c.bus),
                    p_min: c.p_min,
                    p_max: c.p_max,
                    variable_cost: c.variable_cost,
                    startup_cost: c.startup_cost,
                    shutdown_cost: c.shutdown_cost,
                    initial_on: c.initial_on,
                })
                .collect(),
            nondispatchables: d
                .assets
                .ndres
                .into_iter()
                .map(|r| NonDispatchableUnit {
                    id: r.id,
                    bus: BusId(r.bus),
                    p_min: r.p_min,
                    available: r.available,
                })
                .collect(),
            stus: d
                .assets
                .stu
                .into_iter()
                .map(|s| StorageThermalUnit {
                    id: s.id,
                    bus: BusId(s.bus),
                    p_max: s.p_max,
                    energy_capacity: s.energy_capacity,
                    charge_limit: s.charge_limit,
                    efficiency: s.efficiency,
                    initial_energy: s.initial_energy,
                    thermal_input: s.thermal_input,
                })
                .collect(),
            demands: d
                .demands
                .into_iter()
                .map(|x| Demand {
                    id: x.id,
                    bus: BusId(x.bus),
                    profiles: x
                        .profiles
                        .into_iter()
                        .map(|p| DemandProfile { id: p.id, power: p.power, cost: p.cost })
                        .collect(),
                    min_energy: x.min_energy,
                    ramp_up: x.ramp_up,
                    ramp_down: x.ramp_down,
                    tolerance_down: x.tolerance_down,
                    tolerance_up: x.tolerance_up,
                    default_profile: x.default_profile,
                })
                .collect(),
            market: MarketStructure {
                horizon: d.market.horizon,
                dt_hours: d.market.dt_hours,
                dam_prices: d.market.dam_prices,
                idm_sessions: d
                    .market
                    .idm_sessions
                    .into_iter()
                    .map(|k| IdmSession {
                        tau: k.tau,
                        prices: k.prices,
                        forecast_updates: k.forecast_updates,
                    })
                    .collect(),
            },
        }
    }
}

impl From<&Scenario> for ScenarioDoc {
    fn from(s: &Scenario) -> Self {
        let net = &s.network;
        ScenarioDoc {
            version: FORMAT_VERSION,
            name: s.name.clone(),
            description: s.description.clone(),
            network: NetworkDoc {
                buses: net
                    .buses
                    .iter()
                    .map(|b| BusDoc { id: b.id.0, name: b.name.clone() })
                    .collect(),
                lines: net
                    .lines
                    .iter()
                    .map(|l| LineDoc {
                        id: l.id.clone(),
                        from: l.from_bus.0,
                        to: l.to_bus.0,
                        susceptance: l.susceptance,
                        limit: l.flow_limit,
                    })
                    .collect(),
                pcc: net
                    .pcc_buses
                    .iter()
                    .map(|&b| PccDoc {
                        bus: b.0,
                        max_trade: s.pcc_limit(b).unwrap_or(0.0),
                    })
                    .collect(),
                slack: net.slack_bus.0,
            },
            assets: AssetsDoc {
                dres: s
                    .dispatchables
                    .iter()
                    .map(|c| DresDoc {
                        id: c.id.clone(),
                        bus: c.bus.0,
                        p_min: c.p_min,
                        p_max: c.p_max,
                        variable_cost: c.variable_cost,
                        startup_cost: c.startup_cost,
                        shutdown_cost: c.shutdown_cost,
                        initial_on: c.initial_on,
                    })
                    .collect(),
                ndres: s
                    .nondispatchables
                    .iter()
                    .map(|r| NdresDoc {
                        id: r.id.clone(),
                        bus: r.bus.0,
                        p_min: r.p_min.clone(),
                        available: r.available.clone(),
                    })
                    .collect(),
                stu: s
                    .stus
                    .iter()
                    .map(|th| StuDoc {
                        id: th.id.clone(),
                        bus: th.bus.0,
                        p_max: th.p_max,
                        energy_capacity: th.energy_capacity,
                        charge_limit: th.charge_limit,
                        efficiency: th.efficiency,
                        initial_energy: th.initial_energy,
                        thermal_input: th.thermal_input.clone(),
                    })
                    .collect(),
            },
            demands: s
                .demands
                .iter()
                .map(|d| DemandDoc {
                    id: d.id.clone(),
                    bus: d.bus.0,
                    min_energy: d.min_energy,
                    ramp_up: d.ramp_up,
                    ramp_down: d.ramp_down,
                    tolerance_down: d.tolerance_down.clone(),
                    tolerance_up: d.tolerance_up.clone(),
                    default_profile: d.default_profile.clone(),
                    profiles: d
                        .profiles
                        .iter()
                        .map(|p| ProfileDoc {
                            id: p.id.clone(),
                            cost: p.cost,
                            power: p.power.clone(),
                        })
                        .collect(),
                })
                .collect(),
            market: MarketDoc {
                horizon: s.market.horizon,
                dt_hours: s.market.dt_hours,
                dam_prices: s.market.dam_prices.clone(),
                idm_sessions: s
                    .market
                    .idm_sessions
                    .iter()
                    .map(|k| SessionDoc {
                        tau: k.tau,
                        prices: k.prices.clone(),
                        forecast_updates: k.forecast_updates.clone(),
                    })
                    .collect(),
            },
        }
    }
}

#[derive(Deserialize)]
struct VersionProbe {
    version: u32,
}

fn syntax(e: serde_json::Error) -> ScenarioFileError {
    ScenarioFileError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    }
}

/// Parses and validates scenario text.
pub fn parse_scenario_str(text: &str) -> Result<Scenario, ScenarioFileError> {
    // Check the version first so an old file reports that rather than the
    // first schema difference.
    let probe: VersionProbe = serde_json::from_str(text).map_err(syntax)?;
    if probe.version != FORMAT_VERSION {
        return Err(ScenarioFileError::Version { found: probe.version });
    }
    let doc: ScenarioDoc = serde_json::from_str(text).map_err(syntax)?;
    let scenario = Scenario::from(doc);
    let violations = validate_scenario(&scenario);
    if violations.is_empty() {
        Ok(scenario)
    } else {
        Err(ScenarioFileError::Invalid(violations))
    }
}

pub fn parse_scenario(path: &Path) -> Result<Scenario, ScenarioFileError> {
    let text = fs::read_to_string(path).map_err(|source| ScenarioFileError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_scenario_str(&text)
}

/// Canonical text of `s`.
pub fn emit_scenario(s: &Scenario) -> String {
    let mut text = serde_json::to_string_pretty(&ScenarioDoc::from(s)).expect("serializable");
    text.push('\n');
    text
}

/// The 12-node case-study scenario shipped with the crate.
pub fn bundled_twelve_node() -> Scenario {
    parse_scenario_str(BUNDLED_TWELVE_NODE).expect("bundled scenario is valid")
}

pub const BUNDLED_TWELVE_NODE: &str = include_str!("../data/twelve_node.json");
