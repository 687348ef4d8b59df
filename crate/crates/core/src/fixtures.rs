//! Small hand-checkable scenarios shared by unit tests.

use std::collections::BTreeMap;

use crate::model::*;

/// One PCC bus, no generation, one demand with a 5 MWh shift between two
/// periods priced 20 and 30 €/MWh.
pub(crate) fn one_bus_scenario() -> Scenario {
    Scenario {
        name: "one-bus".into(),
        description: String::new(),
        network: Network {
            buses: vec![Bus { id: BusId(1), name: "pcc".into() }],
            lines: vec![],
            pcc_buses: vec![BusId(1)],
            slack_bus: BusId(1),
        },
        dispatchables: vec![],
        nondispatchables: vec![],
        stus: vec![],
        demands: vec![Demand {
            id: "load".into(),
            bus: BusId(1),
            profiles: vec![
                DemandProfile { id: "base".into(), power: vec![0.0, 5.0], cost: 0.0 },
                DemandProfile { id: "early".into(), power: vec![5.0, 0.0], cost: 10.0 },
            ],
            min_energy: 5.0,
            ramp_up: 10.0,
            ramp_down: 10.0,
            tolerance_down: vec![0.1; 2],
            tolerance_up: vec![0.1; 2],
            default_profile: "base".into(),
        }],
        market: MarketStructure {
            horizon: 2,
            dt_hours: 1.0,
            dam_prices: vec![20.0, 30.0],
            idm_sessions: vec![],
        },
        pcc_limits: vec![PccLimit { bus: BusId(1), p_max_trade: 50.0 }],
    }
}

/// [`one_bus_scenario`] plus a 20 MW hydro unit, initially off.
pub(crate) fn one_bus_with_hydro() -> Scenario {
    let mut s = one_bus_scenario();
    s.dispatchables.push(DispatchableUnit {
        id: "hydro".into(),
        bus: BusId(1),
        p_min: 2.0,
        p_max: 20.0,
        variable_cost: 25.0,
        startup_cost: 15.0,
        shutdown_cost: 5.0,
        initial_on: false,
    });
    s
}

/// Two buses joined by one uncongested line: wind at bus 2, demand and the
/// grid connection at bus 1. One intraday session repeats the day-ahead
/// prices and forecast, and the demand has no tolerance, so the session
/// has nothing new to exploit.
pub(crate) fn two_bus_scenario() -> Scenario {
    let prices = vec![40.0, 55.0];
    Scenario {
        name: "two-bus".into(),
        description: String::new(),
        network: Network {
            buses: vec![
                Bus { id: BusId(1), name: "pcc".into() },
                Bus { id: BusId(2), name: "wind".into() },
            ],
            lines: vec![Line {
                id: "l12".into(),
                from_bus: BusId(2),
                to_bus: BusId(1),
                susceptance: 10.0,
                flow_limit: 100.0,
            }],
            pcc_buses: vec![BusId(1)],
            slack_bus: BusId(1),
        },
        dispatchables: vec![DispatchableUnit {
            id: "hydro".into(),
            bus: BusId(1),
            p_min: 0.0,
            p_max: 10.0,
            variable_cost: 45.0,
            startup_cost: 0.0,
            shutdown_cost: 0.0,
            initial_on: true,
        }],
        nondispatchables: vec![NonDispatchableUnit {
            id: "wind".into(),
            bus: BusId(2),
            p_min: vec![0.0; 2],
            available: vec![12.0, 8.0],
        }],
        stus: vec![],
        demands: vec![Demand {
            id: "load".into(),
            bus: BusId(1),
            profiles: vec![
                DemandProfile { id: "base".into(), power: vec![4.0, 6.0], cost: 0.0 },
                DemandProfile { id: "shift".into(), power: vec![6.0, 4.0], cost: 5.0 },
            ],
            min_energy: 10.0,
            ramp_up: 10.0,
            ramp_down: 10.0,
            tolerance_down: vec![0.0; 2],
            tolerance_up: vec![0.0; 2],
            default_profile: "base".into(),
        }],
        market: MarketStructure {
            horizon: 2,
            dt_hours: 1.0,
            dam_prices: prices.clone(),
            idm_sessions: vec![IdmSession {
                tau: 1,
                prices,
                forecast_updates: BTreeMap::new(),
            }],
        },
        pcc_limits: vec![PccLimit { bus: BusId(1), p_max_trade: 30.0 }],
    }
}
