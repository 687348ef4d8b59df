//! Seeded generator of small valid scenarios for tests and `--seed` runs.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::*;

fn round3(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}

/// Builds a connected network of 2 to 5 buses with generation, storage and
/// 1 to 3 flexible demands over 4 to 8 hourly periods. Grid and line limits
/// are generous, so the day-ahead stage is feasible for every profile
/// choice. The same seed always yields the same scenario.
pub fn random_scenario(seed: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let horizon = rng.gen_range(4..=8);
    let nbus = rng.gen_range(2..=5u32);
    let buses: Vec<Bus> = (1..=nbus)
        .map(|i| Bus { id: BusId(i), name: format!("bus{i}") })
        .collect();
    let pick_bus = |rng: &mut ChaCha8Rng| BusId(rng.gen_range(1..=nbus));

    let mut demands = Vec::new();
    let mut peak_load = 0.0;
    for d in 0..rng.gen_range(1..=3) {
        let base: Vec<f64> = (0..horizon).map(|_| round3(rng.gen_range(0.0..20.0))).collect();
        let energy: f64 = base.iter().sum();
        let nprof = rng.gen_range(2..=3);
        let mut shifts: Vec<usize> = (1..horizon).collect();
        shifts.shuffle(&mut rng);
        let mut profiles = vec![DemandProfile { id: "default".into(), power: base.clone(), cost: 0.0 }];
        for (i, &k) in shifts.iter().take(nprof - 1).enumerate() {
            let mut power = base.clone();
            power.rotate_right(k);
            profiles.push(DemandProfile {
                id: format!("shift{}", i + 1),
                power,
                cost: round3(rng.gen_range(1.0..200.0)),
            });
        }
        let step = profiles
            .iter()
            .flat_map(|p| p.power.windows(2).map(|w| (w[1] - w[0]).abs()))
            .fold(0.0, f64::max);
        peak_load += base.iter().fold(0.0, |a: f64, &b| a.max(b));
        let tol = round3(rng.gen_range(0.0..0.5));
        demands.push(Demand {
            id: format!("d{}", d + 1),
            bus: pick_bus(&mut rng),
            profiles,
            min_energy: round3(energy * rng.gen_range(0.8..1.0)),
            ramp_up: (step + 5.0).ceil(),
            ramp_down: (step + 5.0).ceil(),
            tolerance_down: vec![tol; horizon],
            tolerance_up: vec![tol; horizon],
            default_profile: "default".into(),
        });
    }

    let dispatchables: Vec<DispatchableUnit> = (0..rng.gen_range(0..=2))
        .map(|c| {
            let p_max = round3(rng.gen_range(5.0..40.0));
            DispatchableUnit {
                id: format!("hydro{}", c + 1),
                bus: pick_bus(&mut rng),
                p_min: round3(p_max * rng.gen_range(0.0..0.3)),
                p_max,
                variable_cost: round3(rng.gen_range(10.0..60.0)),
                startup_cost: round3(rng.gen_range(0.0..300.0)),
                shutdown_cost: round3(rng.gen_range(0.0..100.0)),
                initial_on: rng.gen_bool(0.5),
            }
        })
        .collect();
    let nondispatchables: Vec<NonDispatchableUnit> = (0..rng.gen_range(0..=2))
        .map(|r| NonDispatchableUnit {
            id: format!("res{}", r + 1),
            bus: pick_bus(&mut rng),
            p_min: vec![0.0; horizon],
            available: (0..horizon).map(|_| round3(rng.gen_range(0.0..30.0))).collect(),
        })
        .collect();
    let stus: Vec<StorageThermalUnit> = (0..rng.gen_range(0..=1))
        .map(|th| {
            let cap = round3(rng.gen_range(10.0..80.0));
            StorageThermalUnit {
                id: format!("stu{}", th + 1),
                bus: pick_bus(&mut rng),
                p_max: round3(rng.gen_range(5.0..25.0)),
                energy_capacity: cap,
                charge_limit: round3(rng.gen_range(5.0..30.0)),
                efficiency: round3(rng.gen_range(0.7..1.0)),
                initial_energy: round3(cap * rng.gen_range(0.0..1.0)),
                thermal_input: (0..horizon).map(|_| round3(rng.gen_range(0.0..20.0))).collect(),
            }
        })
        .collect();

    let capacity: f64 = dispatchables.iter().map(|c| c.p_max).sum::<f64>()
        + nondispatchables.len() as f64 * 30.0
        + stus.iter().map(|s| s.p_max).sum::<f64>();
    let limit = ((peak_load + capacity) * 2.0 + 10.0).ceil();

    let mut lines: Vec<Line> = (1..nbus)
        .map(|i| Line {
            id: format!("l{i}-{}", i + 1),
            from_bus: BusId(i),
            to_bus: BusId(i + 1),
            susceptance: round3(rng.gen_range(5.0..50.0)),
            flow_limit: limit,
        })
        .collect();
    if nbus >= 3 && rng.gen_bool(0.5) {
        lines.push(Line {
            id: format!("l{nbus}-1"),
            from_bus: BusId(nbus),
            to_bus: BusId(1),
            susceptance: round3(rng.gen_range(5.0..50.0)),
            flow_limit: limit,
        });
    }

    let dam_prices: Vec<f64> = (0..horizon).map(|_| round3(rng.gen_range(10.0..90.0))).collect();
    let mut taus: Vec<usize> = (1..=horizon).collect();
    taus.shuffle(&mut rng);
    let mut taus: Vec<usize> = taus.into_iter().take(rng.gen_range(0..=2)).collect();
    taus.sort_unstable();
    let idm_sessions = taus
        .into_iter()
        .map(|tau| {
            let start = tau - 1;
            let prices = dam_prices[start..]
                .iter()
                .map(|p| round3(p * rng.gen_range(0.8..1.2)))
                .collect();
            let mut forecast_updates = BTreeMap::new();
            for r in &nondispatchables {
                if rng.gen_bool(0.5) {
                    let update = r.available[start..]
                        .iter()
                        .map(|a| round3(a * rng.gen_range(0.6..1.1)))
                        .collect();
                    forecast_updates.insert(r.id.clone(), update);
                }
            }
            IdmSession { tau, prices, forecast_updates }
        })
        .collect();

    Scenario {
        name: format!("random-{seed}"),
        description: "Randomly generated test scenario.".into(),
        network: Network {
            buses,
            lines,
            pcc_buses: vec![BusId(1)],
            slack_bus: BusId(1),
        },
        dispatchables,
        nondispatchables,
        stus,
        demands,
        market: MarketStructure {
            horizon,
            dt_hours: 1.0,
            dam_prices,
            idm_sessions,
        },
        pcc_limits: vec![PccLimit { bus: BusId(1), p_max_trade: limit }],
    }
}
