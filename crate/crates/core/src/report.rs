//! CSV and JSON report files for market days and sweeps.
//!
//! Money is written with 2 decimals, power and energy with 3, always with
//! '.' as decimal separator. Every file is written to a temporary name in
//! the target directory and then renamed into place.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde_json::json;

use crate::analysis::{Cutoff, CutoffRow, SweepReport};
use crate::market::{settlement_report, MarketDayState};

pub const SETTLEMENT_HEADER: [&str; 5] = [
    "stage",
    "revenue_eur",
    "generation_cost_eur",
    "profile_payment_eur",
    "profit_eur",
];
pub const SCHEDULES_HEADER: [&str; 4] = ["entity", "kind", "period", "mw"];
pub const TRADED_POWER_HEADER: [&str; 3] = ["period", "dam_mw", "final_mw"];
pub const DEMAND_OUTPUT_HEADER: [&str; 4] = ["demand", "period", "scheduled_mw", "final_mw"];
pub const CUTOFFS_HEADER: [&str; 6] = [
    "demand",
    "profile",
    "status",
    "cutoff_eur",
    "shifted_mwh",
    "eur_per_mwh",
];

fn fixed(x: f64, decimals: usize) -> String {
    let s = format!("{x:.decimals$}");
    // Avoid "-0.00" for values that round to zero.
    if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
        s[1..].to_string()
    } else {
        s
    }
}

pub fn eur(x: f64) -> String {
    fixed(x, 2)
}

pub fn mw(x: f64) -> String {
    fixed(x, 3)
}

fn opt(x: Option<f64>, f: fn(f64) -> String) -> String {
    x.map(f).unwrap_or_default()
}

/// Writes `bytes` to `path` through a temporary sibling and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "path has no file name"))?;
    let tmp = path.with_file_name(format!(".{}.tmp", name.to_string_lossy()));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })
}

struct Bundle {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Bundle {
    fn new(dir: &Path) -> io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Bundle { dir: dir.to_path_buf(), written: Vec::new() })
    }

    fn csv<I, R>(&mut self, name: &str, header: &[&str], rows: I) -> io::Result<()>
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator<Item = String>,
    {
        let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
        w.write_record(header)?;
        for r in rows {
            w.write_record(r.into_iter().collect::<Vec<_>>())?;
        }
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        self.file(name, &bytes)
    }

    fn json(&mut self, name: &str, value: &serde_json::Value) -> io::Result<()> {
        let mut text = serde_json::to_string_pretty(value).expect("serializable");
        text.push('\n');
        self.file(name, text.as_bytes())
    }

    fn file(&mut self, name: &str, bytes: &[u8]) -> io::Result<()> {
        let path = self.dir.join(name);
        write_atomic(&path, bytes)?;
        self.written.push(path);
        Ok(())
    }
}

/// Writes `settlement.csv`, `summary.csv`, `schedules.csv`,
/// `traded_power.csv`, `demand_output.csv` and `metadata.json` for a
/// completed day. Returns the written paths in that order.
pub fn emit_day_reports(state: &MarketDayState, dir: &Path, timestamp: Option<u64>) -> io::Result<Vec<PathBuf>> {
    let s = &state.scenario;
    let horizon = s.horizon();
    let settlement = settlement_report(state);
    let mut b = Bundle::new(dir)?;

    let mut rows: Vec<Vec<String>> = settlement
        .rows
        .iter()
        .map(|r| {
            vec![
                r.stage.to_string(),
                eur(r.revenue),
                eur(r.generation_cost),
                eur(r.profile_payment),
                eur(r.profit),
            ]
        })
        .collect();
    let sum = |f: fn(&crate::market::SettlementRow) -> f64| settlement.rows.iter().map(f).sum::<f64>();
    rows.push(vec![
        "TOTAL".into(),
        eur(sum(|r| r.revenue)),
        eur(sum(|r| r.generation_cost)),
        eur(sum(|r| r.profile_payment)),
        eur(settlement.final_profit),
    ]);
    b.csv("settlement.csv", &SETTLEMENT_HEADER, rows)?;

    b.csv(
        "summary.csv",
        &["metric", "value"],
        [
            vec!["dam_profit_eur".to_string(), eur(settlement.dam_profit)],
            vec!["final_profit_eur".to_string(), eur(settlement.final_profit)],
            vec!["uplift_percent".to_string(), opt(settlement.uplift_percent(), eur)],
        ],
    )?;

    let final_schedule = state.final_schedule().unwrap_or_default();
    let mut sched: Vec<Vec<String>> = Vec::new();
    let mut push = |entity: &str, kind: &str, values: &[f64]| {
        for (t, v) in values.iter().enumerate() {
            sched.push(vec![entity.to_string(), kind.to_string(), (t + 1).to_string(), mw(*v)]);
        }
    };
    for (c, u) in s.dispatchables.iter().enumerate() {
        push(&u.id, "dispatchable", &final_schedule.dres_power[c]);
    }
    for (r, u) in s.nondispatchables.iter().enumerate() {
        push(&u.id, "non_dispatchable", &final_schedule.ndres_power[r]);
    }
    for (th, u) in s.stus.iter().enumerate() {
        push(&u.id, "storage_output", &final_schedule.stu_power[th]);
        push(&u.id, "storage_charge", &final_schedule.stu_charge[th]);
    }
    for (d, u) in s.demands.iter().enumerate() {
        push(&u.id, "demand", &final_schedule.demand_power[d]);
    }
    for (l, u) in s.network.lines.iter().enumerate() {
        push(&u.id, "line_flow", &final_schedule.line_flow[l]);
    }
    for (i, bus) in s.network.pcc_buses.iter().enumerate() {
        push(&format!("pcc{bus}"), "grid_exchange", &final_schedule.pcc_trade[i]);
    }
    b.csv("schedules.csv", &SCHEDULES_HEADER, sched)?;

    let dam = state.dam_trade();
    let fin = state.final_trade();
    b.csv(
        "traded_power.csv",
        &TRADED_POWER_HEADER,
        (0..horizon).map(|t| vec![(t + 1).to_string(), mw(dam[t]), mw(fin[t])]),
    )?;

    let scheduled = state
        .settled
        .dam
        .as_ref()
        .map(|d| d.schedule.demand_power.clone())
        .unwrap_or_default();
    let mut demand_rows = Vec::new();
    for (d, dem) in s.demands.iter().enumerate() {
        for t in 0..horizon {
            demand_rows.push(vec![
                dem.id.clone(),
                (t + 1).to_string(),
                mw(scheduled[d][t]),
                mw(final_schedule.demand_power[d][t]),
            ]);
        }
    }
    b.csv("demand_output.csv", &DEMAND_OUTPUT_HEADER, demand_rows)?;

    let chosen: serde_json::Map<String, serde_json::Value> = s
        .demands
        .iter()
        .zip(&state.settled.chosen_profiles)
        .map(|(d, &p)| (d.id.clone(), json!(d.profiles[p].id)))
        .collect();
    b.json(
        "metadata.json",
        &json!({
            "scenario": s.name,
            "timestamp": timestamp,
            "stages": state.stages.iter().map(|r| r.stage.to_string()).collect::<Vec<_>>(),
            "chosen_profiles": chosen,
            "adjustment_cost": format!("{:?}", state.config.adjustment_cost).to_lowercase(),
            "node_limit": state.config.node_limit,
        }),
    )?;
    Ok(b.written)
}

fn sweep_metadata(report: &SweepReport) -> serde_json::Value {
    json!({
        "scenario": report.scenario_id,
        "parameter": report.parameter,
        "timestamp": report.timestamp,
        "points": report.rows.len(),
        "failed_points": report.rows.iter().filter(|r| r.failure.is_some()).count(),
    })
}

fn sweep_rows<'a>(report: &'a SweepReport, lead: fn(f64) -> String) -> impl Iterator<Item = Vec<String>> + 'a {
    report.rows.iter().map(move |r| {
        let mut row = vec![
            lead(r.value),
            opt(r.profit, eur),
            opt(r.dam_profit, eur),
            opt(r.uplift.map(|u| 100.0 * u), eur),
        ];
        for d in 0..report.demands.len() {
            row.push(r.chosen.get(d).cloned().unwrap_or_default());
        }
        row.push(match &r.failure {
            Some(e) => format!("failed: {e}"),
            None => "ok".into(),
        });
        row
    })
}

fn sweep_header(first: &str, report: &SweepReport) -> Vec<String> {
    let mut h: Vec<String> = [first, "profit_eur", "dam_profit_eur", "uplift_percent"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    h.extend(report.demands.iter().map(|d| format!("profile_{d}")));
    h.push("status".into());
    h
}

/// Writes `profit_vs_tolerance.csv` (one row per sweep point) and
/// `metadata.json`.
pub fn emit_tolerance_sweep(report: &SweepReport, dir: &Path) -> io::Result<Vec<PathBuf>> {
    let mut b = Bundle::new(dir)?;
    let header = sweep_header("tolerance_percent", report);
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    b.csv("profit_vs_tolerance.csv", &header, sweep_rows(report, eur))?;
    b.json("metadata.json", &sweep_metadata(report))?;
    Ok(b.written)
}

/// Writes `cost_sweep.csv`, `cutoffs.csv` and `metadata.json`.
pub fn emit_cost_sweep(report: &SweepReport, cutoffs: &[CutoffRow], dir: &Path) -> io::Result<Vec<PathBuf>> {
    let mut b = Bundle::new(dir)?;
    let header = sweep_header("cost_eur", report);
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    b.csv("cost_sweep.csv", &header, sweep_rows(report, eur))?;
    b.csv(
        "cutoffs.csv",
        &CUTOFFS_HEADER,
        cutoffs.iter().map(|c| {
            let status = match c.cutoff {
                Cutoff::Eur(_) => "profitable",
                Cutoff::NotProfitable => "not_profitable",
                Cutoff::Unbounded => "unbounded",
            };
            vec![
                c.demand.clone(),
                c.profile.clone(),
                status.to_string(),
                opt(c.cutoff.value(), eur),
                mw(c.shift.shifted_mwh),
                opt(c.shift.eur_per_mwh, eur),
            ]
        }),
    )?;
    b.json("metadata.json", &sweep_metadata(report))?;
    Ok(b.written)
}
