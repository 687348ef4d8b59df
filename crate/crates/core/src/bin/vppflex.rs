use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use vppflex::analysis::{cutoff_table, simultaneous_cost_sweep, tolerance_sweep, Cutoff, SweepReport};
use vppflex::formulation::AdjustmentCost;
use vppflex::market::{run_market_day, settlement_report, SolveConfig};
use vppflex::model::{validate_scenario, Scenario};
use vppflex::random::random_scenario;
use vppflex::report::{emit_cost_sweep, emit_day_reports, emit_tolerance_sweep, eur};
use vppflex::scenario_file::{bundled_twelve_node, parse_scenario, ScenarioFileError};
use vppflex::Error;

const NODE_LIMIT_VAR: &str = "VPPFLEX_NODE_LIMIT";

/// Day-ahead and intraday market model for a renewable virtual power plant
/// with flexible demand.
///
/// Without --scenario the bundled 12-node case study is used, or a random
/// scenario when --seed is given.
#[derive(Parser)]
#[command(name = "vppflex", version)]
struct Cli {
    /// Seed for the random scenario used when --scenario is absent.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Input {
    /// Scenario file (JSON).
    #[arg(long)]
    scenario: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum AdjustmentArg {
    Signed,
    Absolute,
}

#[derive(Subcommand)]
enum Command {
    /// Check a scenario and list every violated rule.
    Validate {
        #[command(flatten)]
        input: Input,
    },
    /// Run the day-ahead market and every intraday session.
    Run {
        #[command(flatten)]
        input: Input,
        /// Directory for the report files.
        #[arg(long)]
        out: Option<PathBuf>,
        /// How intraday changes of dispatchable output are charged.
        #[arg(long, value_enum, default_value = "signed")]
        adjustment_cost: AdjustmentArg,
    },
    /// Day-ahead profit and profile choices as all non-default profile
    /// payments rise together, plus the cutoff of each profile of one demand.
    SweepCost {
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        demand: String,
        /// start:end:step in €.
        #[arg(long, default_value = "0:1000:50")]
        grid: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Full market day profit for each symmetric demand tolerance.
    SweepTolerance {
        #[command(flatten)]
        input: Input,
        /// Comma-separated tolerance levels in percent.
        #[arg(long, default_value = "0,10,20,30,40,50", value_delimiter = ',')]
        levels: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum Failure {
    Day(String),
    Input(String),
    Limit(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Day(_) => 1,
            Failure::Input(_) => 2,
            Failure::Limit(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Day(m) | Failure::Input(m) | Failure::Limit(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Infeasible { .. } => Failure::Day(e.to_string()),
            Error::Solver { .. } => Failure::Limit(e.to_string()),
            _ => Failure::Input(e.to_string()),
        }
    }
}

impl From<ScenarioFileError> for Failure {
    fn from(e: ScenarioFileError) -> Self {
        match e {
            ScenarioFileError::Invalid(v) => Failure::Input(
                v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("\n"),
            ),
            e => Failure::Input(e.to_string()),
        }
    }
}

fn io_failure(dir: &Path, e: std::io::Error) -> Failure {
    Failure::Input(format!("cannot write reports to {}: {e}", dir.display()))
}

fn load(input: &Input, seed: Option<u64>) -> Result<Scenario, Failure> {
    match (&input.scenario, seed) {
        (Some(path), _) => Ok(parse_scenario(path)?),
        (None, Some(seed)) => Ok(random_scenario(seed)),
        (None, None) => Ok(bundled_twelve_node()),
    }
}

fn config(adjustment_cost: AdjustmentCost) -> Result<SolveConfig, Failure> {
    let mut config = SolveConfig {
        adjustment_cost,
        ..SolveConfig::default()
    };
    if let Ok(v) = std::env::var(NODE_LIMIT_VAR) {
        config.node_limit = v
            .trim()
            .parse()
            .map_err(|_| Failure::Input(format!("{NODE_LIMIT_VAR} must be a positive integer, got {v:?}")))?;
    }
    Ok(config)
}

fn timestamp() -> Option<u64> {
    std::env::var("SOURCE_DATE_EPOCH").ok()?.trim().parse().ok()
}

fn parse_grid(text: &str) -> Result<Vec<f64>, Failure> {
    let bad = || Failure::Input(format!("--grid expects start:end:step with step > 0, got {text:?}"));
    let parts: Vec<f64> = text
        .split(':')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| bad())?;
    let [start, end, step] = parts[..] else {
        return Err(bad());
    };
    if step.is_nan() || step <= 0.0 || end < start {
        return Err(bad());
    }
    let n = ((end - start) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| start + step * i as f64).collect())
}

fn print_sweep(report: &SweepReport) {
    println!("{} profit_eur uplift_percent profiles", report.parameter);
    for r in &report.rows {
        match &r.failure {
            None => println!(
                "{} {} {} {}",
                eur(r.value),
                r.profit.map(eur).unwrap_or_default(),
                r.uplift.map(|u| eur(100.0 * u)).unwrap_or_else(|| "-".into()),
                r.chosen.join(",")
            ),
            Some(e) => println!("{} failed: {e}", eur(r.value)),
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Validate { input } => {
            let s = match &input.scenario {
                Some(path) => match parse_scenario(path) {
                    Err(ScenarioFileError::Invalid(v)) => {
                        for x in &v {
                            println!("{x}");
                        }
                        return Err(Failure::Input(format!("{} violations", v.len())));
                    }
                    other => other?,
                },
                None => load(&input, cli.seed)?,
            };
            let v = validate_scenario(&s);
            for x in &v {
                println!("{x}");
            }
            if !v.is_empty() {
                return Err(Failure::Input(format!("{} violations", v.len())));
            }
            println!("{}: valid", s.name);
            Ok(())
        }
        Command::Run { input, out, adjustment_cost } => {
            let s = load(&input, cli.seed)?;
            let adjustment_cost = match adjustment_cost {
                AdjustmentArg::Signed => AdjustmentCost::Signed,
                AdjustmentArg::Absolute => AdjustmentCost::Absolute,
            };
            let state = run_market_day(&s, &config(adjustment_cost)?)?;
            let rep = settlement_report(&state);
            for r in &rep.rows {
                println!("{} profit {}", r.stage, eur(r.profit));
            }
            println!("total profit {}", eur(rep.final_profit));
            match rep.uplift_percent() {
                Some(u) => println!("uplift {}%", eur(u)),
                None => println!("uplift undefined (day-ahead profit is 0)"),
            }
            if let Some(dir) = out {
                emit_day_reports(&state, &dir, timestamp()).map_err(|e| io_failure(&dir, e))?;
            }
            Ok(())
        }
        Command::SweepCost { input, demand, grid, out } => {
            let s = load(&input, cli.seed)?;
            let grid = parse_grid(&grid)?;
            let config = config(AdjustmentCost::Signed)?;
            let cutoffs = cutoff_table(&s, Some(&demand), &config)?;
            let mut report = simultaneous_cost_sweep(&s, &grid, &config)?;
            report.timestamp = timestamp();
            print_sweep(&report);
            for c in &cutoffs {
                match c.cutoff {
                    Cutoff::Eur(v) => println!("cutoff {} {} {}", c.demand, c.profile, eur(v)),
                    Cutoff::NotProfitable => println!("cutoff {} {} not profitable", c.demand, c.profile),
                    Cutoff::Unbounded => println!("cutoff {} {} unbounded", c.demand, c.profile),
                }
            }
            if let Some(dir) = out {
                emit_cost_sweep(&report, &cutoffs, &dir).map_err(|e| io_failure(&dir, e))?;
            }
            sweep_outcome(&report)
        }
        Command::SweepTolerance { input, levels, out } => {
            let s = load(&input, cli.seed)?;
            let mut report = tolerance_sweep(&s, &levels, &config(AdjustmentCost::Signed)?)?;
            report.timestamp = timestamp();
            print_sweep(&report);
            if let Some(dir) = out {
                emit_tolerance_sweep(&report, &dir).map_err(|e| io_failure(&dir, e))?;
            }
            sweep_outcome(&report)
        }
    }
}

fn sweep_outcome(report: &SweepReport) -> Result<(), Failure> {
    let failed = report.rows.iter().filter(|r| r.failure.is_some()).count();
    if failed == 0 {
        Ok(())
    } else {
        Err(Failure::Day(format!("{failed} of {} sweep points failed", report.rows.len())))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
