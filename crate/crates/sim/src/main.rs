use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use riskplan_sim::field::{export_field, FieldKind};
use riskplan_sim::runner::{read_dataset, run, write_outputs};
use riskplan_sim::scenario::BUNDLED;
use riskplan_sim::verify::{run_suite, MONTE_CARLO_SAMPLES};
use riskplan_sim::{Scenario, SimError};

#[derive(Parser)]
#[command(name = "riskplan", version, about = "Risk-aware planning episodes over unknown hazard fields")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an episode and write its trace.
    Run {
        /// Bundled scenario id or path to a scenario file.
        #[arg(long)]
        scenario: String,
        #[arg(long)]
        seed: Option<u64>,
        /// Use batch budgets instead of wall-clock budgets.
        #[arg(long)]
        deterministic: bool,
        /// Output directory (default: the scenario's, else out/<id>).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a grid of a field over the workspace as CSV.
    ExportField {
        #[arg(long)]
        scenario: String,
        /// truth, posterior-mean, posterior-cvar or cost.
        #[arg(long)]
        what: String,
        #[arg(long, default_value_t = 0.25)]
        resolution: f64,
        /// Run directory whose dataset conditions the posterior fields.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Directory for <what>.csv (default: standard output).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check closed forms and solvers against reference computations.
    Verify {
        #[arg(long, default_value = "fig2")]
        scenario: String,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// List the bundled scenarios.
    ListScenarios,
}

fn execute(cli: Cli) -> Result<(), SimError> {
    match cli.command {
        Command::Run { scenario, seed, deterministic, out } => {
            let mut s = Scenario::load(&scenario)?;
            if let Some(seed) = seed {
                s.seed = seed;
            }
            s.deterministic |= deterministic;
            let dir = out.or_else(|| s.output_dir.clone()).unwrap_or_else(|| PathBuf::from("out").join(&s.id));
            let trace = run(&s)?;
            let summary = write_outputs(&dir, &s, &trace)?;
            println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
            if !trace.reached_goal() {
                return Err(SimError::Planner(format!("{:?}", trace.outcome)));
            }
            Ok(())
        }
        Command::ExportField { scenario, what, resolution, trace, out } => {
            let kind: FieldKind = what.parse()?;
            let s = Scenario::load(&scenario)?;
            let dataset = match trace {
                Some(dir) => Some(read_dataset(&dir, s.world.sigma_n2)?),
                None => None,
            };
            let csv = export_field(&s, kind, resolution, dataset)?.to_csv();
            match out {
                Some(dir) => {
                    std::fs::create_dir_all(&dir).map_err(|e| SimError::Io { path: dir.display().to_string(), source: e })?;
                    let path = dir.join(format!("{}.csv", kind.name()));
                    std::fs::write(&path, csv).map_err(|e| SimError::Io { path: path.display().to_string(), source: e })?;
                }
                None => print!("{csv}"),
            }
            Ok(())
        }
        Command::Verify { scenario, seed } => {
            let mut s = Scenario::load(&scenario)?;
            if let Some(seed) = seed {
                s.seed = seed;
            }
            let checks = run_suite(&s, MONTE_CARLO_SAMPLES)?;
            for c in &checks {
                println!("{c}");
            }
            match checks.iter().filter(|c| !c.passed()).count() {
                0 => Ok(()),
                n => Err(SimError::Planner(format!("{n} verification check(s) failed"))),
            }
        }
        Command::ListScenarios => {
            for s in BUNDLED.iter().map(|(_, t)| Scenario::from_toml(t)) {
                let s = s?;
                println!("{:<10} {}", s.id, s.description);
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
