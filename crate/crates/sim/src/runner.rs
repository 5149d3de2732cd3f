//! Episode execution and trace files.
//!
//! A run directory holds `trace.jsonl` (one step per line), `plans.jsonl`,
//! `dataset.csv` (the final samples), `summary.json` and the resolved
//! `scenario.toml`. Wall-clock measurements go to `timings.json` so that every
//! other file is byte-identical across deterministic replays.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use riskplan::gp::Dataset;
use riskplan::trace::Outcome;
use riskplan::{graph, smooth, EpisodeTrace, State, World};

use crate::error::SimError;
use crate::scenario::{PlannerConfig, Scenario};

pub const TRACE_FILE: &str = "trace.jsonl";
pub const PLANS_FILE: &str = "plans.jsonl";
pub const DATASET_FILE: &str = "dataset.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const TIMINGS_FILE: &str = "timings.json";
pub const SCENARIO_FILE: &str = "scenario.toml";

/// Runs the scenario's episode with its seed.
pub fn run(scenario: &Scenario) -> Result<EpisodeTrace, SimError> {
    scenario.validate()?;
    let world = scenario.build_world()?;
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let trace = match &scenario.planner {
        PlannerConfig::Graph(g) => graph::run_episode(
            &world,
            scenario.start_state(),
            scenario.goal,
            &scenario.constraint,
            &scenario.effective_graph_config(g),
            &scenario.kernel,
            &mut rng,
        )?,
        PlannerConfig::Smooth(s) => smooth::run_episode_igp(
            &world,
            scenario.start_state(),
            scenario.goal.center(),
            &scenario.constraint,
            s,
            &scenario.kernel,
            &mut rng,
        )?,
    };
    Ok(trace)
}

/// Headline numbers of an episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub scenario: String,
    pub seed: u64,
    pub deterministic: bool,
    pub outcome: Outcome,
    pub steps: usize,
    pub plans: usize,
    pub triggers: usize,
    pub path_length: f64,
    pub max_hazard: f64,
    /// Fraction of steps whose ground-truth hazard exceeds the threshold.
    pub exceedance_fraction: f64,
    /// Traversed segments that intersect an obstacle.
    pub collisions: usize,
    pub samples: usize,
}

pub fn collisions(world: &World, states: &[State]) -> usize {
    let bad_start = states.first().is_some_and(|x| !world.is_free(x)) as usize;
    bad_start + states.windows(2).filter(|w| !world.collision_free(&w[0], &w[1])).count()
}

pub fn summarize(scenario: &Scenario, world: &World, trace: &EpisodeTrace) -> Summary {
    Summary {
        scenario: scenario.id.clone(),
        seed: scenario.seed,
        deterministic: scenario.deterministic,
        outcome: trace.outcome.clone(),
        steps: trace.steps.len(),
        plans: trace.plans.len(),
        triggers: trace.trigger_count(),
        path_length: trace.path_length(),
        max_hazard: trace.steps.iter().map(|s| s.hazard).fold(f64::NEG_INFINITY, f64::max),
        exceedance_fraction: trace.exceedance_fraction(scenario.constraint.alpha),
        collisions: collisions(world, &trace.states()),
        samples: trace.dataset.len(),
    }
}

fn write(path: PathBuf, text: &str) -> Result<(), SimError> {
    fs::write(&path, text).map_err(|e| SimError::io(&path, e))
}

fn json_lines<T: Serialize>(items: &[T]) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item).expect("trace records serialize"));
        out.push('\n');
    }
    out
}

pub fn dataset_csv(data: &Dataset) -> String {
    let mut out = String::from("x,y,z\n");
    for (p, z) in data.points.iter().zip(&data.values) {
        writeln!(out, "{},{},{}", p[0], p[1], z).expect("writing to a string");
    }
    out
}

pub fn parse_dataset_csv(text: &str, noise_variance: f64) -> Result<Dataset, SimError> {
    let mut data = Dataset::empty(noise_variance);
    for (n, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Result<Vec<f64>, _> = line.split(',').map(|v| v.trim().parse::<f64>()).collect();
        match cols.as_deref() {
            Ok([x, y, z]) => {
                data.points.push(vec![*x, *y]);
                data.values.push(*z);
            }
            _ => return Err(SimError::Config(format!("dataset line {}: expected x,y,z", n + 1))),
        }
    }
    Ok(data)
}

pub fn read_dataset(dir: &Path, noise_variance: f64) -> Result<Dataset, SimError> {
    let path = dir.join(DATASET_FILE);
    let text = fs::read_to_string(&path).map_err(|e| SimError::io(&path, e))?;
    parse_dataset_csv(&text, noise_variance)
}

/// Writes all run files into `dir`, creating it if needed.
pub fn write_outputs(dir: &Path, scenario: &Scenario, trace: &EpisodeTrace) -> Result<Summary, SimError> {
    fs::create_dir_all(dir).map_err(|e| SimError::io(dir, e))?;
    let world = scenario.build_world()?;
    let summary = summarize(scenario, &world, trace);
    write(dir.join(TRACE_FILE), &json_lines(&trace.steps))?;
    write(dir.join(PLANS_FILE), &json_lines(&trace.plans))?;
    write(dir.join(DATASET_FILE), &dataset_csv(&trace.dataset))?;
    write(dir.join(SCENARIO_FILE), &scenario.to_toml()?)?;
    write(dir.join(SUMMARY_FILE), &pretty(&summary))?;
    write(dir.join(TIMINGS_FILE), &pretty(&trace.timings))?;
    Ok(summary)
}

fn pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("summary serializes");
    s.push('\n');
    s
}
