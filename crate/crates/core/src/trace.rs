//! Episode traces produced by both planners.

use serde::{Deserialize, Serialize};

use crate::gp::Dataset;
use crate::world::State;

/// Per-step optimizer statistics (trajectory-optimization planner only).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerRecord {
    pub iterations: usize,
    pub initial_cost: f64,
    pub final_cost: f64,
    pub damping: f64,
    pub termination: String,
    /// Every accepted step did not increase the total cost.
    pub monotone: bool,
    /// Iterations of a cold solve of the same problem, when measured.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cold_iterations: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub state: [f64; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heading: Option<f64>,
    pub observation: f64,
    /// Ground-truth hazard at the state.
    pub hazard: f64,
    pub plan_id: usize,
    pub trigger: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimizer: Option<OptimizerRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanRecord {
    pub plan_id: usize,
    /// Step index at which the plan was computed.
    pub step: usize,
    pub cost: f64,
    pub waypoints: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", content = "reason", rename_all = "snake_case")]
pub enum Outcome {
    GoalReached,
    Timeout,
    PlannerFailure(String),
}

/// Wall-clock measurements. Kept apart from the replayable part of a trace.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub total_seconds: f64,
    pub planning_seconds: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeTrace {
    pub outcome: Outcome,
    pub steps: Vec<StepRecord>,
    pub plans: Vec<PlanRecord>,
    pub dataset: Dataset,
    pub timings: Timings,
}

impl EpisodeTrace {
    pub fn reached_goal(&self) -> bool {
        self.outcome == Outcome::GoalReached
    }

    pub fn trigger_count(&self) -> usize {
        self.steps.iter().filter(|s| s.trigger).count()
    }

    pub fn states(&self) -> Vec<State> {
        self.steps.iter().map(|s| State::new(s.state[0], s.state[1])).collect()
    }

    pub fn path_length(&self) -> f64 {
        self.states().windows(2).map(|w| (w[1] - w[0]).norm()).sum()
    }

    /// Fraction of recorded steps whose ground-truth hazard exceeds `alpha`.
    pub fn exceedance_fraction(&self, alpha: f64) -> f64 {
        if self.steps.is_empty() {
            return 0.0;
        }
        self.steps.iter().filter(|s| s.hazard > alpha).count() as f64 / self.steps.len() as f64
    }
}

pub(crate) fn to_array(x: &State) -> [f64; 2] {
    [x[0], x[1]]
}
