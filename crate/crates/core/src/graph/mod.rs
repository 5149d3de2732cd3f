//! Risk-aware sampling-based planning with event-triggered replanning.
//!
//! Trajectories are scored by the line integral of the risk cost field,
//! `J = ∫ f ds`, which is never below arc length. That makes Euclidean
//! distance an admissible heuristic for the batch-informed search in [`bit`].

mod bit;

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::constraint::RiskConstraint;
use crate::error::{Error, Result};
use crate::gp::{GpModel, Kernel};
use crate::trace::{to_array, EpisodeTrace, Outcome, PlanRecord, StepRecord, Timings};
use crate::trajectory::{GoalRegion, Trajectory};
use crate::world::{State, World};

pub use bit::PlanResult;

/// Planning budget: wall-clock seconds, or a fixed number of sample batches
/// for reproducible runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Budget {
    WallClock { seconds: f64 },
    Batches { count: usize },
}

/// Replanning trigger settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TriggerConfig {
    /// Extreme-tail level the planning-time belief is evaluated at; below β.
    #[serde(default = "default_beta_prime")]
    pub beta_prime: f64,
    /// Check every `stride`-th waypoint ahead of the agent.
    #[serde(default = "default_stride")]
    pub stride: usize,
}

fn default_beta_prime() -> f64 {
    0.01
}

fn default_stride() -> usize {
    1
}

impl Default for TriggerConfig {
    fn default() -> Self {
        Self { beta_prime: default_beta_prime(), stride: default_stride() }
    }
}

impl TriggerConfig {
    pub fn validate(&self, constraint: &RiskConstraint) -> Result<()> {
        if !(self.beta_prime > 0.0 && self.beta_prime < constraint.metric.beta) {
            return Err(Error::InvalidInput(format!(
                "trigger level {} must lie in (0, {})",
                self.beta_prime, constraint.metric.beta
            )));
        }
        if self.stride == 0 {
            return Err(Error::InvalidInput("trigger stride must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphPlannerConfig {
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    /// Tuning constant on the random-geometric-graph connection radius.
    #[serde(default = "default_rgg_constant")]
    pub rgg_constant: f64,
    /// Trapezoid step for edge cost integration.
    #[serde(default = "default_quadrature_step")]
    pub quadrature_step: f64,
    pub budget: Budget,
    /// Spacing of the waypoints the agent moves along.
    #[serde(default = "default_step_length")]
    pub step_length: f64,
    #[serde(default)]
    pub trigger: TriggerConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<usize>,
    /// How many times a failed plan is retried with a doubled budget.
    #[serde(default = "default_retries")]
    pub retries: usize,
}

fn default_batch_size() -> usize {
    100
}

fn default_rgg_constant() -> f64 {
    1.5
}

fn default_quadrature_step() -> f64 {
    0.1
}

pub(crate) fn default_step_length() -> f64 {
    0.25
}

fn default_retries() -> usize {
    3
}

impl Default for GraphPlannerConfig {
    fn default() -> Self {
        Self {
            batch_size: default_batch_size(),
            rgg_constant: default_rgg_constant(),
            quadrature_step: default_quadrature_step(),
            budget: Budget::Batches { count: 4 },
            step_length: default_step_length(),
            trigger: TriggerConfig::default(),
            max_steps: None,
            retries: default_retries(),
        }
    }
}

/// Line integral of the risk cost along `a → b` by the composite trapezoid
/// rule with at most `step` between nodes.
pub fn edge_cost(constraint: &RiskConstraint, model: &GpModel, a: &State, b: &State, step: f64) -> Result<f64> {
    let len = (b - a).norm();
    if len == 0.0 {
        return Ok(0.0);
    }
    let n = (len / step).ceil().max(1.0) as usize;
    let ds = len / n as f64;
    let mut prev = constraint.cost(model, a.as_slice())?.value;
    let mut total = 0.0;
    for k in 1..=n {
        let x = a + (b - a) * (k as f64 / n as f64);
        let f = constraint.cost(model, x.as_slice())?.value;
        total += 0.5 * (prev + f) * ds;
        prev = f;
    }
    // guard the f ≥ 1 lower bound against summation rounding
    Ok(total.max(len))
}

/// Admissible cost-to-go estimate: distance to the goal region.
pub fn heuristic(x: &State, goal: &GoalRegion) -> f64 {
    goal.distance(x)
}

/// A single planning request.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanQuery {
    pub start: State,
    pub goal: GoalRegion,
}

/// Searches for the cheapest trajectory from `query.start` into the goal
/// region within the configured budget.
pub fn plan<R: Rng + ?Sized>(
    query: &PlanQuery,
    world: &World,
    model: &GpModel,
    constraint: &RiskConstraint,
    cfg: &GraphPlannerConfig,
    rng: &mut R,
) -> Result<PlanResult> {
    if !world.is_free(&query.start) {
        return Err(Error::InvalidInput(format!("start {:?} is not in free space", query.start)));
    }
    if query.goal.contains(&query.start) {
        return Ok(PlanResult {
            trajectory: Trajectory::stationary(query.start),
            cost: 0.0,
            batches: 0,
            edges_evaluated: 0,
            incumbent_history: vec![0.0],
        });
    }
    bit::Search::new(world, model, constraint, cfg, query.start, query.goal, rng).run()
}

/// Event trigger: some checked waypoint from index `ahead` on now looks
/// riskier at level β than it did at plan time at the extreme level β′.
pub fn check_trigger(
    trajectory: &Trajectory,
    ahead: usize,
    model_at_plan: &GpModel,
    model_now: &GpModel,
    constraint: &RiskConstraint,
    cfg: &TriggerConfig,
) -> Result<bool> {
    let extreme = constraint.metric.with_level(cfg.beta_prime)?;
    for x in trajectory.waypoints().iter().skip(ahead).step_by(cfg.stride.max(1)) {
        let now = constraint.metric.apply(&model_now.posterior(x.as_slice())?);
        let then = extreme.apply(&model_at_plan.posterior(x.as_slice())?);
        if now > then {
            return Ok(true);
        }
    }
    Ok(false)
}

pub(crate) fn new_model(world: &World, kernel: &Kernel) -> Result<GpModel> {
    GpModel::new(kernel.clone(), world.sensor_noise())?.with_domain(world.bounds().domain())
}

pub(crate) fn default_max_steps(world: &World, step_length: f64) -> usize {
    (10.0 * world.bounds().diameter() / step_length).ceil() as usize
}

/// Runs the online plan / move / observe / trigger loop until the goal is
/// reached or the step limit is hit.
pub fn run_episode<R: Rng + ?Sized>(
    world: &World,
    start: State,
    goal: GoalRegion,
    constraint: &RiskConstraint,
    cfg: &GraphPlannerConfig,
    kernel: &Kernel,
    rng: &mut R,
) -> Result<EpisodeTrace> {
    constraint.validate()?;
    cfg.trigger.validate(constraint)?;
    if !world.is_free(&start) {
        return Err(Error::InvalidInput(format!("start {start:?} is not in free space")));
    }
    let episode_started = Instant::now();
    let max_steps = cfg.max_steps.unwrap_or_else(|| default_max_steps(world, cfg.step_length));
    let mut planner_rng = ChaCha8Rng::seed_from_u64(rng.random());

    let mut model = new_model(world, kernel)?;
    let mut x = start;
    let z = world.observe(&x, rng);
    model.add_observation(x.as_slice(), z)?;

    let mut steps = vec![StepRecord {
        step: 0,
        state: to_array(&x),
        heading: None,
        observation: z,
        hazard: world.hazard(&x),
        plan_id: 0,
        trigger: false,
        optimizer: None,
    }];
    let mut plans = Vec::new();
    let mut timings = Timings::default();
    let mut outcome = Outcome::GoalReached;

    while !goal.contains(&x) {
        if steps.len() > max_steps {
            outcome = Outcome::Timeout;
            break;
        }
        let plan_started = Instant::now();
        let query = PlanQuery { start: x, goal };
        let mut attempt_cfg = cfg.clone();
        let mut result = plan(&query, world, &model, constraint, &attempt_cfg, &mut planner_rng);
        for _ in 0..cfg.retries {
            if !matches!(result, Err(Error::NoSolution(_))) {
                break;
            }
            attempt_cfg.budget = match attempt_cfg.budget {
                Budget::WallClock { seconds } => Budget::WallClock { seconds: 2.0 * seconds },
                Budget::Batches { count } => Budget::Batches { count: 2 * count.max(1) },
            };
            result = plan(&query, world, &model, constraint, &attempt_cfg, &mut planner_rng);
        }
        timings.planning_seconds.push(plan_started.elapsed().as_secs_f64());
        let result = match result {
            Ok(r) => r,
            Err(Error::NoSolution(msg)) => {
                outcome = Outcome::PlannerFailure(msg);
                break;
            }
            Err(e) => return Err(e),
        };
        let plan_id = plans.len();
        let path = result.trajectory.respace_step(cfg.step_length);
        plans.push(PlanRecord {
            plan_id,
            step: steps.len() - 1,
            cost: result.cost,
            waypoints: path.waypoints().iter().map(to_array).collect(),
        });
        let model_at_plan = model.clone();

        for idx in 1..path.len() {
            x = path.waypoints()[idx];
            let z = world.observe(&x, rng);
            model.add_observation(x.as_slice(), z)?;
            let reached = goal.contains(&x);
            let trigger = !reached
                && check_trigger(&path, idx + 1, &model_at_plan, &model, constraint, &cfg.trigger)?;
            steps.push(StepRecord {
                step: steps.len(),
                state: to_array(&x),
                heading: None,
                observation: z,
                hazard: world.hazard(&x),
                plan_id,
                trigger,
                optimizer: None,
            });
            if reached || trigger || steps.len() > max_steps {
                break;
            }
        }
    }
    timings.total_seconds = episode_started.elapsed().as_secs_f64();
    Ok(EpisodeTrace { outcome, steps, plans, dataset: model.dataset().clone(), timings })
}
