//! The online optimize / move / observe / freeze loop.

use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{fix_factors, initial_trajectory, optimize, FactorGraphProblem, FactorWeights, Objective, OptimizerSettings};
use crate::constraint::RiskConstraint;
use crate::error::{Error, Result};
use crate::gp::Kernel;
use crate::graph::new_model;
use crate::trace::{to_array, EpisodeTrace, OptimizerRecord, Outcome, PlanRecord, StepRecord, Timings};
use crate::trajectory::GoalRegion;
use crate::world::{State, World};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothPlannerConfig {
    /// Number of trajectory variables, anchors included.
    #[serde(default = "default_support_states")]
    pub support_states: usize,
    #[serde(default)]
    pub weights: FactorWeights,
    /// Carry a heading component (car-like 3-DOF state).
    #[serde(default)]
    pub heading: bool,
    #[serde(default)]
    pub optimizer: OptimizerSettings,
    /// Also solve every problem cold from the initial seed and record its
    /// iteration count next to the warm-started one.
    #[serde(default)]
    pub measure_cold: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<usize>,
}

fn default_support_states() -> usize {
    50
}

impl Default for SmoothPlannerConfig {
    fn default() -> Self {
        Self {
            support_states: default_support_states(),
            weights: FactorWeights::default(),
            heading: false,
            optimizer: OptimizerSettings::default(),
            measure_cold: false,
            max_steps: None,
        }
    }
}

impl SmoothPlannerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.support_states < 2 {
            return Err(Error::InvalidInput(format!(
                "need at least 2 support states, got {}",
                self.support_states
            )));
        }
        self.weights.validate()
    }
}

/// Runs the incremental trajectory-optimization loop: re-solve warm from the
/// previous solution, advance one variable, sample the hazard there, and
/// freeze the traversed variable. The goal is a disc around `goal` whose
/// radius is the initial waypoint spacing.
pub fn run_episode_igp<R: Rng + ?Sized>(
    world: &World,
    start: State,
    goal: State,
    constraint: &RiskConstraint,
    cfg: &SmoothPlannerConfig,
    kernel: &Kernel,
    rng: &mut R,
) -> Result<EpisodeTrace> {
    constraint.validate()?;
    cfg.validate()?;
    let episode_started = Instant::now();

    let mut model = new_model(world, kernel)?;
    let mut x = start;
    let seed = initial_trajectory(start, goal, world, cfg.support_states)?;
    let mut problem = FactorGraphProblem::new(&seed, &cfg.weights, cfg.heading)?;
    let cold_seed = problem.clone();
    let spacing = seed.length() / (seed.len() - 1) as f64;
    let goal_region = GoalRegion::point(goal, spacing);
    let max_steps = cfg.max_steps.unwrap_or(problem.len() - 1);

    let z = world.observe(&x, rng);
    model.add_observation(x.as_slice(), z)?;
    let mut steps = vec![StepRecord {
        step: 0,
        state: to_array(&x),
        heading: problem.headings().map(|h| h[0]),
        observation: z,
        hazard: world.hazard(&x),
        plan_id: 0,
        trigger: false,
        optimizer: None,
    }];
    let mut plans = Vec::new();
    let mut timings = Timings::default();
    let mut outcome = Outcome::GoalReached;
    let mut head = 0;

    while !goal_region.contains(&x) {
        if head + 1 >= problem.len() || steps.len() > max_steps {
            outcome = Outcome::Timeout;
            break;
        }
        let objective = Objective { world, model: &model, constraint, weights: &cfg.weights };
        let solve_started = Instant::now();
        let report = optimize(&mut problem, &objective, &cfg.optimizer)?;
        timings.planning_seconds.push(solve_started.elapsed().as_secs_f64());
        let cold_iterations = if cfg.measure_cold {
            let mut cold = problem.clone();
            cold.reset_free_from(&cold_seed)?;
            Some(optimize(&mut cold, &objective, &cfg.optimizer)?.iterations)
        } else {
            None
        };
        let plan_id = plans.len();
        plans.push(PlanRecord {
            plan_id,
            step: steps.len() - 1,
            cost: report.final_cost,
            waypoints: problem.positions().iter().map(to_array).collect(),
        });

        head += 1;
        x = problem.positions()[head];
        if !world.in_bounds(&x) {
            outcome = Outcome::PlannerFailure(format!("trajectory left the workspace at {x:?}"));
            break;
        }
        let z = world.observe(&x, rng);
        model.add_observation(x.as_slice(), z)?;
        problem = fix_factors(problem, head)?;
        steps.push(StepRecord {
            step: steps.len(),
            state: to_array(&x),
            heading: problem.headings().map(|h| h[head]),
            observation: z,
            hazard: world.hazard(&x),
            plan_id,
            trigger: false,
            optimizer: Some(OptimizerRecord {
                iterations: report.iterations,
                initial_cost: report.initial_cost,
                final_cost: report.final_cost,
                damping: report.damping,
                termination: report.termination.as_str().to_string(),
                monotone: report.is_monotone(),
                cold_iterations,
            }),
        });
    }
    timings.total_seconds = episode_started.elapsed().as_secs_f64();
    Ok(EpisodeTrace { outcome, steps, plans, dataset: model.dataset().clone(), timings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::risk::RiskMetric;
    use crate::world::WorldConfig;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_hazard_free_world_is_near_straight() {
        let world = World::build(WorldConfig::default()).unwrap();
        let c = RiskConstraint::new(RiskMetric::cvar(0.05).unwrap(), 30.0, 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (a, b) = (State::new(1.0, 1.0), State::new(18.0, 12.0));
        let cfg = SmoothPlannerConfig::default();
        let trace = run_episode_igp(&world, a, b, &c, &cfg, &Kernel::default_2d(), &mut rng).unwrap();
        assert!(trace.reached_goal());
        assert!(trace.path_length() <= 1.01 * (b - a).norm());
        assert!(trace.steps.iter().filter_map(|s| s.optimizer.as_ref()).all(|o| o.monotone));
        let heads = trace.steps.iter().filter(|s| s.heading.is_some()).count();
        assert_eq!(heads, 0);
    }

    #[test]
    fn start_at_goal_terminates_immediately() {
        let world = World::build(WorldConfig::default()).unwrap();
        let c = RiskConstraint::new(RiskMetric::cvar(0.05).unwrap(), 30.0, 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = State::new(4.0, 4.0);
        let cfg = SmoothPlannerConfig { heading: true, ..SmoothPlannerConfig::default() };
        let trace = run_episode_igp(&world, a, a, &c, &cfg, &Kernel::default_2d(), &mut rng).unwrap();
        assert!(trace.reached_goal());
        assert_eq!(trace.steps.len(), 1);
    }
}
