//! Risk-aware trajectory optimization over a discretized trajectory.
//!
//! A trajectory of `M` support states is scored by a sum of squared
//! residuals (the negative log of a product of Gaussian factors):
//! second-difference smoothness, an obstacle hinge on the signed distance,
//! and the risk cost excess `f(x) − 1`. Start and goal are hard anchors.
//! [`optimize`] runs Levenberg–Marquardt over the variables that are not
//! frozen; the episode loop in [`run_episode_igp`] warm-starts it from the
//! previous solution and freezes every state the agent has traversed.

mod episode;
mod seed;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::constraint::RiskConstraint;
use crate::error::{Error, Result};
use crate::gp::GpModel;
use crate::trajectory::Trajectory;
use crate::world::{State, World};

pub use episode::{run_episode_igp, SmoothPlannerConfig};
pub use seed::initial_trajectory;

/// Factor weights. The obstacle and risk weights are standard deviations
/// (larger means weaker); `smoothness` multiplies the squared second
/// difference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FactorWeights {
    #[serde(default = "default_sigma")]
    pub sigma_obs: f64,
    #[serde(default = "default_sigma")]
    pub sigma_risk: f64,
    #[serde(default = "default_smoothness")]
    pub smoothness: f64,
    /// Clearance below which the obstacle hinge becomes active.
    #[serde(default = "default_epsilon_obs")]
    pub epsilon_obs: f64,
}

fn default_sigma() -> f64 {
    1.0
}

fn default_smoothness() -> f64 {
    10.0
}

fn default_epsilon_obs() -> f64 {
    0.5
}

impl Default for FactorWeights {
    fn default() -> Self {
        Self {
            sigma_obs: default_sigma(),
            sigma_risk: default_sigma(),
            smoothness: default_smoothness(),
            epsilon_obs: default_epsilon_obs(),
        }
    }
}

impl FactorWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("sigma_obs", self.sigma_obs),
            ("sigma_risk", self.sigma_risk),
            ("smoothness", self.smoothness),
            ("epsilon_obs", self.epsilon_obs),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidInput(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FactorKind {
    /// Hard anchor to a fixed value.
    Prior,
    Smoothness,
    Obstacle,
    Risk,
}

/// A factor over one or more variables with an isotropic weight: its
/// information matrix is `weight · I`.
#[derive(Debug, Clone, PartialEq)]
pub struct Factor {
    pub kind: FactorKind,
    pub variables: Vec<usize>,
    pub weight: f64,
}

/// The trajectory variables plus the factors that score them.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorGraphProblem {
    positions: Vec<State>,
    headings: Option<Vec<f64>>,
    factors: Vec<Factor>,
    frozen: Vec<bool>,
}

impl FactorGraphProblem {
    /// Builds the problem around a seed trajectory. The first and last states
    /// are anchored; with `heading` the variables carry a third, heading
    /// component initialized from the seed's tangent.
    pub fn new(seed: &Trajectory, weights: &FactorWeights, heading: bool) -> Result<Self> {
        weights.validate()?;
        let positions = seed.waypoints().to_vec();
        let m = positions.len();
        let headings = heading.then(|| tangent_headings(&positions));
        let mut factors = vec![
            Factor { kind: FactorKind::Prior, variables: vec![0], weight: f64::INFINITY },
            Factor { kind: FactorKind::Prior, variables: vec![m - 1], weight: f64::INFINITY },
        ];
        for i in 1..m - 1 {
            factors.push(Factor {
                kind: FactorKind::Smoothness,
                variables: vec![i - 1, i, i + 1],
                weight: weights.smoothness,
            });
        }
        for i in 0..m {
            factors.push(Factor {
                kind: FactorKind::Obstacle,
                variables: vec![i],
                weight: weights.sigma_obs.powi(-2),
            });
            factors.push(Factor {
                kind: FactorKind::Risk,
                variables: vec![i],
                weight: weights.sigma_risk.powi(-2),
            });
        }
        let mut frozen = vec![false; m];
        frozen[0] = true;
        frozen[m - 1] = true;
        Ok(Self { positions, headings, factors, frozen })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[State] {
        &self.positions
    }

    pub fn headings(&self) -> Option<&[f64]> {
        self.headings.as_deref()
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn is_frozen(&self, i: usize) -> bool {
        self.frozen[i]
    }

    pub fn trajectory(&self) -> Trajectory {
        Trajectory::new(self.positions.clone()).expect("problem has at least two variables")
    }

    /// Degrees of freedom per variable.
    pub fn dof(&self) -> usize {
        if self.headings.is_some() {
            3
        } else {
            2
        }
    }

    /// Overwrites the unfrozen variables with the values of `other`, which
    /// must have the same shape.
    pub fn reset_free_from(&mut self, other: &FactorGraphProblem) -> Result<()> {
        if other.len() != self.len() || other.dof() != self.dof() {
            return Err(Error::Dimension { expected: self.len() * self.dof(), got: other.len() * other.dof() });
        }
        for i in (0..self.len()).filter(|&i| !self.frozen[i]) {
            self.positions[i] = other.positions[i];
            if let (Some(h), Some(o)) = (self.headings.as_mut(), other.headings.as_ref()) {
                h[i] = o[i];
            }
        }
        Ok(())
    }

    /// Moves variable `i` to `x`. Frozen variables cannot be moved.
    pub fn set_position(&mut self, i: usize, x: State) -> Result<()> {
        if self.frozen[i] {
            return Err(Error::InvalidInput(format!("variable {i} is frozen")));
        }
        self.positions[i] = x;
        Ok(())
    }

    fn free_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| !self.frozen[i]).collect()
    }

    fn variable(&self, i: usize) -> [f64; 3] {
        let h = self.headings.as_ref().map_or(0.0, |h| h[i]);
        [self.positions[i][0], self.positions[i][1], h]
    }

    fn apply_step(&mut self, free: &[usize], delta: &DVector<f64>) {
        let dof = self.dof();
        for (k, &i) in free.iter().enumerate() {
            self.positions[i] += State::new(delta[k * dof], delta[k * dof + 1]);
            if let Some(h) = self.headings.as_mut() {
                h[i] += delta[k * dof + 2];
            }
        }
    }
}

/// Freezes variable `index`: later [`optimize`] calls leave it untouched.
pub fn fix_factors(mut problem: FactorGraphProblem, index: usize) -> Result<FactorGraphProblem> {
    if index >= problem.len() {
        return Err(Error::InvalidInput(format!(
            "variable {index} out of range for {} variables",
            problem.len()
        )));
    }
    problem.frozen[index] = true;
    Ok(problem)
}

fn tangent_headings(positions: &[State]) -> Vec<f64> {
    let m = positions.len();
    let mut out = Vec::with_capacity(m);
    let mut last = 0.0;
    for i in 0..m {
        let d = positions[(i + 1).min(m - 1)] - positions[i.saturating_sub(1)];
        if d.norm() > 1e-12 {
            last = d[1].atan2(d[0]);
        }
        out.push(last);
    }
    // unwrap so that smoothness does not see artificial 2π jumps
    for i in 1..m {
        let mut h = out[i];
        while h - out[i - 1] > std::f64::consts::PI {
            h -= std::f64::consts::TAU;
        }
        while h - out[i - 1] < -std::f64::consts::PI {
            h += std::f64::consts::TAU;
        }
        out[i] = h;
    }
    out
}

/// Obstacle hinge `max(ε_obs − d(x), 0)` on the interpolated signed distance.
pub fn obstacle_residual(world: &World, x: &State, epsilon_obs: f64) -> f64 {
    (epsilon_obs - world.signed_distance(x)).max(0.0)
}

fn obstacle_jacobian(world: &World, x: &State, epsilon_obs: f64) -> State {
    if epsilon_obs - world.signed_distance(x) > 0.0 {
        -world.signed_distance_gradient(x)
    } else {
        State::zeros()
    }
}

/// Risk residual `f(x) − 1`: zero on the satisfied set, growing
/// exponentially with the violation.
pub fn risk_residual(constraint: &RiskConstraint, model: &GpModel, x: &State) -> Result<f64> {
    Ok(constraint.cost(model, x.as_slice())?.value - 1.0)
}

fn risk_jacobian(constraint: &RiskConstraint, model: &GpModel, x: &State, residual: f64) -> Result<State> {
    if residual <= 0.0 {
        return Ok(State::zeros());
    }
    let g = constraint.cost_gradient(model, x.as_slice())?;
    Ok(State::new(g[0], g[1]))
}

/// Everything [`optimize`] needs besides the problem itself.
#[derive(Clone, Copy)]
pub struct Objective<'a> {
    pub world: &'a World,
    pub model: &'a GpModel,
    pub constraint: &'a RiskConstraint,
    pub weights: &'a FactorWeights,
}

impl Objective<'_> {
    /// Half the sum of squared weighted residuals over all factors.
    pub fn cost(&self, problem: &FactorGraphProblem) -> Result<f64> {
        Ok(0.5 * self.residuals(problem)?.norm_squared())
    }

    fn residuals(&self, problem: &FactorGraphProblem) -> Result<DVector<f64>> {
        let mut r = Vec::new();
        self.linearize(problem, &[], &mut r, None)?;
        Ok(DVector::from_vec(r))
    }

    /// Fills the whitened residuals and, when `jac` is given, their Jacobian
    /// with respect to the `free` variables (row-major triplets).
    fn linearize(
        &self,
        problem: &FactorGraphProblem,
        free: &[usize],
        r: &mut Vec<f64>,
        mut jac: Option<&mut Vec<(usize, usize, f64)>>,
    ) -> Result<()> {
        let dof = problem.dof();
        let mut column = vec![None; problem.len()];
        for (k, &i) in free.iter().enumerate() {
            column[i] = Some(k * dof);
        }
        for factor in &problem.factors {
            let w = factor.weight.sqrt();
            match factor.kind {
                FactorKind::Prior => {}
                FactorKind::Smoothness => {
                    let [a, b, c] = [factor.variables[0], factor.variables[1], factor.variables[2]];
                    let (va, vb, vc) = (problem.variable(a), problem.variable(b), problem.variable(c));
                    for d in 0..dof {
                        let row = r.len();
                        r.push(w * (va[d] - 2.0 * vb[d] + vc[d]));
                        if let Some(j) = jac.as_deref_mut() {
                            for (v, coef) in [(a, 1.0), (b, -2.0), (c, 1.0)] {
                                if let Some(col) = column[v] {
                                    j.push((row, col + d, w * coef));
                                }
                            }
                        }
                    }
                }
                FactorKind::Obstacle => {
                    let i = factor.variables[0];
                    let x = problem.positions[i];
                    let row = r.len();
                    r.push(w * obstacle_residual(self.world, &x, self.weights.epsilon_obs));
                    if let (Some(j), Some(col)) = (jac.as_deref_mut(), column[i]) {
                        let g = obstacle_jacobian(self.world, &x, self.weights.epsilon_obs);
                        j.push((row, col, w * g[0]));
                        j.push((row, col + 1, w * g[1]));
                    }
                }
                FactorKind::Risk => {
                    let i = factor.variables[0];
                    let x = problem.positions[i];
                    let row = r.len();
                    let res = risk_residual(self.constraint, self.model, &x)?;
                    r.push(w * res);
                    if let (Some(j), Some(col)) = (jac.as_deref_mut(), column[i]) {
                        let g = risk_jacobian(self.constraint, self.model, &x, res)?;
                        j.push((row, col, w * g[0]));
                        j.push((row, col + 1, w * g[1]));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Solver limits and tolerances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerSettings {
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    /// Converged once the infinity norm of the gradient drops below this.
    #[serde(default = "default_gradient_tolerance")]
    pub gradient_tolerance: f64,
    /// Converged once an accepted step is shorter than this.
    #[serde(default = "default_step_tolerance")]
    pub step_tolerance: f64,
    /// Converged once an accepted step lowers the cost by less than this
    /// fraction.
    #[serde(default = "default_cost_tolerance")]
    pub cost_tolerance: f64,
    #[serde(default = "default_initial_damping")]
    pub initial_damping: f64,
    /// Consecutive rejected steps before giving up.
    #[serde(default = "default_max_rejections")]
    pub max_rejections: usize,
}

fn default_max_iterations() -> usize {
    100
}

fn default_gradient_tolerance() -> f64 {
    1e-6
}

fn default_cost_tolerance() -> f64 {
    1e-6
}

fn default_step_tolerance() -> f64 {
    1e-9
}

fn default_initial_damping() -> f64 {
    1e-4
}

fn default_max_rejections() -> usize {
    10
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self {
            max_iterations: default_max_iterations(),
            gradient_tolerance: default_gradient_tolerance(),
            step_tolerance: default_step_tolerance(),
            cost_tolerance: default_cost_tolerance(),
            initial_damping: default_initial_damping(),
            max_rejections: default_max_rejections(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// Gradient norm below tolerance.
    Converged,
    /// Accepted step below tolerance.
    SmallStep,
    /// Accepted step barely lowered the cost.
    SmallDecrease,
    /// Nothing to optimize: every variable is frozen.
    NoFreeVariables,
    MaxIterations,
    /// Too many consecutive rejected steps; the best iterate is kept.
    Stalled,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::Converged => "converged",
            Termination::SmallStep => "small_step",
            Termination::SmallDecrease => "small_decrease",
            Termination::NoFreeVariables => "no_free_variables",
            Termination::MaxIterations => "max_iterations",
            Termination::Stalled => "stalled",
        }
    }

    /// The solver gave up rather than converged.
    pub fn is_warning(&self) -> bool {
        matches!(self, Termination::Stalled)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeReport {
    /// Number of accepted steps.
    pub iterations: usize,
    pub initial_cost: f64,
    pub final_cost: f64,
    /// Damping in effect at termination.
    pub damping: f64,
    pub termination: Termination,
    /// Cost after each accepted step, starting with the initial cost.
    pub cost_history: Vec<f64>,
}

impl OptimizeReport {
    /// No accepted step increased the cost.
    pub fn is_monotone(&self) -> bool {
        self.cost_history.windows(2).all(|w| w[1] <= w[0])
    }
}

/// Levenberg–Marquardt on the unfrozen variables of `problem`, in place.
///
/// A step is accepted only if it does not increase the total cost; otherwise
/// the damping grows and the step is recomputed. Frozen variables, anchors
/// included, are never written.
pub fn optimize(
    problem: &mut FactorGraphProblem,
    objective: &Objective<'_>,
    settings: &OptimizerSettings,
) -> Result<OptimizeReport> {
    objective.weights.validate()?;
    let free = problem.free_indices();
    let n = free.len() * problem.dof();
    let mut r = Vec::new();
    let mut triplets = Vec::new();
    objective.linearize(problem, &free, &mut r, Some(&mut triplets))?;
    let mut cost = 0.5 * r.iter().map(|v| v * v).sum::<f64>();
    let mut report = OptimizeReport {
        iterations: 0,
        initial_cost: cost,
        final_cost: cost,
        damping: settings.initial_damping,
        termination: Termination::MaxIterations,
        cost_history: vec![cost],
    };
    if n == 0 {
        report.termination = Termination::NoFreeVariables;
        return Ok(report);
    }
    let mut lambda = settings.initial_damping;
    loop {
        let jac = dense(&triplets, r.len(), n);
        let res = DVector::from_column_slice(&r);
        let gradient = jac.tr_mul(&res);
        // a small gradient alone can hide slow progress along poorly
        // conditioned directions, so also require the last step to have
        // stopped paying off
        let progress_flat = match report.cost_history.as_slice() {
            [.., before, after] => before - after <= settings.cost_tolerance * before || *after < 1e-24,
            _ => true,
        };
        if gradient.amax() < settings.gradient_tolerance && progress_flat {
            report.termination = Termination::Converged;
            break;
        }
        if report.iterations >= settings.max_iterations {
            report.termination = Termination::MaxIterations;
            break;
        }
        let jtj = jac.tr_mul(&jac);
        let mut rejections = 0;
        let accepted = loop {
            let mut a = jtj.clone();
            for k in 0..n {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-6);
            }
            let delta = match a.cholesky() {
                Some(ch) => -ch.solve(&gradient),
                None => DVector::zeros(n),
            };
            let mut trial = problem.clone();
            trial.apply_step(&free, &delta);
            // steps leaving the workspace are rejected outright
            let trial_cost = if free.iter().all(|&i| objective.world.in_bounds(&trial.positions[i])) {
                let mut trial_r = Vec::new();
                objective.linearize(&trial, &free, &mut trial_r, None)?;
                0.5 * trial_r.iter().map(|v| v * v).sum::<f64>()
            } else {
                f64::INFINITY
            };
            if trial_cost.is_finite() && trial_cost <= cost && delta.amax() > 0.0 {
                lambda = (lambda / 10.0).max(1e-12);
                let small = if delta.norm() < settings.step_tolerance {
                    Some(Termination::SmallStep)
                } else if cost - trial_cost < settings.cost_tolerance * cost && trial_cost > 1e-24 {
                    Some(Termination::SmallDecrease)
                } else {
                    None
                };
                *problem = trial;
                r.clear();
                triplets.clear();
                objective.linearize(problem, &free, &mut r, Some(&mut triplets))?;
                cost = trial_cost;
                break Some(small);
            }
            lambda = (lambda * 10.0).min(1e12);
            rejections += 1;
            if rejections >= settings.max_rejections {
                break None;
            }
        };
        match accepted {
            Some(small) => {
                report.iterations += 1;
                report.cost_history.push(cost);
                if let Some(t) = small {
                    report.termination = t;
                    break;
                }
            }
            None => {
                report.termination = Termination::Stalled;
                break;
            }
        }
    }
    report.final_cost = cost;
    report.damping = lambda;
    Ok(report)
}

fn dense(triplets: &[(usize, usize, f64)], rows: usize, cols: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(rows, cols);
    for &(i, j, v) in triplets {
        m[(i, j)] += v;
    }
    m
}
