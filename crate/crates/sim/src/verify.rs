//! The `verify` suite: closed forms and solvers against the reference
//! computations in [`crate::oracle`].

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use riskplan::gp::Dataset;
use riskplan::graph::edge_cost;
use riskplan::risk::cvar;
use riskplan::{GaussianBelief, GpModel, Kernel, RiskConstraint, RiskMetric, State, Tail};

use crate::error::SimError;
use crate::oracle;
use crate::scenario::Scenario;

/// Outcome of one oracle comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    /// Worst error observed.
    pub measured: f64,
    pub tolerance: f64,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.measured < self.tolerance
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {:<16} error {:.3e} (tolerance {:.1e})",
            if self.passed() { "PASS" } else { "FAIL" },
            self.name,
            self.measured,
            self.tolerance
        )
    }
}

/// Sample count of the Monte-Carlo CVaR check.
pub const MONTE_CARLO_SAMPLES: usize = 10_000_000;

/// Closed-form CVaR at β = 0.05 against a Monte-Carlo estimate (relative).
pub fn check_cvar(rng: &mut ChaCha8Rng, samples: usize) -> Result<Check, SimError> {
    let beta = 0.05;
    let closed = cvar(&GaussianBelief::new(0.0, 1.0), beta, Tail::Upper)?;
    let (_, mc) = oracle::monte_carlo_tail(0.0, 1.0, beta, samples, rng);
    Ok(Check { name: "cvar-monte-carlo", measured: ((closed - mc) / mc).abs(), tolerance: 5e-3 })
}

/// Cholesky posterior against dense normal equations on 50 samples
/// (absolute, mean and variance).
pub fn check_gp(kernel: &Kernel, rng: &mut ChaCha8Rng) -> Result<Check, SimError> {
    let Kernel::SquaredExponential { signal_variance, lengthscales } = kernel;
    let noise = 0.5;
    let mut data = Dataset::empty(noise);
    for _ in 0..50 {
        data.points.push(vec![rng.random_range(0.0..20.0), rng.random_range(0.0..20.0)]);
        data.values.push(rng.random_range(-10.0..60.0));
    }
    let model = GpModel::from_dataset(kernel.clone(), data.clone())?;
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let x = [rng.random_range(0.0..20.0), rng.random_range(0.0..20.0)];
        let b = model.posterior(&x)?;
        let (m, v) =
            oracle::gp_posterior(*signal_variance, lengthscales, &data.points, &data.values, noise, &x);
        worst = worst.max((b.mean - m).abs()).max((b.variance - v).abs());
    }
    Ok(Check { name: "gp-dense-solve", measured: worst, tolerance: 1e-8 })
}

/// A model that has seen a few strong random samples, and an expected-value
/// constraint violated around them.
fn violated_setup(kernel: &Kernel, rng: &mut ChaCha8Rng) -> Result<(GpModel, RiskConstraint), SimError> {
    let mut data = Dataset::empty(0.5);
    for _ in 0..30 {
        data.points.push(vec![rng.random_range(2.0..18.0), rng.random_range(2.0..18.0)]);
        data.values.push(rng.random_range(0.0..60.0));
    }
    let model = GpModel::from_dataset(kernel.clone(), data)?;
    let constraint = RiskConstraint::new(RiskMetric::expected(), 10.0, 0.1)?;
    Ok((model, constraint))
}

/// Cost gradient against central differences of the cost on 100 violated
/// states under the expected-value metric (relative, vector norm).
pub fn check_gradient(kernel: &Kernel, rng: &mut ChaCha8Rng) -> Result<Check, SimError> {
    let (model, c) = violated_setup(kernel, rng)?;
    let cost = |x: &[f64]| c.cost(&model, x).map(|s| s.value).unwrap_or(f64::NAN);
    let mut worst: f64 = 0.0;
    let mut found = 0;
    while found < 100 {
        let x = [rng.random_range(0.0..20.0), rng.random_range(0.0..20.0)];
        // keep clear of the φ = 0 kink
        if c.phi(&model, &x)? > -0.1 {
            continue;
        }
        found += 1;
        let g = c.cost_gradient(&model, &x)?;
        let fd: Vec<f64> = (0..2).map(|d| oracle::central_difference(cost, &x, d, 1e-5)).collect();
        let err = ((g[0] - fd[0]).powi(2) + (g[1] - fd[1]).powi(2)).sqrt();
        let norm = (fd[0].powi(2) + fd[1].powi(2)).sqrt().max(1e-12);
        worst = worst.max(err / norm);
    }
    Ok(Check { name: "gradient-fd", measured: worst, tolerance: 1e-3 })
}

/// Edge cost (trapezoid at step 0.1) against a 100× finer trapezoid
/// (relative).
pub fn check_quadrature(kernel: &Kernel, rng: &mut ChaCha8Rng) -> Result<Check, SimError> {
    let (model, c) = violated_setup(kernel, rng)?;
    let cost = |x: &[f64]| c.cost(&model, x).map(|s| s.value).unwrap_or(f64::NAN);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let a = State::new(rng.random_range(0.0..20.0), rng.random_range(0.0..20.0));
        let b = State::new(rng.random_range(0.0..20.0), rng.random_range(0.0..20.0));
        let coarse = edge_cost(&c, &model, &a, &b, 0.1)?;
        let panels = 100 * ((b - a).norm() / 0.1).ceil().max(1.0) as usize;
        let fine = oracle::segment_trapezoid(cost, a.as_slice(), b.as_slice(), panels);
        worst = worst.max(((coarse - fine) / fine).abs());
    }
    Ok(Check { name: "quadrature", measured: worst, tolerance: 1e-2 })
}

/// Runs every check with the scenario's kernel and seed.
pub fn run_suite(scenario: &Scenario, monte_carlo_samples: usize) -> Result<Vec<Check>, SimError> {
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    Ok(vec![
        check_cvar(&mut rng, monte_carlo_samples)?,
        check_gp(&scenario.kernel, &mut rng)?,
        check_gradient(&scenario.kernel, &mut rng)?,
        check_quadrature(&scenario.kernel, &mut rng)?,
    ])
}
