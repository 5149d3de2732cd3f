//! Reference computations that share no code with the library under test:
//! dense linear solves, Monte-Carlo tail estimates, finite differences and
//! fine quadrature.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
pub fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

/// Squared-exponential covariance, written out independently.
pub fn se_kernel(signal_variance: f64, lengthscales: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let mut r2 = 0.0;
    for d in 0..a.len() {
        let u = (a[d] - b[d]) / lengthscales[d];
        r2 += u * u;
    }
    signal_variance * (-0.5 * r2).exp()
}

/// GP posterior mean and variance at `x` from the dense normal equations.
pub fn gp_posterior(
    signal_variance: f64,
    lengthscales: &[f64],
    points: &[Vec<f64>],
    values: &[f64],
    noise: f64,
    x: &[f64],
) -> (f64, f64) {
    let n = points.len();
    let k = |a: &[f64], b: &[f64]| se_kernel(signal_variance, lengthscales, a, b);
    let gram: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| k(&points[i], &points[j]) + if i == j { noise } else { 0.0 }).collect())
        .collect();
    let kx: Vec<f64> = points.iter().map(|p| k(p, x)).collect();
    let w = dense_solve(gram.clone(), values.to_vec());
    let v = dense_solve(gram, kx.clone());
    let mean = kx.iter().zip(&w).map(|(a, b)| a * b).sum();
    let var = k(x, x) - kx.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>();
    (mean, var)
}

/// Empirical upper-tail VaR and CVaR of `N(mu, sigma²)` at tail mass `beta`.
pub fn monte_carlo_tail<R: Rng + ?Sized>(mu: f64, sigma: f64, beta: f64, samples: usize, rng: &mut R) -> (f64, f64) {
    let mut xs: Vec<f64> = (0..samples)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            mu + sigma * z
        })
        .collect();
    tail_of(&mut xs, beta)
}

/// Upper-tail VaR and CVaR of an empirical sample (reorders `xs`).
pub fn tail_of(xs: &mut [f64], beta: f64) -> (f64, f64) {
    let n = xs.len();
    let k = ((1.0 - beta) * n as f64).floor() as usize;
    let k = k.min(n - 1);
    xs.select_nth_unstable_by(k, |a, b| a.total_cmp(b));
    let var = xs[k];
    let tail = &xs[k..];
    let cvar = tail.iter().sum::<f64>() / tail.len() as f64;
    (var, cvar)
}

/// Central difference of `f` along coordinate `d`.
pub fn central_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], d: usize, h: f64) -> f64 {
    let mut plus = x.to_vec();
    let mut minus = x.to_vec();
    plus[d] += h;
    minus[d] -= h;
    (f(&plus) - f(&minus)) / (2.0 * h)
}

/// Composite trapezoid integral of `f` along the segment `a → b` with `n`
/// panels, with respect to arc length.
pub fn segment_trapezoid(f: impl Fn(&[f64]) -> f64, a: &[f64], b: &[f64], n: usize) -> f64 {
    let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
    let at = |t: f64| [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
    let mut sum = 0.5 * (f(&at(0.0)) + f(&at(1.0)));
    for i in 1..n {
        sum += f(&at(i as f64 / n as f64));
    }
    sum * len / n as f64
}
