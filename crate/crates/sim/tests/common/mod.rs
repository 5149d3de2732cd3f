//! Reference computations for the integration and acceptance tests. They
//! deliberately avoid the library's linear algebra and closed forms.

#![allow(dead_code)]

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Solves `a X = B` for several right-hand sides by Gauss–Jordan
/// elimination with partial pivoting.
pub fn solve_many(mut a: Vec<Vec<f64>>, mut rhs: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let n = a.len();
    for col in 0..n {
        let p = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, p);
        for r in rhs.iter_mut() {
            r.swap(col, p);
        }
        let pivot = a[col][col];
        for row in 0..n {
            if row == col {
                continue;
            }
            let f = a[row][col] / pivot;
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            for r in rhs.iter_mut() {
                r[row] -= f * r[col];
            }
        }
    }
    for r in rhs.iter_mut() {
        for (i, v) in r.iter_mut().enumerate() {
            *v /= a[i][i];
        }
    }
    rhs
}

pub fn se(signal_variance: f64, lengthscales: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let r2: f64 = (0..a.len()).map(|d| ((a[d] - b[d]) / lengthscales[d]).powi(2)).sum();
    signal_variance * (-0.5 * r2).exp()
}

/// Posterior (mean, variance) at every query by dense solves.
pub fn gp_dense(
    signal_variance: f64,
    lengthscales: &[f64],
    points: &[Vec<f64>],
    values: &[f64],
    noise: f64,
    queries: &[Vec<f64>],
) -> Vec<(f64, f64)> {
    let n = points.len();
    let k = |a: &[f64], b: &[f64]| se(signal_variance, lengthscales, a, b);
    let gram: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| k(&points[i], &points[j]) + if i == j { noise } else { 0.0 }).collect())
        .collect();
    let cross: Vec<Vec<f64>> = queries.iter().map(|q| points.iter().map(|p| k(p, q)).collect()).collect();
    let mut rhs = vec![values.to_vec()];
    rhs.extend(cross.iter().cloned());
    let sol = solve_many(gram, rhs);
    queries
        .iter()
        .enumerate()
        .map(|(qi, q)| {
            let kx = &cross[qi];
            let mean = kx.iter().zip(&sol[0]).map(|(a, b)| a * b).sum();
            let var = k(q, q) - kx.iter().zip(&sol[qi + 1]).map(|(a, b)| a * b).sum::<f64>();
            (mean, var)
        })
        .collect()
}

pub fn normal_samples<R: Rng + ?Sized>(mu: f64, sigma: f64, n: usize, rng: &mut R) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            mu + sigma * z
        })
        .collect()
}

/// Empirical upper-tail (VaR, CVaR) at tail mass `beta`; reorders `xs`.
pub fn empirical_tail(xs: &mut [f64], beta: f64) -> (f64, f64) {
    let n = xs.len();
    let k = (((1.0 - beta) * n as f64).floor() as usize).min(n - 1);
    xs.select_nth_unstable_by(k, |a, b| a.total_cmp(b));
    let var = xs[k];
    let tail = &xs[k..];
    (var, tail.iter().sum::<f64>() / tail.len() as f64)
}

pub fn central_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], d: usize, h: f64) -> f64 {
    let mut p = x.to_vec();
    let mut m = x.to_vec();
    p[d] += h;
    m[d] -= h;
    (f(&p) - f(&m)) / (2.0 * h)
}

/// Trapezoid line integral of `f` over `a → b` with `n` panels.
pub fn line_integral(f: impl Fn(&[f64]) -> f64, a: [f64; 2], b: [f64; 2], n: usize) -> f64 {
    let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
    let at = |t: f64| [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
    let mut s = 0.5 * (f(&at(0.0)) + f(&at(1.0)));
    for i in 1..n {
        s += f(&at(i as f64 / n as f64));
    }
    s * len / n as f64
}
