//! Exact Gaussian-process regression over scalar spatial fields.
//!
//! The model keeps a lower Cholesky factor `L` of `K + σ_n² I` and the weight
//! vector `α = (K + σ_n² I)⁻¹ z`. Appending an observation extends `L` by one
//! row instead of refactorizing, falling back to a full (jittered)
//! factorization when the extension is numerically singular.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const INITIAL_JITTER: f64 = 1e-10;
const MAX_JITTER_STEPS: usize = 10;
const DOMAIN_TOL: f64 = 1e-9;

/// Covariance function. Only the squared-exponential family is provided.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Kernel {
    SquaredExponential {
        signal_variance: f64,
        lengthscales: Vec<f64>,
    },
}

impl Kernel {
    pub fn squared_exponential(signal_variance: f64, lengthscales: Vec<f64>) -> Result<Self> {
        let kernel = Kernel::SquaredExponential {
            signal_variance,
            lengthscales,
        };
        kernel.validate()?;
        Ok(kernel)
    }

    /// Squared-exponential kernel with the library defaults (variance 50,
    /// lengthscale 2 on both axes).
    pub fn default_2d() -> Self {
        Kernel::SquaredExponential {
            signal_variance: 50.0,
            lengthscales: vec![2.0, 2.0],
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Kernel::SquaredExponential {
                signal_variance,
                lengthscales,
            } => {
                if !(signal_variance.is_finite() && *signal_variance > 0.0) {
                    return Err(Error::InvalidInput(format!(
                        "signal variance must be positive, got {signal_variance}"
                    )));
                }
                if lengthscales.is_empty() {
                    return Err(Error::InvalidInput("kernel needs at least one lengthscale".into()));
                }
                if let Some(l) = lengthscales.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
                    return Err(Error::InvalidInput(format!(
                        "lengthscales must be positive, got {l}"
                    )));
                }
                Ok(())
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Kernel::SquaredExponential { lengthscales, .. } => lengthscales.len(),
        }
    }

    pub fn signal_variance(&self) -> f64 {
        match self {
            Kernel::SquaredExponential {
                signal_variance, ..
            } => *signal_variance,
        }
    }

    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Kernel::SquaredExponential {
                signal_variance,
                lengthscales,
            } => {
                let r2: f64 = a
                    .iter()
                    .zip(b)
                    .zip(lengthscales)
                    .map(|((ai, bi), l)| ((ai - bi) / l).powi(2))
                    .sum();
                signal_variance * (-0.5 * r2).exp()
            }
        }
    }

    /// κ(x, x).
    pub fn prior_variance(&self, _x: &[f64]) -> f64 {
        self.signal_variance()
    }

    /// Writes ∂κ(a, b)/∂a into `out`.
    pub fn grad_first(&self, a: &[f64], b: &[f64], out: &mut [f64]) {
        match self {
            Kernel::SquaredExponential { lengthscales, .. } => {
                let k = self.eval(a, b);
                for (d, o) in out.iter_mut().enumerate() {
                    *o = -k * (a[d] - b[d]) / (lengthscales[d] * lengthscales[d]);
                }
            }
        }
    }

    /// ∂²κ(a, b)/∂a_d ∂b_d evaluated at a = b.
    pub fn derivative_prior_variance(&self, d: usize) -> f64 {
        match self {
            Kernel::SquaredExponential {
                signal_variance,
                lengthscales,
            } => signal_variance / (lengthscales[d] * lengthscales[d]),
        }
    }
}

/// Axis-aligned box the model accepts queries in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Domain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::Dimension {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l < u)) {
            return Err(Error::InvalidInput("domain lower bounds must be below upper bounds".into()));
        }
        Ok(Self { lower, upper })
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.lower.len()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, u))| *v >= l - DOMAIN_TOL && *v <= u + DOMAIN_TOL)
    }
}

/// Noisy observations of the field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub points: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    pub noise_variance: f64,
}

impl Dataset {
    pub fn empty(noise_variance: f64) -> Self {
        Self {
            points: Vec::new(),
            values: Vec::new(),
            noise_variance,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Mean and variance of a scalar Gaussian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianBelief {
    pub mean: f64,
    pub variance: f64,
}

impl GaussianBelief {
    pub fn new(mean: f64, variance: f64) -> Self {
        Self { mean, variance }
    }

    pub fn std_dev(&self) -> f64 {
        self.variance.max(0.0).sqrt()
    }
}

/// Zero-mean GP conditioned on a [`Dataset`].
#[derive(Debug, Clone)]
pub struct GpModel {
    kernel: Kernel,
    data: Dataset,
    domain: Option<Domain>,
    chol: DMatrix<f64>,
    alpha: DVector<f64>,
    jitter: f64,
}

impl GpModel {
    pub fn new(kernel: Kernel, noise_variance: f64) -> Result<Self> {
        kernel.validate()?;
        if !(noise_variance.is_finite() && noise_variance >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "noise variance must be non-negative, got {noise_variance}"
            )));
        }
        Ok(Self {
            kernel,
            data: Dataset::empty(noise_variance),
            domain: None,
            chol: DMatrix::zeros(0, 0),
            alpha: DVector::zeros(0),
            jitter: 0.0,
        })
    }

    pub fn with_domain(mut self, domain: Domain) -> Result<Self> {
        if domain.lower.len() != self.kernel.dim() {
            return Err(Error::Dimension {
                expected: self.kernel.dim(),
                got: domain.lower.len(),
            });
        }
        if let Some(p) = self.data.points.iter().find(|p| !domain.contains(p)) {
            return Err(Error::OutOfDomain { point: p.clone() });
        }
        self.domain = Some(domain);
        Ok(self)
    }

    /// Builds a model from a full dataset with a single factorization.
    pub fn from_dataset(kernel: Kernel, data: Dataset) -> Result<Self> {
        let mut model = Self::new(kernel, data.noise_variance)?;
        if data.points.len() != data.values.len() {
            return Err(Error::InvalidInput(format!(
                "dataset has {} points but {} values",
                data.points.len(),
                data.values.len()
            )));
        }
        for (p, z) in data.points.iter().zip(&data.values) {
            model.check_point(p)?;
            if !z.is_finite() {
                return Err(Error::InvalidInput(format!("non-finite observation {z}")));
            }
        }
        model.data = data;
        model.refactorize()?;
        Ok(model)
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn dataset(&self) -> &Dataset {
        &self.data
    }

    pub fn domain(&self) -> Option<&Domain> {
        self.domain.as_ref()
    }

    pub fn noise_variance(&self) -> f64 {
        self.data.noise_variance
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Diagonal jitter currently added to `K + σ_n² I` (0 unless the plain
    /// matrix failed to factorize).
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.kernel.dim() {
            return Err(Error::Dimension {
                expected: self.kernel.dim(),
                got: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite coordinates {x:?}")));
        }
        match &self.domain {
            Some(d) if !d.contains(x) => Err(Error::OutOfDomain { point: x.to_vec() }),
            _ => Ok(()),
        }
    }

    fn covariance_matrix(&self, jitter: f64) -> DMatrix<f64> {
        let n = self.data.len();
        let pts = &self.data.points;
        let diag = self.data.noise_variance + jitter;
        DMatrix::from_fn(n, n, |i, j| {
            let k = self.kernel.eval(&pts[i], &pts[j]);
            if i == j {
                k + diag
            } else {
                k
            }
        })
    }

    fn refactorize(&mut self) -> Result<()> {
        let n = self.data.len();
        if n == 0 {
            self.chol = DMatrix::zeros(0, 0);
            self.alpha = DVector::zeros(0);
            self.jitter = 0.0;
            return Ok(());
        }
        let mut jitter = 0.0;
        for step in 0..=MAX_JITTER_STEPS {
            let cov = self.covariance_matrix(jitter);
            let factor = cov.clone().cholesky().map(|c| c.unpack());
            // reject numerically singular factors (tiny pivots)
            let usable = factor.filter(|l| (0..n).all(|i| l[(i, i)] * l[(i, i)] > 1e-12 * cov[(i, i)]));
            if let Some(l) = usable {
                self.chol = l;
                self.jitter = jitter;
                self.update_alpha();
                return Ok(());
            }
            jitter = INITIAL_JITTER * 10f64.powi(step as i32);
        }
        Err(Error::Factorization)
    }

    fn update_alpha(&mut self) {
        let z = DVector::from_column_slice(&self.data.values);
        let y = self
            .chol
            .solve_lower_triangular(&z)
            .expect("cholesky factor has a positive diagonal");
        self.alpha = self
            .chol
            .tr_solve_lower_triangular(&y)
            .expect("cholesky factor has a positive diagonal");
    }

    fn cross_covariance(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(
            self.data.len(),
            self.data.points.iter().map(|p| self.kernel.eval(x, p)),
        )
    }

    /// Appends `(x, z)` and updates the cached factorization.
    pub fn add_observation(&mut self, x: &[f64], z: f64) -> Result<()> {
        self.check_point(x)?;
        if !z.is_finite() {
            return Err(Error::InvalidInput(format!("non-finite observation {z}")));
        }
        let k = self.cross_covariance(x);
        let n = self.data.len();
        self.data.points.push(x.to_vec());
        self.data.values.push(z);

        let kxx = self.kernel.prior_variance(x) + self.data.noise_variance + self.jitter;
        let extension = if n == 0 {
            Some((DVector::zeros(0), kxx))
        } else {
            self.chol
                .solve_lower_triangular(&k)
                .map(|l| {
                    let d2 = kxx - l.norm_squared();
                    (l, d2)
                })
        };
        match extension {
            Some((l, d2)) if d2 > 1e-12 * kxx => {
                let chol = std::mem::replace(&mut self.chol, DMatrix::zeros(0, 0));
                let mut chol = chol.resize(n + 1, n + 1, 0.0);
                for j in 0..n {
                    chol[(n, j)] = l[j];
                }
                chol[(n, n)] = d2.sqrt();
                self.chol = chol;
                self.update_alpha();
                Ok(())
            }
            _ => self.refactorize(),
        }
    }

    /// Posterior mean only; O(N).
    pub fn posterior_mean(&self, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        if self.is_empty() {
            return Ok(0.0);
        }
        Ok(self.cross_covariance(x).dot(&self.alpha))
    }

    pub fn posterior(&self, x: &[f64]) -> Result<GaussianBelief> {
        self.check_point(x)?;
        let prior = self.kernel.prior_variance(x);
        if self.is_empty() {
            return Ok(GaussianBelief::new(0.0, prior));
        }
        let k = self.cross_covariance(x);
        let mean = k.dot(&self.alpha);
        let v = self
            .chol
            .solve_lower_triangular(&k)
            .ok_or(Error::Factorization)?;
        let variance = (prior - v.norm_squared()).clamp(0.0, prior);
        Ok(GaussianBelief::new(mean, variance))
    }

    /// Posterior belief over each partial derivative ∂g/∂x_d at `x`.
    ///
    /// Only the diagonal of the derivative covariance is returned.
    pub fn posterior_derivative(&self, x: &[f64]) -> Result<Vec<GaussianBelief>> {
        self.check_point(x)?;
        let dim = self.kernel.dim();
        if self.is_empty() {
            return Ok((0..dim)
                .map(|d| GaussianBelief::new(0.0, self.kernel.derivative_prior_variance(d)))
                .collect());
        }
        let n = self.data.len();
        // column d holds ∂κ(x, x_i)/∂x_d over i
        let mut dk = DMatrix::<f64>::zeros(n, dim);
        let mut buf = vec![0.0; dim];
        for (i, p) in self.data.points.iter().enumerate() {
            self.kernel.grad_first(x, p, &mut buf);
            for d in 0..dim {
                dk[(i, d)] = buf[d];
            }
        }
        let w = self
            .chol
            .solve_lower_triangular(&dk)
            .ok_or(Error::Factorization)?;
        Ok((0..dim)
            .map(|d| {
                let mean = dk.column(d).dot(&self.alpha);
                let prior = self.kernel.derivative_prior_variance(d);
                let variance = (prior - w.column(d).norm_squared()).clamp(0.0, prior);
                GaussianBelief::new(mean, variance)
            })
            .collect())
    }
}
