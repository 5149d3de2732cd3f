//! Ground-truth environment: bounds, obstacles, signed-distance grid, hazard
//! sources and the noisy observation channel.

use nalgebra::Vector2;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::Domain;

pub type State = Vector2<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl Rect {
    pub fn new(min: [f64; 2], max: [f64; 2]) -> Result<Self> {
        if !(min[0] < max[0] && min[1] < max[1]) {
            return Err(Error::InvalidInput(format!("degenerate rectangle {min:?}..{max:?}")));
        }
        Ok(Self { min, max })
    }

    pub fn width(&self) -> f64 {
        self.max[0] - self.min[0]
    }

    pub fn height(&self) -> f64 {
        self.max[1] - self.min[1]
    }

    pub fn diameter(&self) -> f64 {
        self.width().hypot(self.height())
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn contains(&self, x: &State) -> bool {
        x[0] >= self.min[0] && x[0] <= self.max[0] && x[1] >= self.min[1] && x[1] <= self.max[1]
    }

    /// Signed distance, negative inside.
    pub fn signed_distance(&self, x: &State) -> f64 {
        let cx = 0.5 * (self.min[0] + self.max[0]);
        let cy = 0.5 * (self.min[1] + self.max[1]);
        let qx = (x[0] - cx).abs() - 0.5 * self.width();
        let qy = (x[1] - cy).abs() - 0.5 * self.height();
        let outside = qx.max(0.0).hypot(qy.max(0.0));
        outside + qx.max(qy).min(0.0)
    }

    /// Closest point on the rectangle (clamped).
    pub fn clamp(&self, x: &State) -> State {
        State::new(x[0].clamp(self.min[0], self.max[0]), x[1].clamp(self.min[1], self.max[1]))
    }

    pub fn domain(&self) -> Domain {
        Domain {
            lower: self.min.to_vec(),
            upper: self.max.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Obstacle {
    Rect { min: [f64; 2], max: [f64; 2] },
    Circle { center: [f64; 2], radius: f64 },
}

impl Obstacle {
    pub fn signed_distance(&self, x: &State) -> f64 {
        match self {
            Obstacle::Rect { min, max } => Rect { min: *min, max: *max }.signed_distance(x),
            Obstacle::Circle { center, radius } => {
                (x - State::new(center[0], center[1])).norm() - radius
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Obstacle::Rect { min, max } => Rect::new(*min, *max).map(|_| ()),
            Obstacle::Circle { radius, .. } if *radius > 0.0 => Ok(()),
            Obstacle::Circle { radius, .. } => {
                Err(Error::InvalidInput(format!("circle radius must be positive, got {radius}")))
            }
        }
    }
}

/// Gaussian-bump hazard source whose peak is displaced along an ellipse by
/// the phase `tau`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HazardSource {
    pub center: [f64; 2],
    #[serde(default = "default_gain")]
    pub gain: f64,
    #[serde(default)]
    pub tau: f64,
    #[serde(default = "default_decay")]
    pub decay: [f64; 2],
}

fn default_gain() -> f64 {
    100.0
}

fn default_decay() -> [f64; 2] {
    [1.1, 0.9]
}

/// Radius of the ellipse the source peak travels along as `tau` varies.
pub const SOURCE_ORBIT: f64 = 1.5;

impl HazardSource {
    pub fn peak(&self) -> State {
        let phase = 2.0 * std::f64::consts::PI * self.tau;
        State::new(
            self.center[0] + SOURCE_ORBIT * phase.sin(),
            self.center[1] + SOURCE_ORBIT * phase.cos(),
        )
    }

    /// Field value at `x`. With `squared` false the exponents are used as
    /// written without squaring, which is unbounded below the peak.
    pub fn value(&self, x: &State, squared: bool) -> f64 {
        let p = self.peak();
        let u = (x[0] - p[0]) / self.decay[0];
        let v = (x[1] - p[1]) / self.decay[1];
        if squared {
            self.gain * (-(u * u)).exp() * (-(v * v)).exp()
        } else {
            self.gain * (-u).exp() * (-v).exp()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.decay[0] > 0.0 && self.decay[1] > 0.0) {
            return Err(Error::InvalidInput(format!("decay constants must be positive, got {:?}", self.decay)));
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(Error::InvalidInput(format!("tau must lie in [0, 1], got {}", self.tau)));
        }
        Ok(())
    }
}

/// Distances sampled on a regular grid of nodes covering the bounds,
/// bilinearly interpolated in between.
#[derive(Debug, Clone, PartialEq)]
pub struct SignedDistanceGrid {
    pub origin: [f64; 2],
    pub cell_size: [f64; 2],
    pub nx: usize,
    pub ny: usize,
    values: Vec<f64>,
}

impl SignedDistanceGrid {
    pub fn build(bounds: &Rect, resolution: f64, distance: impl Fn(&State) -> f64) -> Result<Self> {
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(Error::InvalidInput(format!("sdf resolution must be positive, got {resolution}")));
        }
        let cells_x = (bounds.width() / resolution).ceil().max(1.0) as usize;
        let cells_y = (bounds.height() / resolution).ceil().max(1.0) as usize;
        let cell_size = [bounds.width() / cells_x as f64, bounds.height() / cells_y as f64];
        let (nx, ny) = (cells_x + 1, cells_y + 1);
        let mut values = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let p = State::new(
                    bounds.min[0] + i as f64 * cell_size[0],
                    bounds.min[1] + j as f64 * cell_size[1],
                );
                values.push(distance(&p));
            }
        }
        Ok(Self { origin: bounds.min, cell_size, nx, ny, values })
    }

    pub fn node(&self, i: usize, j: usize) -> State {
        State::new(
            self.origin[0] + i as f64 * self.cell_size[0],
            self.origin[1] + j as f64 * self.cell_size[1],
        )
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.nx + i]
    }

    pub fn max_cell(&self) -> f64 {
        self.cell_size[0].max(self.cell_size[1])
    }

    fn locate(&self, x: &State) -> (usize, usize, f64, f64) {
        let fx = ((x[0] - self.origin[0]) / self.cell_size[0]).clamp(0.0, (self.nx - 1) as f64);
        let fy = ((x[1] - self.origin[1]) / self.cell_size[1]).clamp(0.0, (self.ny - 1) as f64);
        let i = (fx.floor() as usize).min(self.nx - 2);
        let j = (fy.floor() as usize).min(self.ny - 2);
        (i, j, fx - i as f64, fy - j as f64)
    }

    pub fn interpolate(&self, x: &State) -> f64 {
        let (i, j, tx, ty) = self.locate(x);
        let (v00, v10, v01, v11) =
            (self.value(i, j), self.value(i + 1, j), self.value(i, j + 1), self.value(i + 1, j + 1));
        (1.0 - ty) * ((1.0 - tx) * v00 + tx * v10) + ty * ((1.0 - tx) * v01 + tx * v11)
    }

    /// Gradient of the bilinear interpolant.
    pub fn gradient(&self, x: &State) -> State {
        let (i, j, tx, ty) = self.locate(x);
        let (v00, v10, v01, v11) =
            (self.value(i, j), self.value(i + 1, j), self.value(i, j + 1), self.value(i + 1, j + 1));
        State::new(
            ((1.0 - ty) * (v10 - v00) + ty * (v11 - v01)) / self.cell_size[0],
            ((1.0 - tx) * (v01 - v00) + tx * (v11 - v10)) / self.cell_size[1],
        )
    }
}

/// Scenario description of a world, before the distance grid is built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldConfig {
    #[serde(default = "default_bounds")]
    pub bounds: Rect,
    #[serde(default)]
    pub obstacles: Vec<Obstacle>,
    #[serde(default)]
    pub sources: Vec<HazardSource>,
    #[serde(default = "default_sigma_n2")]
    pub sigma_n2: f64,
    #[serde(default = "default_resolution")]
    pub sdf_resolution: f64,
    /// Use the unsquared exponents of the hazard formula.
    #[serde(default)]
    pub literal_exponent: bool,
}

fn default_bounds() -> Rect {
    Rect { min: [0.0, 0.0], max: [20.0, 20.0] }
}

fn default_sigma_n2() -> f64 {
    0.5
}

fn default_resolution() -> f64 {
    0.1
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            bounds: default_bounds(),
            obstacles: Vec::new(),
            sources: Vec::new(),
            sigma_n2: default_sigma_n2(),
            sdf_resolution: default_resolution(),
            literal_exponent: false,
        }
    }
}

/// Immutable environment.
#[derive(Debug, Clone)]
pub struct World {
    config: WorldConfig,
    sdf: SignedDistanceGrid,
}

impl World {
    pub fn build(config: WorldConfig) -> Result<Self> {
        Rect::new(config.bounds.min, config.bounds.max)?;
        for o in &config.obstacles {
            o.validate()?;
        }
        for s in &config.sources {
            s.validate()?;
        }
        if !(config.sigma_n2 >= 0.0 && config.sigma_n2.is_finite()) {
            return Err(Error::InvalidInput(format!("sigma_n2 must be non-negative, got {}", config.sigma_n2)));
        }
        let bounds = config.bounds;
        let obstacles = config.obstacles.clone();
        let sdf = SignedDistanceGrid::build(&bounds, config.sdf_resolution, |x| {
            exact_distance(&bounds, &obstacles, x)
        })?;
        let any_free = (0..sdf.ny).any(|j| (0..sdf.nx).any(|i| sdf.value(i, j) > 0.0));
        if !any_free {
            return Err(Error::InvalidInput("world has no free space".into()));
        }
        Ok(Self { config, sdf })
    }

    pub fn config(&self) -> &WorldConfig {
        &self.config
    }

    pub fn bounds(&self) -> &Rect {
        &self.config.bounds
    }

    pub fn obstacles(&self) -> &[Obstacle] {
        &self.config.obstacles
    }

    pub fn sources(&self) -> &[HazardSource] {
        &self.config.sources
    }

    pub fn sensor_noise(&self) -> f64 {
        self.config.sigma_n2
    }

    pub fn sdf(&self) -> &SignedDistanceGrid {
        &self.sdf
    }

    pub fn in_bounds(&self, x: &State) -> bool {
        self.config.bounds.contains(x)
    }

    /// Ground-truth hazard: superposition of all sources.
    pub fn hazard(&self, x: &State) -> f64 {
        self.config
            .sources
            .iter()
            .fold(0.0, |acc, s| acc + s.value(x, !self.config.literal_exponent))
    }

    /// Noisy measurement `g(x) + ε`, `ε ~ N(0, σ_n²)`.
    pub fn observe<R: Rng + ?Sized>(&self, x: &State, rng: &mut R) -> f64 {
        let g = self.hazard(x);
        if self.config.sigma_n2 == 0.0 {
            return g;
        }
        let noise = Normal::new(0.0, self.config.sigma_n2.sqrt()).expect("finite positive std");
        g + noise.sample(rng)
    }

    /// Interpolated signed distance; positive in free space.
    pub fn signed_distance(&self, x: &State) -> f64 {
        self.sdf.interpolate(x)
    }

    pub fn signed_distance_gradient(&self, x: &State) -> State {
        self.sdf.gradient(x)
    }

    /// Exact distance to the nearest obstacle or bounds edge, negative inside
    /// obstacles.
    pub fn exact_signed_distance(&self, x: &State) -> f64 {
        exact_distance(&self.config.bounds, &self.config.obstacles, x)
    }

    pub fn is_free(&self, x: &State) -> bool {
        self.in_bounds(x) && self.config.obstacles.iter().all(|o| o.signed_distance(x) >= 0.0)
    }

    /// Segment feasibility, sampled at most half a cell apart.
    pub fn collision_free(&self, a: &State, b: &State) -> bool {
        let len = (b - a).norm();
        let step = 0.5 * self.sdf.cell_size[0].min(self.sdf.cell_size[1]);
        let n = (len / step).ceil().max(1.0) as usize;
        (0..=n).all(|k| self.is_free(&(a + (b - a) * (k as f64 / n as f64))))
    }
}

fn exact_distance(bounds: &Rect, obstacles: &[Obstacle], x: &State) -> f64 {
    let wall = (x[0] - bounds.min[0])
        .min(bounds.max[0] - x[0])
        .min(x[1] - bounds.min[1])
        .min(bounds.max[1] - x[1]);
    obstacles.iter().map(|o| o.signed_distance(x)).fold(wall, f64::min)
}
