use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::world::{Rect, State};

/// Polyline trajectory with an arc-length parametrization over `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    waypoints: Vec<State>,
    cumulative: Vec<f64>,
}

impl Trajectory {
    pub fn new(waypoints: Vec<State>) -> Result<Self> {
        if waypoints.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "a trajectory needs at least 2 waypoints, got {}",
                waypoints.len()
            )));
        }
        let mut cumulative = Vec::with_capacity(waypoints.len());
        cumulative.push(0.0);
        for w in waypoints.windows(2) {
            let last = *cumulative.last().unwrap();
            cumulative.push(last + (w[1] - w[0]).norm());
        }
        Ok(Self { waypoints, cumulative })
    }

    /// Zero-length trajectory resting at `x`.
    pub fn stationary(x: State) -> Self {
        Self::new(vec![x, x]).expect("two waypoints")
    }

    pub fn waypoints(&self) -> &[State] {
        &self.waypoints
    }

    pub fn len(&self) -> usize {
        self.waypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn start(&self) -> State {
        self.waypoints[0]
    }

    pub fn end(&self) -> State {
        *self.waypoints.last().unwrap()
    }

    pub fn length(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    /// Point at normalized arc length `t ∈ [0, 1]`.
    pub fn point_at(&self, t: f64) -> State {
        let total = self.length();
        if total == 0.0 {
            return self.start();
        }
        let s = t.clamp(0.0, 1.0) * total;
        let k = match self.cumulative.binary_search_by(|c| c.total_cmp(&s)) {
            Ok(k) => return self.waypoints[k],
            Err(k) => k.clamp(1, self.waypoints.len() - 1),
        };
        let (s0, s1) = (self.cumulative[k - 1], self.cumulative[k]);
        let frac = if s1 > s0 { (s - s0) / (s1 - s0) } else { 0.0 };
        self.waypoints[k - 1] + (self.waypoints[k] - self.waypoints[k - 1]) * frac
    }

    /// `count` waypoints evenly spaced in arc length.
    pub fn respace_count(&self, count: usize) -> Self {
        let count = count.max(2);
        let pts = (0..count)
            .map(|i| self.point_at(i as f64 / (count - 1) as f64))
            .collect();
        Self::new(pts).expect("count >= 2")
    }

    /// Waypoints every `step` units of arc length; the final segment may be
    /// shorter. Corners of the original polyline are not preserved.
    pub fn respace_step(&self, step: f64) -> Self {
        let total = self.length();
        if total == 0.0 {
            return Self::stationary(self.start());
        }
        let n = (total / step).ceil().max(1.0) as usize;
        let mut pts: Vec<State> = (0..n).map(|i| self.point_at(i as f64 * step / total)).collect();
        pts.push(self.end());
        Self::new(pts).expect("at least two points")
    }
}

/// Region the agent must reach.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum GoalRegion {
    Circle { center: [f64; 2], radius: f64 },
    Rect { min: [f64; 2], max: [f64; 2] },
}

impl GoalRegion {
    pub fn point(center: State, radius: f64) -> Self {
        GoalRegion::Circle { center: [center[0], center[1]], radius }
    }

    pub fn center(&self) -> State {
        match self {
            GoalRegion::Circle { center, .. } => State::new(center[0], center[1]),
            GoalRegion::Rect { min, max } => {
                State::new(0.5 * (min[0] + max[0]), 0.5 * (min[1] + max[1]))
            }
        }
    }

    pub fn contains(&self, x: &State) -> bool {
        self.distance(x) == 0.0
    }

    /// Euclidean distance to the nearest point of the region.
    pub fn distance(&self, x: &State) -> f64 {
        match self {
            GoalRegion::Circle { center, radius } => {
                ((x - State::new(center[0], center[1])).norm() - radius).max(0.0)
            }
            GoalRegion::Rect { min, max } => {
                let r = Rect { min: *min, max: *max };
                (x - r.clamp(x)).norm()
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> State {
        match self {
            GoalRegion::Circle { center, radius } => {
                let r = radius * rng.random::<f64>().sqrt();
                let a = rng.random_range(0.0..std::f64::consts::TAU);
                State::new(center[0] + r * a.cos(), center[1] + r * a.sin())
            }
            GoalRegion::Rect { min, max } => State::new(
                rng.random_range(min[0]..=max[0]),
                rng.random_range(min[1]..=max[1]),
            ),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parametrization_endpoints_and_midpoint() {
        let t = Trajectory::new(vec![State::new(0.0, 0.0), State::new(3.0, 0.0), State::new(3.0, 1.0)]).unwrap();
        assert_eq!(t.length(), 4.0);
        assert_eq!(t.point_at(0.0), State::new(0.0, 0.0));
        assert_eq!(t.point_at(1.0), State::new(3.0, 1.0));
        assert_eq!(t.point_at(0.5), State::new(2.0, 0.0));
        assert!((t.point_at(0.875) - State::new(3.0, 0.5)).norm() < 1e-12);
    }

    #[test]
    fn respacing() {
        let t = Trajectory::new(vec![State::new(0.0, 0.0), State::new(1.0, 0.0)]).unwrap();
        let r = t.respace_step(0.3);
        assert_eq!(r.len(), 5);
        assert!((r.waypoints()[3][0] - 0.9).abs() < 1e-12);
        assert_eq!(r.end(), State::new(1.0, 0.0));
        assert_eq!(t.respace_count(11).len(), 11);
    }

    #[test]
    fn too_short_rejected() {
        assert!(Trajectory::new(vec![State::new(0.0, 0.0)]).is_err());
    }

    #[test]
    fn goal_distance() {
        let g = GoalRegion::point(State::new(5.0, 0.0), 0.0);
        assert_eq!(g.distance(&State::new(0.0, 0.0)), 5.0);
        let g = GoalRegion::Circle { center: [5.0, 5.0], radius: 1.0 };
        assert_eq!(g.distance(&State::new(5.5, 5.0)), 0.0);
        assert!(g.contains(&State::new(5.5, 5.0)));
        let r = GoalRegion::Rect { min: [1.0, 1.0], max: [2.0, 2.0] };
        assert_eq!(r.distance(&State::new(4.0, 2.0)), 2.0);
    }
}
