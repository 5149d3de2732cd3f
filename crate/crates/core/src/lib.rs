//! Risk-aware online motion planning over an a-priori unknown hazard field.
//!
//! The agent models the hazard with a Gaussian process learned from its own
//! noisy samples ([`gp`]), turns the posterior into a perceived risk with VaR
//! or CVaR ([`risk`]), and penalizes states whose risk exceeds a threshold
//! through an exponential cost field ([`constraint`]). Two planners consume
//! that field: a batch-informed sampling planner with event-triggered
//! replanning ([`graph`]) and an incremental trajectory optimizer
//! ([`smooth`]).

pub mod constraint;
pub mod error;
pub mod gp;
pub mod graph;
pub mod risk;
pub mod smooth;
pub mod trace;
pub mod trajectory;
pub mod world;

pub use constraint::RiskConstraint;
pub use error::{Error, Result};
pub use gp::{GaussianBelief, GpModel, Kernel};
pub use risk::{RiskKind, RiskMetric, Tail};
pub use trace::EpisodeTrace;
pub use trajectory::{GoalRegion, Trajectory};
pub use world::{State, World, WorldConfig};
