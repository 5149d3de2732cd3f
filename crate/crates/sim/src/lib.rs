//! Scenario runner for the risk-aware planners: configuration files, episode
//! traces, field exports, and the verification suite behind the `riskplan`
//! binary.

pub mod error;
pub mod field;
pub mod oracle;
pub mod runner;
pub mod scenario;
pub mod verify;

pub use error::SimError;
pub use scenario::{PlannerConfig, Scenario};
