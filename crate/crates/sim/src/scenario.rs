//! Scenario files: everything needed to replay an episode.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use riskplan::graph::{Budget, GraphPlannerConfig};
use riskplan::smooth::SmoothPlannerConfig;
use riskplan::{GoalRegion, Kernel, RiskConstraint, State, World, WorldConfig};

use crate::error::SimError;

/// Which planner runs the episode, with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PlannerConfig {
    Graph(GraphPlannerConfig),
    Smooth(SmoothPlannerConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    /// Stable identifier, also the default output directory name.
    pub id: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    #[serde(default)]
    pub seed: u64,
    /// Replace wall-clock planning budgets by batch counts.
    #[serde(default)]
    pub deterministic: bool,
    /// Batch budget used in deterministic mode.
    #[serde(default = "default_deterministic_batches")]
    pub deterministic_batches: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub start: [f64; 2],
    /// Goal region; the trajectory optimizer aims at its centre.
    pub goal: GoalRegion,
    pub world: WorldConfig,
    pub constraint: RiskConstraint,
    pub kernel: Kernel,
    pub planner: PlannerConfig,
}

fn default_deterministic_batches() -> usize {
    4
}

/// Scenarios shipped with the binary.
pub const BUNDLED: [(&str, &str); 3] = [
    ("fig2", include_str!("../scenarios/fig2.toml")),
    ("fig3", include_str!("../scenarios/fig3.toml")),
    ("trivial", include_str!("../scenarios/trivial.toml")),
];

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self, SimError> {
        let scenario: Scenario = toml::from_str(text).map_err(|e| SimError::Config(e.to_string()))?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn to_toml(&self) -> Result<String, SimError> {
        toml::to_string(self).map_err(|e| SimError::Config(e.to_string()))
    }

    /// Loads a scenario by bundled id or from a file path.
    pub fn load(name_or_path: &str) -> Result<Self, SimError> {
        if let Some((_, text)) = BUNDLED.iter().find(|(id, _)| *id == name_or_path) {
            return Self::from_toml(text);
        }
        let path = Path::new(name_or_path);
        let text = std::fs::read_to_string(path)
            .map_err(|e| SimError::Config(format!("cannot read scenario {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            SimError::Config(msg) => SimError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn bundled() -> Vec<Scenario> {
        BUNDLED.iter().map(|(_, t)| Self::from_toml(t).expect("bundled scenarios parse")).collect()
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let config = |e: riskplan::Error| SimError::Config(e.to_string());
        if self.id.is_empty() {
            return Err(SimError::Config("scenario id must not be empty".into()));
        }
        self.constraint.validate().map_err(config)?;
        self.kernel.validate().map_err(config)?;
        if self.kernel.dim() != 2 {
            return Err(SimError::Config(format!("kernel needs 2 lengthscales, got {}", self.kernel.dim())));
        }
        match &self.planner {
            PlannerConfig::Graph(g) => g.trigger.validate(&self.constraint).map_err(config)?,
            PlannerConfig::Smooth(s) => s.validate().map_err(config)?,
        }
        if self.deterministic_batches == 0 {
            return Err(SimError::Config("deterministic_batches must be at least 1".into()));
        }
        Ok(())
    }

    pub fn build_world(&self) -> Result<World, SimError> {
        World::build(self.world.clone()).map_err(|e| SimError::Config(e.to_string()))
    }

    pub fn start_state(&self) -> State {
        State::new(self.start[0], self.start[1])
    }

    /// Graph planner settings with the budget the run mode calls for.
    pub fn effective_graph_config(&self, g: &GraphPlannerConfig) -> GraphPlannerConfig {
        let mut g = g.clone();
        if self.deterministic {
            if let Budget::WallClock { .. } = g.budget {
                g.budget = Budget::Batches { count: self.deterministic_batches };
            }
        }
        g
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_scenarios_round_trip() {
        for s in Scenario::bundled() {
            let text = s.to_toml().unwrap();
            assert_eq!(Scenario::from_toml(&text).unwrap(), s, "{}", s.id);
        }
    }

    #[test]
    fn annotated_example_parses_and_round_trips() {
        let s = Scenario::from_toml(include_str!("../scenarios/annotated.toml")).unwrap();
        assert_eq!(s.world.obstacles.len(), 2);
        assert!(matches!(s.planner, PlannerConfig::Graph(_)));
        assert_eq!(Scenario::from_toml(&s.to_toml().unwrap()).unwrap(), s);
        // the commented-out optimizer block is valid too
        let text = include_str!("../scenarios/annotated.toml");
        let graph_start = text.find("[planner]\nkind = \"graph\"").unwrap();
        let smooth_start = text.find("# [planner]").unwrap();
        let smooth: String = text[smooth_start..].lines().map(|l| l.trim_start_matches("# ")).collect::<Vec<_>>().join("\n");
        let swapped = format!("{}{}", &text[..graph_start], smooth);
        let s = Scenario::from_toml(&swapped).unwrap();
        assert!(matches!(s.planner, PlannerConfig::Smooth(_)));
    }

    #[test]
    fn malformed_config_names_the_field() {
        let text = BUNDLED[2].1.replace("alpha = ", "alpha = \"oops\" #");
        let err = Scenario::from_toml(&text).unwrap_err().to_string();
        assert!(err.contains("alpha"), "{err}");
        assert!(err.contains("line"), "{err}");
    }

    #[test]
    fn deterministic_mode_swaps_wall_clock_budget() {
        let mut s = Scenario::load("fig2").unwrap();
        let PlannerConfig::Graph(g) = s.planner.clone() else { panic!("fig2 uses the graph planner") };
        s.deterministic = false;
        assert!(matches!(s.effective_graph_config(&g).budget, Budget::WallClock { .. }));
        s.deterministic = true;
        assert_eq!(s.effective_graph_config(&g).budget, Budget::Batches { count: s.deterministic_batches });
    }
}
