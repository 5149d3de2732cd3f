//! Plot-ready grids of the ground truth, the belief, and the cost field.

use std::fmt::Write as _;
use std::str::FromStr;

use riskplan::gp::Dataset;
use riskplan::{GpModel, RiskKind, RiskMetric, State};

use crate::error::SimError;
use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    Truth,
    PosteriorMean,
    /// CVaR of the belief at the scenario's safety level.
    PosteriorCvar,
    Cost,
}

impl FieldKind {
    pub const ALL: [FieldKind; 4] =
        [FieldKind::Truth, FieldKind::PosteriorMean, FieldKind::PosteriorCvar, FieldKind::Cost];

    pub fn name(&self) -> &'static str {
        match self {
            FieldKind::Truth => "truth",
            FieldKind::PosteriorMean => "posterior-mean",
            FieldKind::PosteriorCvar => "posterior-cvar",
            FieldKind::Cost => "cost",
        }
    }
}

impl FromStr for FieldKind {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, SimError> {
        FieldKind::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| {
            let names: Vec<_> = FieldKind::ALL.iter().map(|k| k.name()).collect();
            SimError::Config(format!("unknown field '{s}', expected one of {}", names.join(", ")))
        })
    }
}

/// Values on a rectangular grid; `values[j][i]` sits at `(xs[i], ys[j])`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl Grid {
    /// CSV whose header row lists the x coordinates; every following row
    /// starts with its y coordinate.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("y\\x");
        for x in &self.xs {
            write!(out, ",{x}").unwrap();
        }
        out.push('\n');
        for (y, row) in self.ys.iter().zip(&self.values) {
            write!(out, "{y}").unwrap();
            for v in row {
                write!(out, ",{v}").unwrap();
            }
            out.push('\n');
        }
        out
    }
}

fn axis(lo: f64, hi: f64, resolution: f64) -> Vec<f64> {
    let n = ((hi - lo) / resolution + 1e-9).floor() as usize;
    let mut v: Vec<f64> = (0..=n).map(|i| lo + i as f64 * resolution).collect();
    if hi - v[n] > 1e-9 {
        v.push(hi);
    }
    v
}

/// Samples `kind` over the scenario's bounds every `resolution` units.
/// Posterior fields condition the scenario's kernel on `dataset`; without
/// one, the prior is used.
pub fn export_field(
    scenario: &Scenario,
    kind: FieldKind,
    resolution: f64,
    dataset: Option<Dataset>,
) -> Result<Grid, SimError> {
    if !(resolution.is_finite() && resolution > 0.0) {
        return Err(SimError::Config(format!("resolution must be positive, got {resolution}")));
    }
    let world = scenario.build_world()?;
    let bounds = *world.bounds();
    let data = dataset.unwrap_or_else(|| Dataset::empty(world.sensor_noise()));
    let model = GpModel::from_dataset(scenario.kernel.clone(), data)?.with_domain(bounds.domain())?;
    let cvar = RiskMetric::new(RiskKind::Cvar, scenario.constraint.metric.beta, scenario.constraint.metric.tail)?;

    let xs = axis(bounds.min[0], bounds.max[0], resolution);
    let ys = axis(bounds.min[1], bounds.max[1], resolution);
    let mut values = Vec::with_capacity(ys.len());
    for &y in &ys {
        let mut row = Vec::with_capacity(xs.len());
        for &x in &xs {
            let p = State::new(x, y);
            row.push(match kind {
                FieldKind::Truth => world.hazard(&p),
                FieldKind::PosteriorMean => model.posterior_mean(p.as_slice())?,
                FieldKind::PosteriorCvar => cvar.apply(&model.posterior(p.as_slice())?),
                FieldKind::Cost => scenario.constraint.cost(&model, p.as_slice())?.value,
            });
        }
        values.push(row);
    }
    Ok(Grid { xs, ys, values })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_covers_bounds() {
        assert_eq!(axis(0.0, 1.0, 0.5), vec![0.0, 0.5, 1.0]);
        assert_eq!(axis(0.0, 1.0, 0.4), vec![0.0, 0.4, 0.8, 1.0]);
    }

    #[test]
    fn field_names_parse() {
        for k in FieldKind::ALL {
            assert_eq!(k.name().parse::<FieldKind>().unwrap(), k);
        }
        assert!("density".parse::<FieldKind>().is_err());
    }

    #[test]
    fn trivial_truth_is_zero_and_cost_is_one() {
        let s = Scenario::load("trivial").unwrap();
        let truth = export_field(&s, FieldKind::Truth, 1.0, None).unwrap();
        assert_eq!(truth.xs.len(), 21);
        assert!(truth.values.iter().flatten().all(|v| *v == 0.0));
        // prior CVaR at β = 0.05 is about 14.6, below α = 30
        let cost = export_field(&s, FieldKind::Cost, 1.0, None).unwrap();
        assert!(cost.values.iter().flatten().all(|v| *v == 1.0));
        let csv = truth.to_csv();
        assert!(csv.starts_with("y\\x,0,1,2,"));
        assert_eq!(csv.lines().count(), 22);
    }
}
