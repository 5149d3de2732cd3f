use proptest::prelude::*;

use riskplan::gp::Dataset;
use riskplan::graph::edge_cost;
use riskplan::smooth::{optimize, FactorGraphProblem, FactorWeights, Objective, OptimizerSettings};
use riskplan::world::{HazardSource, Obstacle};
use riskplan::{GpModel, Kernel, RiskConstraint, RiskMetric, State, Trajectory, World, WorldConfig};

fn point() -> impl Strategy<Value = (f64, f64)> {
    (0.5..19.5f64, 0.5..19.5f64)
}

fn model_from(obs: &[((f64, f64), f64)]) -> GpModel {
    let mut data = Dataset::empty(0.5);
    for ((x, y), z) in obs {
        data.points.push(vec![*x, *y]);
        data.values.push(*z);
    }
    GpModel::from_dataset(Kernel::default_2d(), data).unwrap()
}

fn observations() -> impl Strategy<Value = Vec<((f64, f64), f64)>> {
    prop::collection::vec((point(), 0.0..80.0f64), 0..25)
}

fn metric() -> impl Strategy<Value = RiskMetric> {
    prop_oneof![
        Just(RiskMetric::expected()),
        (0.01..0.5f64).prop_map(|b| RiskMetric::var(b).unwrap()),
        (0.01..0.5f64).prop_map(|b| RiskMetric::cvar(b).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn cost_is_at_least_one_and_flat_when_satisfied(
        obs in observations(), m in metric(), alpha in 5.0..60.0f64, gamma in 0.01..1.0f64, x in point(),
    ) {
        let model = model_from(&obs);
        let c = RiskConstraint::new(m, alpha, gamma).unwrap();
        let p = [x.0, x.1];
        let f = c.cost(&model, &p).unwrap().value;
        let phi = c.phi(&model, &p).unwrap();
        prop_assert!(f >= 1.0);
        prop_assert_eq!(f == 1.0, phi >= 0.0);
        let g = c.cost_gradient(&model, &p).unwrap();
        if phi >= 0.0 {
            prop_assert!(g.iter().all(|v| *v == 0.0));
        }
        prop_assert!(g.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn edge_cost_bounds_length_and_is_symmetric(obs in observations(), a in point(), b in point()) {
        let model = model_from(&obs);
        let c = RiskConstraint::new(RiskMetric::cvar(0.05).unwrap(), 30.0, 0.1).unwrap();
        let (sa, sb) = (State::new(a.0, a.1), State::new(b.0, b.1));
        let ab = edge_cost(&c, &model, &sa, &sb, 0.1).unwrap();
        let ba = edge_cost(&c, &model, &sb, &sa, 0.1).unwrap();
        prop_assert!(ab >= (sb - sa).norm() - 1e-12);
        prop_assert!((ab - ba).abs() <= 1e-9 * ab.max(1.0));
    }

    #[test]
    fn posterior_variance_stays_within_prior(obs in observations(), x in point()) {
        let model = model_from(&obs);
        let b = model.posterior(&[x.0, x.1]).unwrap();
        prop_assert!(b.variance >= 0.0);
        prop_assert!(b.variance <= Kernel::default_2d().signal_variance() + 1e-9);
    }

    #[test]
    fn distance_field_agrees_with_obstacles(
        cx in 3.0..17.0f64, cy in 3.0..17.0f64, r in 0.5..2.5f64, x in point(),
    ) {
        let world = World::build(WorldConfig {
            obstacles: vec![Obstacle::Circle { center: [cx, cy], radius: r }],
            ..WorldConfig::default()
        }).unwrap();
        let p = State::new(x.0, x.1);
        let exact = (p - State::new(cx, cy)).norm() - r;
        // bounds act as walls too
        let to_wall = x.0.min(x.1).min(20.0 - x.0).min(20.0 - x.1);
        prop_assert!((world.exact_signed_distance(&p) - exact.min(to_wall)).abs() < 1e-9);
        prop_assert!((world.signed_distance(&p) - world.exact_signed_distance(&p)).abs() < 0.1);
        prop_assert_eq!(world.is_free(&p), world.exact_signed_distance(&p) > 0.0);
    }

    #[test]
    fn hazard_is_nonnegative_and_bounded_by_gains(
        sources in prop::collection::vec((point(), 1.0..100.0f64, 0.0..1.0f64), 0..4), x in point(),
    ) {
        let total: f64 = sources.iter().map(|s| s.1).sum();
        let world = World::build(WorldConfig {
            sources: sources.iter().map(|((cx, cy), k, tau)| HazardSource {
                center: [*cx, *cy], gain: *k, tau: *tau, decay: [1.1, 0.9],
            }).collect(),
            ..WorldConfig::default()
        }).unwrap();
        let h = world.hazard(&State::new(x.0, x.1));
        prop_assert!(h >= 0.0 && h <= total + 1e-9);
    }

    #[test]
    fn respacing_keeps_endpoints_and_shortens(
        pts in prop::collection::vec(point(), 2..8), count in 2usize..60,
    ) {
        let t = Trajectory::new(pts.iter().map(|p| State::new(p.0, p.1)).collect()).unwrap();
        let r = t.respace_count(count);
        prop_assert_eq!(r.len(), count);
        prop_assert!((r.start() - t.start()).norm() < 1e-12);
        prop_assert!((r.end() - t.end()).norm() < 1e-12);
        prop_assert!(r.length() <= t.length() + 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn optimizer_never_raises_cost_or_moves_anchors(
        obs in observations(), wiggle in prop::collection::vec((-1.5..1.5f64, -1.5..1.5f64), 8),
    ) {
        let world = World::build(WorldConfig {
            obstacles: vec![Obstacle::Circle { center: [10.0, 10.0], radius: 1.5 }],
            ..WorldConfig::default()
        }).unwrap();
        let model = model_from(&obs);
        let c = RiskConstraint::new(RiskMetric::cvar(0.05).unwrap(), 30.0, 0.1).unwrap();
        let weights = FactorWeights::default();
        let (a, b) = (State::new(2.0, 3.0), State::new(18.0, 16.0));
        let n = wiggle.len() + 2;
        let pts: Vec<State> = (0..n).map(|i| {
            let base = a + (b - a) * (i as f64 / (n - 1) as f64);
            if i == 0 || i == n - 1 { base } else { base + State::new(wiggle[i - 1].0, wiggle[i - 1].1) }
        }).collect();
        let mut p = FactorGraphProblem::new(&Trajectory::new(pts).unwrap(), &weights, false).unwrap();
        let obj = Objective { world: &world, model: &model, constraint: &c, weights: &weights };
        let rep = optimize(&mut p, &obj, &OptimizerSettings::default()).unwrap();
        prop_assert!(rep.is_monotone());
        prop_assert!(rep.final_cost <= rep.initial_cost);
        prop_assert_eq!(p.positions()[0], a);
        prop_assert_eq!(p.positions()[n - 1], b);
    }
}
