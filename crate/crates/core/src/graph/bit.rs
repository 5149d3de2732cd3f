//! Batch-informed anytime search over a random geometric graph.
//!
//! Samples arrive in batches. A vertex queue and an edge queue, both ordered
//! by admissible estimates of total solution cost, drive the search; true
//! edge costs (collision check plus the line integral of the risk cost) are
//! only computed for edges that could still improve the incumbent. After a
//! solution exists, new samples are drawn from the informed ellipse.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::time::Instant;

use rand::Rng;

use crate::constraint::RiskConstraint;
use crate::error::{Error, Result};
use crate::gp::GpModel;
use crate::trajectory::{GoalRegion, Trajectory};
use crate::world::{State, World};

use super::{edge_cost, heuristic, Budget, GraphPlannerConfig};

#[derive(Debug, Clone, Copy)]
struct Keyed<T> {
    key: f64,
    seq: u64,
    item: T,
}

impl<T> PartialEq for Keyed<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<T> Eq for Keyed<T> {}

impl<T> PartialOrd for Keyed<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<T> Ord for Keyed<T> {
    // min-heap on key, FIFO on ties
    fn cmp(&self, other: &Self) -> Ordering {
        other.key.total_cmp(&self.key).then_with(|| other.seq.cmp(&self.seq))
    }
}

#[derive(Debug, Clone)]
struct Node {
    x: State,
    cost_to_come: f64,
    parent: Option<usize>,
    children: Vec<usize>,
    in_tree: bool,
    pruned: bool,
}

/// Outcome of one planning call.
#[derive(Debug, Clone)]
pub struct PlanResult {
    pub trajectory: Trajectory,
    pub cost: f64,
    pub batches: usize,
    pub edges_evaluated: usize,
    /// Incumbent cost after every improvement, in order.
    pub incumbent_history: Vec<f64>,
}

pub(super) struct Search<'a, R: Rng + ?Sized> {
    world: &'a World,
    model: &'a GpModel,
    constraint: &'a RiskConstraint,
    cfg: &'a GraphPlannerConfig,
    goal: GoalRegion,
    start: State,
    rng: &'a mut R,
    nodes: Vec<Node>,
    vertex_queue: BinaryHeap<Keyed<usize>>,
    edge_queue: BinaryHeap<Keyed<(usize, usize)>>,
    seq: u64,
    radius: f64,
    best_cost: f64,
    best_goal: Option<usize>,
    edge_cache: HashMap<(usize, usize), Option<f64>>,
    free_area: f64,
    history: Vec<f64>,
    edges_evaluated: usize,
}

impl<'a, R: Rng + ?Sized> Search<'a, R> {
    pub(super) fn new(
        world: &'a World,
        model: &'a GpModel,
        constraint: &'a RiskConstraint,
        cfg: &'a GraphPlannerConfig,
        start: State,
        goal: GoalRegion,
        rng: &'a mut R,
    ) -> Self {
        let sdf = world.sdf();
        let total = sdf.nx * sdf.ny;
        let free = (0..sdf.ny)
            .flat_map(|j| (0..sdf.nx).map(move |i| (i, j)))
            .filter(|&(i, j)| sdf.value(i, j) >= 0.0)
            .count();
        let free_area = world.bounds().area() * free as f64 / total as f64;
        let mut search = Self {
            world,
            model,
            constraint,
            cfg,
            goal,
            start,
            rng,
            nodes: Vec::new(),
            vertex_queue: BinaryHeap::new(),
            edge_queue: BinaryHeap::new(),
            seq: 0,
            radius: f64::INFINITY,
            best_cost: f64::INFINITY,
            best_goal: None,
            edge_cache: HashMap::new(),
            free_area,
            history: Vec::new(),
            edges_evaluated: 0,
        };
        search.nodes.push(Node {
            x: start,
            cost_to_come: 0.0,
            parent: None,
            children: Vec::new(),
            in_tree: true,
            pruned: false,
        });
        let goal_center = goal.center();
        if world.is_free(&goal_center) {
            search.add_sample(goal_center);
        }
        search
    }

    fn next_seq(&mut self) -> u64 {
        self.seq += 1;
        self.seq
    }

    fn add_sample(&mut self, x: State) {
        self.nodes.push(Node {
            x,
            cost_to_come: f64::INFINITY,
            parent: None,
            children: Vec::new(),
            in_tree: false,
            pruned: false,
        });
    }

    fn g_hat(&self, x: &State) -> f64 {
        (x - self.start).norm()
    }

    fn h_hat(&self, x: &State) -> f64 {
        heuristic(x, &self.goal)
    }

    fn vertex_key(&self, v: usize) -> f64 {
        self.nodes[v].cost_to_come + self.h_hat(&self.nodes[v].x)
    }

    fn edge_key(&self, v: usize, x: usize) -> f64 {
        let (a, b) = (&self.nodes[v], &self.nodes[x]);
        a.cost_to_come + (b.x - a.x).norm() + self.h_hat(&b.x)
    }

    fn sample_free<F: Fn(&State) -> bool>(&mut self, accept: F) -> Option<State> {
        let b = *self.world.bounds();
        for _ in 0..1000 {
            let x = State::new(
                self.rng.random_range(b.min[0]..=b.max[0]),
                self.rng.random_range(b.min[1]..=b.max[1]),
            );
            if self.world.is_free(&x) && accept(&x) {
                return Some(x);
            }
        }
        None
    }

    /// Uniform sample from the prolate ellipse of states that could improve
    /// the incumbent.
    fn sample_informed(&mut self) -> Option<State> {
        let focus = self.goal.center();
        let c_max = self.best_cost + self.goal_radius();
        let c_min = (focus - self.start).norm();
        let centre = (self.start + focus) * 0.5;
        let a = 0.5 * c_max;
        let b = 0.5 * (c_max * c_max - c_min * c_min).max(0.0).sqrt();
        let dir = if c_min > 0.0 { (focus - self.start) / c_min } else { State::new(1.0, 0.0) };
        for _ in 0..1000 {
            let r = self.rng.random::<f64>().sqrt();
            let t = self.rng.random_range(0.0..std::f64::consts::TAU);
            let (u, v) = (a * r * t.cos(), b * r * t.sin());
            let x = centre + dir * u + State::new(-dir[1], dir[0]) * v;
            if self.world.is_free(&x) && self.g_hat(&x) + self.h_hat(&x) < self.best_cost {
                return Some(x);
            }
        }
        None
    }

    fn goal_radius(&self) -> f64 {
        match self.goal {
            GoalRegion::Circle { radius, .. } => radius,
            GoalRegion::Rect { min, max } => 0.5 * (max[0] - min[0]).hypot(max[1] - min[1]),
        }
    }

    fn new_batch(&mut self) {
        // prune samples that cannot improve the incumbent
        if self.best_cost.is_finite() {
            let best = self.best_cost;
            for i in 0..self.nodes.len() {
                let n = &self.nodes[i];
                if !n.in_tree && !n.pruned && self.g_hat(&n.x) + self.h_hat(&n.x) >= best {
                    self.nodes[i].pruned = true;
                }
            }
        }
        for _ in 0..self.cfg.batch_size {
            let x = if self.best_cost.is_finite() {
                self.sample_informed()
            } else {
                self.sample_free(|_| true)
            };
            if let Some(x) = x {
                self.add_sample(x);
            }
        }
        let q = self.nodes.iter().filter(|n| !n.pruned).count().max(2) as f64;
        let d: f64 = 2.0;
        let zeta = std::f64::consts::PI;
        let gamma = 2.0 * (1.0 + 1.0 / d).powf(1.0 / d) * (self.free_area / zeta).powf(1.0 / d);
        self.radius = self.cfg.rgg_constant * gamma * (q.ln() / q).powf(1.0 / d);
        self.vertex_queue.clear();
        self.edge_queue.clear();
        for v in 0..self.nodes.len() {
            if self.nodes[v].in_tree {
                let key = self.vertex_key(v);
                let seq = self.next_seq();
                self.vertex_queue.push(Keyed { key, seq, item: v });
            }
        }
    }

    fn expand_vertex(&mut self, v: usize) {
        let xv = self.nodes[v].x;
        let gv = self.nodes[v].cost_to_come;
        let ghat_v = self.g_hat(&xv);
        for x in 0..self.nodes.len() {
            if x == v || self.nodes[x].pruned {
                continue;
            }
            let node = &self.nodes[x];
            let dist = (node.x - xv).norm();
            if dist > self.radius {
                continue;
            }
            if node.in_tree {
                // rewiring candidate
                if node.parent == Some(v) || x == 0 {
                    continue;
                }
                if ghat_v + dist + self.h_hat(&node.x) >= self.best_cost || gv + dist >= node.cost_to_come {
                    continue;
                }
            } else if ghat_v + dist + self.h_hat(&node.x) >= self.best_cost {
                continue;
            }
            let key = self.edge_key(v, x);
            let seq = self.next_seq();
            self.edge_queue.push(Keyed { key, seq, item: (v, x) });
        }
    }

    fn true_edge_cost(&mut self, v: usize, x: usize) -> Result<Option<f64>> {
        let key = if v < x { (v, x) } else { (x, v) };
        if let Some(c) = self.edge_cache.get(&key) {
            return Ok(*c);
        }
        let (a, b) = (self.nodes[v].x, self.nodes[x].x);
        let cost = if self.world.collision_free(&a, &b) {
            self.edges_evaluated += 1;
            Some(edge_cost(self.constraint, self.model, &a, &b, self.cfg.quadrature_step)?)
        } else {
            None
        };
        self.edge_cache.insert(key, cost);
        Ok(cost)
    }

    fn propagate(&mut self, root: usize) {
        let mut stack = vec![root];
        while let Some(v) = stack.pop() {
            let children = self.nodes[v].children.clone();
            for c in children {
                let delta = self.nodes[v].cost_to_come
                    + self.true_edge_cost(v, c).ok().flatten().unwrap_or(f64::INFINITY);
                self.nodes[c].cost_to_come = delta;
                stack.push(c);
            }
        }
    }

    fn connect(&mut self, v: usize, x: usize, cost: f64) {
        if let Some(old) = self.nodes[x].parent {
            self.nodes[old].children.retain(|&c| c != x);
        }
        let was_in_tree = self.nodes[x].in_tree;
        self.nodes[x].parent = Some(v);
        self.nodes[x].cost_to_come = self.nodes[v].cost_to_come + cost;
        self.nodes[x].in_tree = true;
        self.nodes[v].children.push(x);
        if was_in_tree {
            self.propagate(x);
        } else {
            let key = self.vertex_key(x);
            let seq = self.next_seq();
            self.vertex_queue.push(Keyed { key, seq, item: x });
        }
        self.refresh_incumbent();
    }

    fn refresh_incumbent(&mut self) {
        let mut best = (self.best_cost, self.best_goal);
        for (i, n) in self.nodes.iter().enumerate() {
            if n.in_tree && n.cost_to_come < best.0 && self.goal.contains(&n.x) {
                best = (n.cost_to_come, Some(i));
            }
        }
        if best.0 < self.best_cost {
            self.best_cost = best.0;
            self.best_goal = best.1;
            self.history.push(best.0);
        }
    }

    fn budget_exhausted(&self, batches: usize, started: &Instant) -> bool {
        match self.cfg.budget {
            Budget::Batches { count } => batches >= count,
            Budget::WallClock { seconds } => started.elapsed().as_secs_f64() >= seconds,
        }
    }

    pub(super) fn run(mut self) -> Result<PlanResult> {
        let started = Instant::now();
        let mut batches = 0usize;
        let mut batch_open = false;
        loop {
            if !batch_open || (self.edge_queue.is_empty() && self.vertex_queue.is_empty()) {
                if batch_open {
                    batches += 1;
                }
                if self.budget_exhausted(batches, &started) {
                    break;
                }
                self.new_batch();
                batch_open = true;
            }
            if matches!(self.cfg.budget, Budget::WallClock { .. }) && self.budget_exhausted(batches, &started) {
                break;
            }
            while let Some(top) = self.vertex_queue.peek() {
                let edge_best = self.edge_queue.peek().map_or(f64::INFINITY, |e| e.key);
                if top.key > edge_best {
                    break;
                }
                let v = self.vertex_queue.pop().unwrap().item;
                self.expand_vertex(v);
            }
            let Some(edge) = self.edge_queue.pop() else {
                continue;
            };
            let (v, x) = edge.item;
            let gv = self.nodes[v].cost_to_come;
            let straight = (self.nodes[x].x - self.nodes[v].x).norm();
            let hx = self.h_hat(&self.nodes[x].x);
            if gv + straight + hx >= self.best_cost {
                // nothing left in this batch can improve the incumbent
                self.edge_queue.clear();
                self.vertex_queue.clear();
                continue;
            }
            if gv + straight >= self.nodes[x].cost_to_come {
                continue;
            }
            // a rewire must not create a cycle
            if self.nodes[x].in_tree && self.is_ancestor(x, v) {
                continue;
            }
            let Some(cost) = self.true_edge_cost(v, x)? else {
                continue;
            };
            if gv + cost + hx < self.best_cost && gv + cost < self.nodes[x].cost_to_come {
                self.connect(v, x, cost);
            }
        }
        self.finish(batches)
    }

    fn is_ancestor(&self, a: usize, mut v: usize) -> bool {
        loop {
            if v == a {
                return true;
            }
            match self.nodes[v].parent {
                Some(p) => v = p,
                None => return false,
            }
        }
    }

    fn finish(self, batches: usize) -> Result<PlanResult> {
        let Some(goal) = self.best_goal else {
            return Err(Error::NoSolution(format!("no path found after {batches} batches")));
        };
        let mut path = vec![self.nodes[goal].x];
        let mut v = goal;
        while let Some(p) = self.nodes[v].parent {
            path.push(self.nodes[p].x);
            v = p;
        }
        path.reverse();
        if path.len() == 1 {
            path.push(path[0]);
        }
        Ok(PlanResult {
            trajectory: Trajectory::new(path)?,
            cost: self.best_cost,
            batches,
            edges_evaluated: self.edges_evaluated,
            incumbent_history: self.history,
        })
    }
}
