//! Collision-free seed trajectories for the optimizer.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::trajectory::Trajectory;
use crate::world::{State, World};

/// Clearances tried in turn by the grid search; the first that admits a path
/// wins.
const CLEARANCES: [f64; 3] = [0.5, 0.25, 0.0];

/// Straight line if it is collision-free, otherwise a shortest 8-connected
/// path over the free nodes of the world's distance grid, shortcut and
/// respaced to `support_states` waypoints.
pub fn initial_trajectory(start: State, goal: State, world: &World, support_states: usize) -> Result<Trajectory> {
    for (name, x) in [("start", &start), ("goal", &goal)] {
        if !world.is_free(x) {
            return Err(Error::InvalidInput(format!("{name} {x:?} is not in free space")));
        }
    }
    if start == goal {
        return Ok(Trajectory::stationary(start));
    }
    let m = support_states.max(2);
    if world.collision_free(&start, &goal) {
        return Ok(Trajectory::new(vec![start, goal])?.respace_count(m));
    }
    for clearance in CLEARANCES {
        let clearance = clearance.min(world.exact_signed_distance(&start)).min(world.exact_signed_distance(&goal));
        if let Some(path) = grid_search(world, start, goal, clearance) {
            let path = shortcut(world, path, clearance);
            return Ok(Trajectory::new(path)?.respace_count(m));
        }
    }
    Err(Error::NoSolution(format!("no collision-free path from {start:?} to {goal:?}")))
}

/// Segment check against the exact distance with a clearance margin.
fn segment_clear(world: &World, a: &State, b: &State, clearance: f64) -> bool {
    let step = 0.5 * world.sdf().max_cell();
    let n = ((b - a).norm() / step).ceil().max(1.0) as usize;
    (0..=n).all(|k| {
        let x = a + (b - a) * (k as f64 / n as f64);
        world.is_free(&x) && world.exact_signed_distance(&x) >= clearance
    })
}

fn grid_search(world: &World, start: State, goal: State, clearance: f64) -> Option<Vec<State>> {
    let sdf = world.sdf();
    let (nx, ny) = (sdf.nx, sdf.ny);
    let index = |i: usize, j: usize| j * nx + i;
    let free = |i: usize, j: usize| sdf.value(i, j) >= clearance && world.is_free(&sdf.node(i, j));
    let nearest = |x: &State| {
        let mut best: Option<(f64, usize, usize)> = None;
        let ci = ((x[0] - sdf.origin[0]) / sdf.cell_size[0]).round() as isize;
        let cj = ((x[1] - sdf.origin[1]) / sdf.cell_size[1]).round() as isize;
        for di in -3..=3 {
            for dj in -3..=3 {
                let (i, j) = (ci + di, cj + dj);
                if i < 0 || j < 0 || i >= nx as isize || j >= ny as isize {
                    continue;
                }
                let (i, j) = (i as usize, j as usize);
                let d = (sdf.node(i, j) - x).norm();
                if free(i, j) && segment_clear(world, x, &sdf.node(i, j), 0.0) && best.is_none_or(|b| d < b.0) {
                    best = Some((d, i, j));
                }
            }
        }
        best.map(|(_, i, j)| (i, j))
    };
    let s = nearest(&start)?;
    let g = nearest(&goal)?;

    let n = nx * ny;
    let mut dist = vec![f64::INFINITY; n];
    let mut parent = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    let h = |i: usize, j: usize| (sdf.node(i, j) - sdf.node(g.0, g.1)).norm();
    let mut open = BinaryHeap::new();
    dist[index(s.0, s.1)] = 0.0;
    open.push(Reverse((Ordered(h(s.0, s.1)), index(s.0, s.1))));
    while let Some(Reverse((_, u))) = open.pop() {
        if closed[u] {
            continue;
        }
        closed[u] = true;
        if u == index(g.0, g.1) {
            break;
        }
        let (ui, uj) = (u % nx, u / nx);
        for (di, dj) in [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)] {
            let (vi, vj) = (ui as isize + di, uj as isize + dj);
            if vi < 0 || vj < 0 || vi >= nx as isize || vj >= ny as isize {
                continue;
            }
            let (vi, vj) = (vi as usize, vj as usize);
            let v = index(vi, vj);
            if closed[v] || !free(vi, vj) {
                continue;
            }
            // no diagonal moves squeezing between two blocked nodes
            if di != 0 && dj != 0 && !(free(vi, uj) && free(ui, vj)) {
                continue;
            }
            let nd = dist[u] + (sdf.node(vi, vj) - sdf.node(ui, uj)).norm();
            if nd < dist[v] {
                dist[v] = nd;
                parent[v] = u;
                open.push(Reverse((Ordered(nd + h(vi, vj)), v)));
            }
        }
    }
    let target = index(g.0, g.1);
    if !closed[target] {
        return None;
    }
    let mut nodes = vec![target];
    while *nodes.last().unwrap() != index(s.0, s.1) {
        nodes.push(parent[*nodes.last().unwrap()]);
    }
    nodes.reverse();
    let mut path = vec![start];
    path.extend(nodes.iter().map(|&u| sdf.node(u % nx, u / nx)));
    path.push(goal);
    path.dedup();
    Some(path)
}

/// Greedy line-of-sight shortcutting.
fn shortcut(world: &World, path: Vec<State>, clearance: f64) -> Vec<State> {
    let mut out = vec![path[0]];
    let mut i = 0;
    while i + 1 < path.len() {
        let mut j = path.len() - 1;
        while j > i + 1 {
            let margin = if j == path.len() - 1 || i == 0 { 0.0 } else { clearance };
            if segment_clear(world, &path[i], &path[j], margin) {
                break;
            }
            j -= 1;
        }
        out.push(path[j]);
        i = j;
    }
    out
}

/// Total order on finite floats for the open list.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Ordered(f64);

impl Eq for Ordered {}

impl PartialOrd for Ordered {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Ordered {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}
