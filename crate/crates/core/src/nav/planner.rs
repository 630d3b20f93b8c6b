use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::ops::Add;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{apply_action, Action, AgentState, FORWARD_STEP_M};
use crate::geometry::{bearing, normalize_degrees, GridCoord};
use crate::index::Mask;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("start cell {0:?} is outside the map")]
    StartOutOfBounds(GridCoord),
    #[error("goal cell {0:?} is outside the map")]
    GoalOutOfBounds(GridCoord),
    #[error("start cell {0:?} is blocked")]
    StartBlocked(GridCoord),
    #[error("no free cell within {radius} cells of blocked goal {goal:?}")]
    NoFreeGoal { goal: GridCoord, radius: usize },
    #[error("no path from {start:?} to {goal:?}")]
    NoPath { start: GridCoord, goal: GridCoord },
}

/// Exact path cost `straight + diagonal * sqrt(2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Cost {
    pub straight: u32,
    pub diagonal: u32,
}

impl Cost {
    pub const ZERO: Cost = Cost { straight: 0, diagonal: 0 };
    pub const STRAIGHT: Cost = Cost { straight: 1, diagonal: 0 };
    pub const DIAGONAL: Cost = Cost { straight: 0, diagonal: 1 };

    pub fn value(&self) -> f64 {
        self.straight as f64 + self.diagonal as f64 * std::f64::consts::SQRT_2
    }

    /// Octile distance between two cells.
    pub fn octile(a: GridCoord, b: GridCoord) -> Cost {
        let dx = a.px.abs_diff(b.px) as u32;
        let dy = a.py.abs_diff(b.py) as u32;
        Cost { straight: dx.max(dy) - dx.min(dy), diagonal: dx.min(dy) }
    }
}

impl Add for Cost {
    type Output = Cost;

    fn add(self, o: Cost) -> Cost {
        Cost { straight: self.straight + o.straight, diagonal: self.diagonal + o.diagonal }
    }
}

impl Ord for Cost {
    fn cmp(&self, other: &Self) -> Ordering {
        // compare da with db * sqrt(2), exactly
        let da = self.straight as i64 - other.straight as i64;
        let db = other.diagonal as i64 - self.diagonal as i64;
        match (da.signum(), db.signum()) {
            (0, 0) => Ordering::Equal,
            (a, b) if a >= 0 && b <= 0 => Ordering::Greater,
            (a, b) if a <= 0 && b >= 0 => Ordering::Less,
            (1, 1) => (da * da).cmp(&(2 * db * db)),
            _ => (2 * db * db).cmp(&(da * da)),
        }
    }
}

impl PartialOrd for Cost {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlannerOptions {
    /// A blocked goal is moved to the nearest free cell within this many cells.
    pub retarget_radius: usize,
}

impl Default for PlannerOptions {
    fn default() -> Self {
        Self { retarget_radius: 20 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub cells: Vec<GridCoord>,
    pub cost: Cost,
    /// The cell actually planned to, after retargeting.
    pub goal: GridCoord,
}

impl Path {
    pub fn length_m(&self, scale: f64) -> f64 {
        self.cost.value() * scale
    }
}

const STEPS: [(i64, i64); 8] = [(-1, 0), (0, -1), (0, 1), (1, 0), (-1, -1), (-1, 1), (1, -1), (1, 1)];

fn free(blocked: &Mask, px: i64, py: i64) -> bool {
    px >= 0 && py >= 0 && (px as usize) < blocked.rows && (py as usize) < blocked.cols && !blocked.data[px as usize * blocked.cols + py as usize]
}

/// Free 8-neighbors with step costs. Diagonal moves need both adjacent
/// orthogonal cells free, so paths never squeeze between touching corners.
fn neighbors(blocked: &Mask, c: GridCoord) -> impl Iterator<Item = (GridCoord, Cost)> + '_ {
    let (x, y) = (c.px as i64, c.py as i64);
    STEPS.iter().filter_map(move |&(dx, dy)| {
        let (nx, ny) = (x + dx, y + dy);
        if !free(blocked, nx, ny) {
            return None;
        }
        if dx != 0 && dy != 0 {
            if !free(blocked, x + dx, y) || !free(blocked, x, y + dy) {
                return None;
            }
            return Some((GridCoord::new(nx as usize, ny as usize), Cost::DIAGONAL));
        }
        Some((GridCoord::new(nx as usize, ny as usize), Cost::STRAIGHT))
    })
}

/// Nearest free cell within Euclidean `radius` of `c`, row-major on ties.
pub fn nearest_free(blocked: &Mask, c: GridCoord, radius: usize) -> Option<GridCoord> {
    let r = radius as i64;
    let mut best: Option<(i64, GridCoord)> = None;
    for dx in -r..=r {
        for dy in -r..=r {
            let d2 = dx * dx + dy * dy;
            if d2 > r * r {
                continue;
            }
            let (x, y) = (c.px as i64 + dx, c.py as i64 + dy);
            if !free(blocked, x, y) {
                continue;
            }
            let cand = GridCoord::new(x as usize, y as usize);
            if best.is_none_or(|(bd, bc)| d2 < bd || (d2 == bd && cand < bc)) {
                best = Some((d2, cand));
            }
        }
    }
    best.map(|(_, c)| c)
}

#[derive(PartialEq, Eq)]
struct Entry {
    f: Cost,
    h: Cost,
    index: usize,
}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap is a max-heap: smallest (f, h, index) first
        (other.f, other.h, other.index).cmp(&(self.f, self.h, self.index))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn check_bounds(blocked: &Mask, start: GridCoord, goal: GridCoord) -> Result<(), PlanError> {
    if start.px >= blocked.rows || start.py >= blocked.cols {
        return Err(PlanError::StartOutOfBounds(start));
    }
    if goal.px >= blocked.rows || goal.py >= blocked.cols {
        return Err(PlanError::GoalOutOfBounds(goal));
    }
    if blocked.get(start) {
        return Err(PlanError::StartBlocked(start));
    }
    Ok(())
}

fn reconstruct(parent: &[usize], cols: usize, goal: usize) -> Vec<GridCoord> {
    let mut cells = vec![GridCoord::new(goal / cols, goal % cols)];
    let mut i = goal;
    while parent[i] != usize::MAX {
        i = parent[i];
        cells.push(GridCoord::new(i / cols, i % cols));
    }
    cells.reverse();
    cells
}

/// A* over 8-connected free cells with the octile heuristic. Costs are exact;
/// expansion order is by `(f, h, row-major index)`.
pub fn plan_path(blocked: &Mask, start: GridCoord, goal: GridCoord, opts: &PlannerOptions) -> Result<Path, PlanError> {
    check_bounds(blocked, start, goal)?;
    let goal = if blocked.get(goal) {
        nearest_free(blocked, goal, opts.retarget_radius)
            .ok_or(PlanError::NoFreeGoal { goal, radius: opts.retarget_radius })?
    } else {
        goal
    };
    let cols = blocked.cols;
    let n = blocked.rows * cols;
    let mut g: Vec<Option<Cost>> = vec![None; n];
    let mut parent = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    let si = start.px * cols + start.py;
    let gi = goal.px * cols + goal.py;
    g[si] = Some(Cost::ZERO);
    let h0 = Cost::octile(start, goal);
    let mut open = BinaryHeap::from([Entry { f: h0, h: h0, index: si }]);
    while let Some(Entry { index, .. }) = open.pop() {
        if closed[index] {
            continue;
        }
        closed[index] = true;
        if index == gi {
            return Ok(Path { cells: reconstruct(&parent, cols, gi), cost: g[gi].unwrap(), goal });
        }
        let c = GridCoord::new(index / cols, index % cols);
        let gc = g[index].unwrap();
        for (nb, step) in neighbors(blocked, c) {
            let j = nb.px * cols + nb.py;
            if closed[j] {
                continue;
            }
            let ng = gc + step;
            if g[j].is_none_or(|old| ng < old) {
                g[j] = Some(ng);
                parent[j] = index;
                let h = Cost::octile(nb, goal);
                open.push(Entry { f: ng + h, h, index: j });
            }
        }
    }
    Err(PlanError::NoPath { start, goal })
}

/// Cheapest path from `start` to whichever of `goals` is reached first
/// (Dijkstra; ties by row-major index).
pub fn plan_to_any(blocked: &Mask, start: GridCoord, goals: &[GridCoord]) -> Result<Path, PlanError> {
    let first = *goals.first().ok_or(PlanError::NoPath { start, goal: start })?;
    check_bounds(blocked, start, first)?;
    let cols = blocked.cols;
    let n = blocked.rows * cols;
    let mut is_goal = vec![false; n];
    for g in goals {
        if g.px < blocked.rows && g.py < cols && !blocked.get(*g) {
            is_goal[g.px * cols + g.py] = true;
        }
    }
    let mut g: Vec<Option<Cost>> = vec![None; n];
    let mut parent = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    let si = start.px * cols + start.py;
    g[si] = Some(Cost::ZERO);
    let mut open = BinaryHeap::from([Entry { f: Cost::ZERO, h: Cost::ZERO, index: si }]);
    while let Some(Entry { index, .. }) = open.pop() {
        if closed[index] {
            continue;
        }
        closed[index] = true;
        if is_goal[index] {
            let goal = GridCoord::new(index / cols, index % cols);
            return Ok(Path { cells: reconstruct(&parent, cols, index), cost: g[index].unwrap(), goal });
        }
        let gc = g[index].unwrap();
        for (nb, step) in neighbors(blocked, GridCoord::new(index / cols, index % cols)) {
            let j = nb.px * cols + nb.py;
            let ng = gc + step;
            if !closed[j] && g[j].is_none_or(|old| ng < old) {
                g[j] = Some(ng);
                parent[j] = index;
                open.push(Entry { f: ng, h: Cost::ZERO, index: j });
            }
        }
    }
    Err(PlanError::NoPath { start, goal: first })
}

/// Exact 8-connected path costs from every source to all reachable free cells.
pub fn dijkstra_distances(blocked: &Mask, sources: &[GridCoord]) -> Vec<Option<Cost>> {
    let cols = blocked.cols;
    let n = blocked.rows * cols;
    let mut g: Vec<Option<Cost>> = vec![None; n];
    let mut closed = vec![false; n];
    let mut open = BinaryHeap::new();
    for s in sources {
        if s.px < blocked.rows && s.py < cols && !blocked.get(*s) {
            let i = s.px * cols + s.py;
            g[i] = Some(Cost::ZERO);
            open.push(Entry { f: Cost::ZERO, h: Cost::ZERO, index: i });
        }
    }
    while let Some(Entry { index, .. }) = open.pop() {
        if closed[index] {
            continue;
        }
        closed[index] = true;
        let gc = g[index].unwrap();
        for (nb, step) in neighbors(blocked, GridCoord::new(index / cols, index % cols)) {
            let j = nb.px * cols + nb.py;
            let ng = gc + step;
            if !closed[j] && g[j].is_none_or(|old| ng < old) {
                g[j] = Some(ng);
                open.push(Entry { f: ng, h: Cost::ZERO, index: j });
            }
        }
    }
    g
}

/// Legs of at most `max_leg` cells between direction changes of the path.
fn key_waypoints(cells: &[GridCoord], max_leg: usize) -> Vec<GridCoord> {
    let mut out = Vec::new();
    let dir = |a: GridCoord, b: GridCoord| (b.px as i64 - a.px as i64, b.py as i64 - a.py as i64);
    let mut leg = 0;
    for i in 1..cells.len() {
        leg += 1;
        let last = i + 1 == cells.len();
        if last || dir(cells[i - 1], cells[i]) != dir(cells[i], cells[i + 1]) || leg >= max_leg {
            out.push(cells[i]);
            leg = 0;
        }
    }
    out
}

/// Turn and forward actions that drive a noise-free agent along `path`.
///
/// Each leg is aimed from the agent's predicted position, so rounding of the
/// integer turn and step quanta does not accumulate across legs.
pub fn motion_actions(path: &Path, state: AgentState, scale: f64) -> Vec<Action> {
    let max_leg = ((1.0 / scale).round() as usize).max(1);
    let mut actions = Vec::new();
    let mut s = state;
    for w in key_waypoints(&path.cells, max_leg) {
        steer_towards(&mut s, w.px as f64, w.py as f64, scale, &mut actions);
    }
    actions
}

/// Appends the turns and forward steps that take `s` to `(px, py)` and
/// advances `s` accordingly.
pub(crate) fn steer_towards(s: &mut AgentState, px: f64, py: f64, scale: f64, actions: &mut Vec<Action>) {
    let dist_m = s.distance_to(px, py) * scale;
    let steps = (dist_m / FORWARD_STEP_M).round() as usize;
    if steps == 0 {
        return;
    }
    turn_towards(s, bearing(px - s.px, py - s.py), scale, actions);
    for _ in 0..steps {
        *s = apply_action(*s, Action::Forward, scale);
        actions.push(Action::Forward);
    }
}

/// Appends the shortest integer-degree rotation to `target` (ties turn right).
pub(crate) fn turn_towards(s: &mut AgentState, target: f64, scale: f64, actions: &mut Vec<Action>) {
    let delta = normalize_degrees(target - s.heading);
    let n = delta.abs().round() as usize;
    let a = if delta > 0.0 { Action::TurnRight } else { Action::TurnLeft };
    for _ in 0..n {
        *s = apply_action(*s, a, scale);
        actions.push(a);
    }
}

/// [`motion_actions`] followed by `Stop`.
pub fn path_to_actions(path: &Path, state: AgentState, scale: f64) -> Vec<Action> {
    let mut actions = motion_actions(path, state, scale);
    actions.push(Action::Stop);
    actions
}
