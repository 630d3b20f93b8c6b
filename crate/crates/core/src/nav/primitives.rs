use std::collections::{HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::planner::{motion_actions, nearest_free, plan_path, plan_to_any, steer_towards, turn_towards, PlanError, PlannerOptions};
use super::{apply_action, Action, AgentState, Body, FORWARD_STEP_M};
use crate::embedding::LabelSet;
use crate::geometry::{heading_vector, GridCoord, GridSpec};
use crate::index::{find_components, landmark_mask, nearest_component, GoalCell, LandmarkComponent, Mask, SegmentationResult};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NavError {
    #[error("unknown primitive {0:?}")]
    UnknownPrimitive(String),
    #[error("{primitive} takes {expected} argument(s), got {found}")]
    Arity { primitive: &'static str, expected: usize, found: usize },
    #[error("{primitive}: argument {index} must be {expected}")]
    ArgumentType { primitive: &'static str, index: usize, expected: &'static str },
    #[error("{primitive}: {reason}")]
    InvalidArgument { primitive: &'static str, reason: String },
    #[error("landmark {0:?} not found in the map")]
    LandmarkNotFound(String),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error("action budget of {0} exhausted")]
    BudgetExhausted(usize),
}

/// What a primitive argument may be.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArgKind {
    /// A landmark name.
    Object,
    Number,
    /// A position from `get_pos`, or a landmark name.
    Target,
}

impl ArgKind {
    pub fn describe(&self) -> &'static str {
        match self {
            ArgKind::Object => "an object name",
            ArgKind::Number => "a number",
            ArgKind::Target => "a position or an object name",
        }
    }

    pub fn accepts(&self, v: &PrimitiveValue) -> bool {
        matches!(
            (self, v),
            (ArgKind::Object, PrimitiveValue::Text(_))
                | (ArgKind::Number, PrimitiveValue::Number(_))
                | (ArgKind::Target, PrimitiveValue::Text(_) | PrimitiveValue::Position(_))
        )
    }
}

macro_rules! primitive_kinds {
    ($($variant:ident => $name:literal [$($arg:ident),*] $returns:literal),* $(,)?) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
        #[serde(rename_all = "snake_case")]
        pub enum PrimitiveKind {
            $($variant),*
        }

        impl PrimitiveKind {
            pub const ALL: &'static [PrimitiveKind] = &[$(PrimitiveKind::$variant),*];

            pub fn name(&self) -> &'static str {
                match self {
                    $(PrimitiveKind::$variant => $name),*
                }
            }

            pub fn params(&self) -> &'static [ArgKind] {
                match self {
                    $(PrimitiveKind::$variant => &[$(ArgKind::$arg),*]),*
                }
            }

            /// Whether the primitive yields a value that can be bound to a variable.
            pub fn returns_value(&self) -> bool {
                match self {
                    $(PrimitiveKind::$variant => $returns),*
                }
            }
        }
    };
}

primitive_kinds! {
    MoveTo => "move_to" [Target] false,
    MoveToLeft => "move_to_left" [Object] false,
    MoveToRight => "move_to_right" [Object] false,
    GetPos => "get_pos" [Object] true,
    GetContour => "get_contour" [Object] true,
    WithObjectOnLeft => "with_object_on_left" [Object] false,
    WithObjectOnRight => "with_object_on_right" [Object] false,
    MoveInBetween => "move_in_between" [Object, Object] false,
    Turn => "turn" [Number] false,
    Face => "face" [Object] false,
    TurnAbsolute => "turn_absolute" [Number] false,
    MoveNorth => "move_north" [Object] false,
    MoveSouth => "move_south" [Object] false,
    MoveEast => "move_east" [Object] false,
    MoveWest => "move_west" [Object] false,
    MoveToObject => "move_to_object" [Object] false,
    MoveForward => "move_forward" [Number] false,
}

impl PrimitiveKind {
    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|k| k.name() == name)
    }
}

impl fmt::Display for PrimitiveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "snake_case")]
pub enum PrimitiveValue {
    Text(String),
    Number(f64),
    Position(GridCoord),
    Contour(Vec<GridCoord>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Primitive {
    pub kind: PrimitiveKind,
    pub args: Vec<PrimitiveValue>,
}

impl Primitive {
    pub fn new(kind: PrimitiveKind, args: Vec<PrimitiveValue>) -> Result<Self, NavError> {
        let params = kind.params();
        if params.len() != args.len() {
            return Err(NavError::Arity { primitive: kind.name(), expected: params.len(), found: args.len() });
        }
        for (i, (p, a)) in params.iter().zip(&args).enumerate() {
            if !p.accepts(a) {
                return Err(NavError::ArgumentType { primitive: kind.name(), index: i, expected: p.describe() });
            }
        }
        Ok(Self { kind, args })
    }

    pub fn named(name: &str, args: Vec<PrimitiveValue>) -> Result<Self, NavError> {
        let kind = PrimitiveKind::from_name(name).ok_or_else(|| NavError::UnknownPrimitive(name.to_string()))?;
        Self::new(kind, args)
    }

    fn text(&self, i: usize) -> &str {
        match &self.args[i] {
            PrimitiveValue::Text(s) => s,
            _ => unreachable!("argument types are checked on construction"),
        }
    }

    fn number(&self, i: usize) -> f64 {
        match self.args[i] {
            PrimitiveValue::Number(n) => n,
            _ => unreachable!("argument types are checked on construction"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrimitiveOutcome {
    pub value: Option<PrimitiveValue>,
    pub actions: Vec<Action>,
    pub state: AgentState,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NavConfig {
    /// Distance kept from a landmark's boundary by the side and compass moves.
    pub offset_dist: f64,
    pub goal_cell: GoalCell,
    /// A drive ends once the agent is this many cells from the goal.
    pub goal_tolerance: f64,
    pub max_replans: usize,
    /// Search radius, in cells, for free space around a landmark.
    pub approach_radius: usize,
    pub planner: PlannerOptions,
}

impl Default for NavConfig {
    fn default() -> Self {
        Self {
            offset_dist: 1.0,
            goal_cell: GoalCell::Centroid,
            goal_tolerance: 1.0,
            max_replans: 3,
            approach_radius: 40,
            planner: PlannerOptions::default(),
        }
    }
}

/// Read-only inputs shared by every primitive call of an episode.
#[derive(Debug, Clone, Copy)]
pub struct NavContext<'a> {
    pub grid: GridSpec,
    pub segmentation: &'a SegmentationResult,
    pub labels: &'a LabelSet,
    /// Planning obstacles, already inflated for the body.
    pub obstacles: &'a Mask,
}

/// Executes primitives against a map context, caching landmark components.
pub struct Navigator<'a> {
    ctx: NavContext<'a>,
    config: NavConfig,
    components: HashMap<usize, Vec<LandmarkComponent>>,
}

impl<'a> Navigator<'a> {
    pub fn new(ctx: NavContext<'a>, config: NavConfig) -> Self {
        Self { ctx, config, components: HashMap::new() }
    }

    pub fn context(&self) -> &NavContext<'a> {
        &self.ctx
    }

    pub fn config(&self) -> &NavConfig {
        &self.config
    }

    /// All instances of `name`, in component order.
    pub fn components(&mut self, name: &str) -> Result<&[LandmarkComponent], NavError> {
        let idx = self.ctx.labels.index_of(name).ok_or_else(|| NavError::LandmarkNotFound(name.to_string()))?;
        if !self.components.contains_key(&idx) {
            let mask = landmark_mask(self.ctx.segmentation, idx).map_err(|_| NavError::LandmarkNotFound(name.to_string()))?;
            let mut comps = find_components(&mask);
            for c in &mut comps {
                c.label = Some(idx);
            }
            self.components.insert(idx, comps);
        }
        Ok(&self.components[&idx])
    }

    /// The nearest instance in front of the agent, or the nearest one overall
    /// when none is in front.
    pub fn locate(&mut self, name: &str, state: &AgentState) -> Result<LandmarkComponent, NavError> {
        let comps = self.components(name)?;
        nearest_component(comps, state, true)
            .or_else(|| nearest_component(comps, state, false))
            .cloned()
            .ok_or_else(|| NavError::LandmarkNotFound(name.to_string()))
    }

    fn goal_of(&self, comp: &LandmarkComponent, state: &AgentState) -> GridCoord {
        match self.config.goal_cell {
            GoalCell::Centroid => comp.centroid_cell(),
            GoalCell::NearestCell => comp.nearest_cell(state.px, state.py),
        }
    }

    fn clamp(&self, px: f64, py: f64) -> GridCoord {
        let c = |v: f64, n: usize| v.round().clamp(0.0, (n - 1) as f64) as usize;
        GridCoord::new(c(px, self.ctx.grid.rows), c(py, self.ctx.grid.cols))
    }

    pub fn exec(&mut self, prim: &Primitive, body: &mut dyn Body) -> Result<PrimitiveOutcome, NavError> {
        let mut actions = Vec::new();
        let value = self.dispatch(prim, body, &mut actions)?;
        Ok(PrimitiveOutcome { value, actions, state: body.state() })
    }

    fn dispatch(
        &mut self,
        prim: &Primitive,
        body: &mut dyn Body,
        out: &mut Vec<Action>,
    ) -> Result<Option<PrimitiveValue>, NavError> {
        use PrimitiveKind as K;
        let state = body.state();
        let scale = self.ctx.grid.scale;
        match prim.kind {
            K::MoveTo => {
                let goal = match &prim.args[0] {
                    PrimitiveValue::Position(c) => *c,
                    PrimitiveValue::Text(name) => {
                        let comp = self.locate(name, &state)?;
                        self.goal_of(&comp, &state)
                    }
                    _ => unreachable!("argument types are checked on construction"),
                };
                self.drive_to(goal, body, out)?;
            }
            K::MoveToLeft | K::MoveToRight => {
                let comp = self.locate(prim.text(0), &state)?;
                let (cx, cy) = comp.centroid;
                let to_obj = state.bearing_to(cx, cy);
                let side = if prim.kind == K::MoveToLeft { to_obj - 90.0 } else { to_obj + 90.0 };
                let (ux, uy) = heading_vector(side);
                let extent = comp
                    .cells
                    .iter()
                    .map(|c| (c.px as f64 - cx) * ux + (c.py as f64 - cy) * uy)
                    .fold(0.0, f64::max);
                let d = extent + self.config.offset_dist / scale;
                let goal = self.clamp(cx + ux * d, cy + uy * d);
                self.drive_to(goal, body, out)?;
            }
            K::GetPos => {
                let comp = self.locate(prim.text(0), &state)?;
                return Ok(Some(PrimitiveValue::Position(self.goal_of(&comp, &state))));
            }
            K::GetContour => {
                let comp = self.locate(prim.text(0), &state)?;
                return Ok(Some(PrimitiveValue::Contour(comp.turning_points())));
            }
            K::WithObjectOnLeft | K::WithObjectOnRight | K::Face => {
                let comp = self.locate(prim.text(0), &state)?;
                let b = state.bearing_to(comp.centroid.0, comp.centroid.1);
                let target = match prim.kind {
                    K::WithObjectOnLeft => b + 90.0,
                    K::WithObjectOnRight => b - 90.0,
                    _ => b,
                };
                self.rotate_to(target, body, out)?;
            }
            K::MoveInBetween => {
                let a = self.locate(prim.text(0), &state)?;
                let b = self.locate(prim.text(1), &state)?;
                let goal = self.clamp((a.centroid.0 + b.centroid.0) / 2.0, (a.centroid.1 + b.centroid.1) / 2.0);
                self.drive_to(goal, body, out)?;
            }
            K::Turn => {
                let a = prim.number(0);
                if !a.is_finite() {
                    return Err(NavError::InvalidArgument { primitive: "turn", reason: format!("angle {a}") });
                }
                let step = if a > 0.0 { Action::TurnRight } else { Action::TurnLeft };
                for _ in 0..a.abs().round() as usize {
                    act(body, step, out)?;
                }
            }
            K::TurnAbsolute => {
                let a = prim.number(0);
                if !a.is_finite() {
                    return Err(NavError::InvalidArgument { primitive: "turn_absolute", reason: format!("angle {a}") });
                }
                self.rotate_to(a, body, out)?;
            }
            K::MoveNorth | K::MoveSouth | K::MoveEast | K::MoveWest => {
                let comp = self.locate(prim.text(0), &state)?;
                let off = self.config.offset_dist / scale;
                let (cx, cy) = comp.centroid;
                let bb = comp.bbox;
                let (gx, gy) = match prim.kind {
                    K::MoveNorth => (cx, bb.max_py as f64 + off),
                    K::MoveSouth => (cx, bb.min_py as f64 - off),
                    K::MoveEast => (bb.max_px as f64 + off, cy),
                    _ => (bb.min_px as f64 - off, cy),
                };
                let goal = self.clamp(gx, gy);
                self.drive_to(goal, body, out)?;
            }
            K::MoveToObject => {
                let comp = self.locate(prim.text(0), &state)?;
                let ring = self.approach_ring(&comp);
                if ring.is_empty() {
                    return Err(PlanError::NoFreeGoal { goal: comp.centroid_cell(), radius: self.config.approach_radius }.into());
                }
                let start = self.free_start(body, out)?;
                let path = plan_to_any(self.ctx.obstacles, start, &ring)?;
                self.follow(&path, body, out)?;
            }
            K::MoveForward => {
                let d = prim.number(0);
                if !(d.is_finite() && d >= 0.0) {
                    return Err(NavError::InvalidArgument {
                        primitive: "move_forward",
                        reason: format!("distance must be a non-negative number of meters, got {d}"),
                    });
                }
                let steps = (d / FORWARD_STEP_M).round() as usize;
                let grid = self.ctx.grid;
                let mut predicted = state;
                let mut on_free = !self.ctx.obstacles.get(state.cell(&grid));
                for _ in 0..steps {
                    let next = apply_action(predicted, Action::Forward, scale);
                    let (nx, ny) = (next.px.round() as i64, next.py.round() as i64);
                    let blocked = !grid.contains(nx, ny) || self.ctx.obstacles.get_signed(nx, ny);
                    if blocked && on_free {
                        break;
                    }
                    on_free |= !blocked;
                    act(body, Action::Forward, out)?;
                    predicted = next;
                }
            }
        }
        Ok(None)
    }

    fn rotate_to(&self, heading: f64, body: &mut dyn Body, out: &mut Vec<Action>) -> Result<(), NavError> {
        let mut s = body.state();
        let mut actions = Vec::new();
        turn_towards(&mut s, heading, self.ctx.grid.scale, &mut actions);
        for a in actions {
            act(body, a, out)?;
        }
        Ok(())
    }

    /// The closest ring of free cells around a landmark, found by an
    /// 8-connected sweep outwards from the component.
    fn approach_ring(&self, comp: &LandmarkComponent) -> Vec<GridCoord> {
        let (rows, cols) = (self.ctx.grid.rows, self.ctx.grid.cols);
        let mut dist = vec![usize::MAX; rows * cols];
        let mut queue = VecDeque::new();
        for c in &comp.cells {
            dist[c.px * cols + c.py] = 0;
            queue.push_back(*c);
        }
        let mut first_free = None;
        let mut ring = Vec::new();
        while let Some(c) = queue.pop_front() {
            let d = dist[c.px * cols + c.py];
            if d > self.config.approach_radius || first_free.is_some_and(|k| d > k) {
                break;
            }
            if d > 0 && !self.ctx.obstacles.get(c) {
                first_free.get_or_insert(d);
                ring.push(c);
            }
            for dx in -1i64..=1 {
                for dy in -1i64..=1 {
                    let (x, y) = (c.px as i64 + dx, c.py as i64 + dy);
                    if (dx, dy) != (0, 0) && x >= 0 && y >= 0 && (x as usize) < rows && (y as usize) < cols {
                        let j = x as usize * cols + y as usize;
                        if dist[j] == usize::MAX {
                            dist[j] = d + 1;
                            queue.push_back(GridCoord::new(x as usize, y as usize));
                        }
                    }
                }
            }
        }
        ring.sort();
        ring
    }

    /// Planning start cell. An agent standing in blocked space first steps to
    /// the nearest free cell.
    fn free_start(&self, body: &mut dyn Body, out: &mut Vec<Action>) -> Result<GridCoord, NavError> {
        let state = body.state();
        let cell = state.cell(&self.ctx.grid);
        if !self.ctx.obstacles.get(cell) {
            return Ok(cell);
        }
        let free = nearest_free(self.ctx.obstacles, cell, self.config.planner.retarget_radius)
            .ok_or(PlanError::StartBlocked(cell))?;
        let mut s = state;
        let mut actions = Vec::new();
        steer_towards(&mut s, free.px as f64, free.py as f64, self.ctx.grid.scale, &mut actions);
        for a in actions {
            act(body, a, out)?;
        }
        Ok(free)
    }

    fn follow(&self, path: &super::Path, body: &mut dyn Body, out: &mut Vec<Action>) -> Result<(), NavError> {
        for a in motion_actions(path, body.state(), self.ctx.grid.scale) {
            act(body, a, out)?;
        }
        Ok(())
    }

    /// Plans to `goal` on the obstacle map and drives there, replanning from
    /// the reached position when the body ends up off target.
    pub fn drive_to(&self, goal: GridCoord, body: &mut dyn Body, out: &mut Vec<Action>) -> Result<(), NavError> {
        let mut attempts = 0;
        loop {
            let start = self.free_start(body, out)?;
            let path = plan_path(self.ctx.obstacles, start, goal, &self.config.planner)?;
            self.follow(&path, body, out)?;
            let s = body.state();
            if s.distance_to(path.goal.px as f64, path.goal.py as f64) <= self.config.goal_tolerance || attempts >= self.config.max_replans {
                return Ok(());
            }
            attempts += 1;
        }
    }
}

fn act(body: &mut dyn Body, a: Action, out: &mut Vec<Action>) -> Result<(), NavError> {
    body.act(a)?;
    out.push(a);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::index::UNOBSERVED;
    use crate::nav::IdealBody;

    struct Fixture {
        seg: SegmentationResult,
        labels: LabelSet,
        obstacles: Mask,
        grid: GridSpec,
    }

    /// 100x100 observed floor with labelled rectangles that also block.
    fn fixture(objects: &[(&str, (usize, usize), (usize, usize))]) -> Fixture {
        let labels = LabelSet::new(["floor", "sink", "oven", "sofa", "table"]).unwrap();
        let (rows, cols) = (100, 100);
        let mut seg_labels = vec![0u32; rows * cols];
        let mut obstacles = Mask::new(rows, cols);
        for (name, (x0, y0), (x1, y1)) in objects {
            let l = labels.index_of(name).unwrap() as u32;
            for x in *x0..=*x1 {
                for y in *y0..=*y1 {
                    seg_labels[x * cols + y] = l;
                    obstacles.set(GridCoord::new(x, y), true);
                }
            }
        }
        seg_labels[0] = UNOBSERVED;
        let seg = SegmentationResult { rows, cols, num_labels: labels.len(), labels: seg_labels, scores: vec![0.0; rows * cols] };
        Fixture { seg, labels, obstacles, grid: GridSpec::new(0.05, rows, cols).unwrap() }
    }

    fn nav(f: &Fixture) -> Navigator<'_> {
        let ctx = NavContext { grid: f.grid, segmentation: &f.seg, labels: &f.labels, obstacles: &f.obstacles };
        Navigator::new(ctx, NavConfig::default())
    }

    fn call(name: &str, args: Vec<PrimitiveValue>) -> Primitive {
        Primitive::named(name, args).unwrap()
    }

    fn text(s: &str) -> PrimitiveValue {
        PrimitiveValue::Text(s.into())
    }

    #[test]
    fn seventeen_primitives() {
        assert_eq!(PrimitiveKind::ALL.len(), 17);
        for k in PrimitiveKind::ALL {
            assert_eq!(PrimitiveKind::from_name(k.name()), Some(*k));
        }
    }

    #[test]
    fn argument_checks() {
        assert!(matches!(Primitive::named("fly", vec![]), Err(NavError::UnknownPrimitive(_))));
        assert!(matches!(Primitive::named("turn", vec![]), Err(NavError::Arity { .. })));
        assert!(matches!(Primitive::named("turn", vec![text("x")]), Err(NavError::ArgumentType { .. })));
        assert!(Primitive::named("move_to", vec![PrimitiveValue::Position(GridCoord::new(1, 1))]).is_ok());
    }

    #[test]
    fn turn_absolute_east() {
        let f = fixture(&[]);
        let mut n = nav(&f);
        let mut body = IdealBody::new(AgentState::new(30.0, 30.0, 0.0), 0.05);
        let out = n.exec(&call("turn_absolute", vec![PrimitiveValue::Number(90.0)]), &mut body).unwrap();
        assert_eq!(out.state.heading, 90.0);
        assert_eq!(out.actions, vec![Action::TurnRight; 90]);
    }

    #[test]
    fn turn_and_back_restores_heading() {
        let f = fixture(&[]);
        let mut n = nav(&f);
        let mut body = IdealBody::new(AgentState::new(30.0, 30.0, 17.0), 0.05);
        n.exec(&call("turn", vec![PrimitiveValue::Number(-135.0)]), &mut body).unwrap();
        n.exec(&call("turn", vec![PrimitiveValue::Number(135.0)]), &mut body).unwrap();
        assert_eq!(body.state.heading, 17.0);
    }

    #[test]
    fn move_forward_three_meters() {
        let f = fixture(&[]);
        let mut n = nav(&f);
        let mut body = IdealBody::new(AgentState::new(30.0, 0.0, 0.0), 0.05);
        let out = n.exec(&call("move_forward", vec![PrimitiveValue::Number(3.0)]), &mut body).unwrap();
        assert_eq!(out.actions, vec![Action::Forward; 60]);
        assert!((out.state.py - 60.0).abs() < 1e-9);
    }

    #[test]
    fn move_forward_clips_at_obstacle() {
        let f = fixture(&[("table", (25, 20), (35, 22))]);
        let mut n = nav(&f);
        let mut body = IdealBody::new(AgentState::new(30.0, 5.0, 0.0), 0.05);
        let out = n.exec(&call("move_forward", vec![PrimitiveValue::Number(2.0)]), &mut body).unwrap();
        assert_eq!(out.actions.len(), 14);
        assert!(matches!(
            n.exec(&call("move_forward", vec![PrimitiveValue::Number(-1.0)]), &mut body),
            Err(NavError::InvalidArgument { .. })
        ));
    }

    #[test]
    fn move_in_between_reaches_midpoint() {
        let f = fixture(&[("sink", (9, 9), (11, 11)), ("oven", (19, 9), (21, 11))]);
        let mut n = nav(&f);
        let mut body = IdealBody::new(AgentState::new(40.0, 40.0, 0.0), 0.05);
        let out = n.exec(&call("move_in_between", vec![text("sink"), text("oven")]), &mut body).unwrap();
        assert!(out.state.distance_to(15.0, 10.0) <= 1.0, "{:?}", out.state);
    }

    #[test]
    fn face_and_object_on_left() {
        let f = fixture(&[("sofa", (40, 40), (44, 44))]);
        let mut n = nav(&f);
        let mut body = IdealBody::new(AgentState::new(10.0, 12.0, 0.0), 0.05);
        n.exec(&call("face", vec![text("sofa")]), &mut body).unwrap();
        assert!(body.state.relative_bearing(42.0, 42.0).abs() <= 0.5);
        n.exec(&call("with_object_on_left", vec![text("sofa")]), &mut body).unwrap();
        assert!((body.state.relative_bearing(42.0, 42.0) + 90.0).abs() <= 0.5);
        n.exec(&call("with_object_on_right", vec![text("sofa")]), &mut body).unwrap();
        assert!((body.state.relative_bearing(42.0, 42.0) - 90.0).abs() <= 0.5);
    }

    #[test]
    fn compass_moves() {
        let f = fixture(&[("table", (28, 28), (32, 32))]);
        let mut n = nav(&f);
        let mut body = IdealBody::new(AgentState::new(5.0, 5.0, 0.0), 0.05);
        n.exec(&call("move_north", vec![text("table")]), &mut body).unwrap();
        assert!(body.state.distance_to(30.0, 52.0) <= 1.0, "{:?}", body.state);
        n.exec(&call("move_west", vec![text("table")]), &mut body).unwrap();
        assert!(body.state.distance_to(8.0, 30.0) <= 1.0, "{:?}", body.state);
    }

    #[test]
    fn left_is_robot_relative() {
        let f = fixture(&[("table", (28, 28), (32, 32))]);
        let mut n = nav(&f);
        // agent south of the table looking north: its left is west
        let mut body = IdealBody::new(AgentState::new(30.0, 5.0, 0.0), 0.05);
        n.exec(&call("move_to_left", vec![text("table")]), &mut body).unwrap();
        assert!(body.state.distance_to(8.0, 30.0) <= 1.0, "{:?}", body.state);
        let mut body = IdealBody::new(AgentState::new(30.0, 5.0, 0.0), 0.05);
        n.exec(&call("move_to_right", vec![text("table")]), &mut body).unwrap();
        assert!(body.state.distance_to(52.0, 30.0) <= 1.0, "{:?}", body.state);
    }

    #[test]
    fn move_to_object_stops_next_to_it() {
        let f = fixture(&[("sofa", (28, 28), (32, 32))]);
        let mut n = nav(&f);
        let mut body = IdealBody::new(AgentState::new(5.0, 30.0, 0.0), 0.05);
        n.exec(&call("move_to_object", vec![text("sofa")]), &mut body).unwrap();
        assert!(body.state.distance_to(27.0, 30.0) <= 1.5, "{:?}", body.state);
    }

    #[test]
    fn get_pos_and_missing_landmark() {
        let f = fixture(&[("sofa", (10, 10), (12, 14))]);
        let mut n = nav(&f);
        let mut body = IdealBody::new(AgentState::new(30.0, 30.0, 0.0), 0.05);
        let out = n.exec(&call("get_pos", vec![text("sofa")]), &mut body).unwrap();
        assert_eq!(out.value, Some(PrimitiveValue::Position(GridCoord::new(11, 12))));
        assert!(out.actions.is_empty());
        let c = n.exec(&call("get_contour", vec![text("sofa")]), &mut body).unwrap();
        assert_eq!(c.value.map(|v| matches!(v, PrimitiveValue::Contour(ref p) if p.len() == 4)), Some(true));
        assert!(matches!(n.exec(&call("face", vec![text("table")]), &mut body), Err(NavError::LandmarkNotFound(_))));
        assert!(matches!(n.exec(&call("face", vec![text("piano")]), &mut body), Err(NavError::LandmarkNotFound(_))));
    }

    #[test]
    fn move_to_position_retargets_blocked_goal() {
        let f = fixture(&[("sofa", (10, 10), (12, 14))]);
        let mut n = nav(&f);
        let mut body = IdealBody::new(AgentState::new(40.0, 40.0, 0.0), 0.05);
        n.exec(&call("move_to", vec![PrimitiveValue::Position(GridCoord::new(11, 12))]), &mut body).unwrap();
        assert!(body.state.distance_to(11.0, 12.0) <= 3.0, "{:?}", body.state);
    }
}
