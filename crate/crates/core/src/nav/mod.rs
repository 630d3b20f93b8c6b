//! Agent kinematics over the discrete action space, grid planning and the
//! parameterized navigation primitives.

mod planner;
mod primitives;

pub use planner::{
    dijkstra_distances, nearest_free, path_to_actions, motion_actions, plan_path, plan_to_any, Cost, Path, PlanError,
    PlannerOptions,
};
pub use primitives::{ArgKind, NavConfig, NavContext, NavError, Navigator, Primitive, PrimitiveKind, PrimitiveOutcome, PrimitiveValue};

use serde::{Deserialize, Serialize};

use crate::geometry::{heading_vector, normalize_degrees, GridCoord, GridSpec};

/// Forward quantum in meters.
pub const FORWARD_STEP_M: f64 = 0.05;
/// Rotation quantum in degrees.
pub const TURN_STEP_DEG: f64 = 1.0;

/// Agent pose on the map: fractional cell coordinates (integers are cell
/// centers) and a compass heading in degrees, 0 = north (+py), 90 = east (+px).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub px: f64,
    pub py: f64,
    pub heading: f64,
}

impl AgentState {
    pub fn new(px: f64, py: f64, heading: f64) -> Self {
        Self { px, py, heading: normalize_degrees(heading) }
    }

    pub fn at_cell(c: GridCoord, heading: f64) -> Self {
        Self::new(c.px as f64, c.py as f64, heading)
    }

    /// Nearest cell, clamped into the grid.
    pub fn cell(&self, grid: &GridSpec) -> GridCoord {
        let clamp = |v: f64, n: usize| v.round().clamp(0.0, (n - 1) as f64) as usize;
        GridCoord::new(clamp(self.px, grid.rows), clamp(self.py, grid.cols))
    }

    pub fn distance_to(&self, px: f64, py: f64) -> f64 {
        ((self.px - px).powi(2) + (self.py - py).powi(2)).sqrt()
    }

    /// Compass bearing from the agent to `(px, py)`.
    pub fn bearing_to(&self, px: f64, py: f64) -> f64 {
        crate::geometry::bearing(px - self.px, py - self.py)
    }

    /// Bearing of `(px, py)` relative to the heading; positive is to the right.
    pub fn relative_bearing(&self, px: f64, py: f64) -> f64 {
        normalize_degrees(self.bearing_to(px, py) - self.heading)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    Forward,
    TurnLeft,
    TurnRight,
    Stop,
}

impl Action {
    pub fn code(&self) -> char {
        match self {
            Action::Forward => 'F',
            Action::TurnLeft => 'L',
            Action::TurnRight => 'R',
            Action::Stop => 'S',
        }
    }

    pub fn from_code(c: char) -> Option<Self> {
        match c {
            'F' => Some(Action::Forward),
            'L' => Some(Action::TurnLeft),
            'R' => Some(Action::TurnRight),
            'S' => Some(Action::Stop),
            _ => None,
        }
    }
}

/// One action code per line.
pub fn format_actions(actions: &[Action]) -> String {
    let mut s = String::with_capacity(actions.len() * 2);
    for a in actions {
        s.push(a.code());
        s.push('\n');
    }
    s
}

pub fn parse_actions(text: &str) -> Result<Vec<Action>, String> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let t = l.trim();
            let mut chars = t.chars();
            match (chars.next().and_then(Action::from_code), chars.next()) {
                (Some(a), None) => Ok(a),
                _ => Err(format!("line {}: invalid action {t:?}", i + 1)),
            }
        })
        .collect()
}

/// Noise-free effect of an action; `scale` is meters per cell.
pub fn apply_action(state: AgentState, action: Action, scale: f64) -> AgentState {
    match action {
        Action::Forward => {
            let (dx, dy) = heading_vector(state.heading);
            let step = FORWARD_STEP_M / scale;
            AgentState { px: state.px + dx * step, py: state.py + dy * step, heading: state.heading }
        }
        Action::TurnLeft => AgentState { heading: normalize_degrees(state.heading - TURN_STEP_DEG), ..state },
        Action::TurnRight => AgentState { heading: normalize_degrees(state.heading + TURN_STEP_DEG), ..state },
        Action::Stop => state,
    }
}

/// Something that executes actions: the simulator, or an ideal kinematic model.
pub trait Body {
    fn state(&self) -> AgentState;

    fn act(&mut self, action: Action) -> Result<(), NavError>;
}

/// Kinematic body without collisions or noise.
#[derive(Debug, Clone)]
pub struct IdealBody {
    pub state: AgentState,
    pub scale: f64,
    pub actions: Vec<Action>,
}

impl IdealBody {
    pub fn new(state: AgentState, scale: f64) -> Self {
        Self { state, scale, actions: Vec::new() }
    }
}

impl Body for IdealBody {
    fn state(&self) -> AgentState {
        self.state
    }

    fn act(&mut self, action: Action) -> Result<(), NavError> {
        self.state = apply_action(self.state, action, self.scale);
        self.actions.push(action);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_turn_restores_heading() {
        let mut s = AgentState::new(0.0, 0.0, 37.0);
        for _ in 0..360 {
            s = apply_action(s, Action::TurnLeft, 0.05);
        }
        assert_eq!(s.heading, 37.0);
    }

    #[test]
    fn twenty_steps_east_is_one_meter() {
        let mut s = AgentState::new(10.0, 10.0, 90.0);
        for _ in 0..20 {
            s = apply_action(s, Action::Forward, 0.05);
        }
        assert!((s.px - 30.0).abs() < 1e-9 && (s.py - 10.0).abs() < 1e-9);
    }

    #[test]
    fn action_codes_round_trip() {
        let a = vec![Action::Forward, Action::TurnLeft, Action::TurnRight, Action::Stop];
        assert_eq!(parse_actions(&format_actions(&a)).unwrap(), a);
        assert!(parse_actions("F\nX\n").is_err());
    }

    #[test]
    fn relative_bearing_sign() {
        let s = AgentState::new(0.0, 0.0, 0.0);
        assert_eq!(s.relative_bearing(1.0, 0.0), 90.0);
        assert_eq!(s.relative_bearing(-1.0, 0.0), -90.0);
    }
}
