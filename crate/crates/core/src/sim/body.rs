//! Simulated robot: discrete actions against the scene's ground truth.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::scene::Scene;
use crate::geometry::{heading_vector, normalize_degrees};
use crate::index::Mask;
use crate::nav::{apply_action, Action, AgentState, Body, NavError, FORWARD_STEP_M};

/// How a body interacts with the ground truth: cells with height at or above
/// `clearance` stop it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Embodiment {
    pub name: String,
    pub clearance: f32,
    /// Body radius in meters, used to inflate obstacles when planning.
    pub radius: f64,
}

impl Embodiment {
    pub fn ground() -> Self {
        Self { name: "ground".into(), clearance: 0.2, radius: 0.18 }
    }

    /// Flies at a fixed altitude, over anything lower than 1.7 m.
    pub fn drone() -> Self {
        Self { name: "drone".into(), clearance: 1.7, radius: 0.15 }
    }

    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "ground" => Some(Self::ground()),
            "drone" => Some(Self::drone()),
            _ => None,
        }
    }

    pub fn blocked(&self, scene: &Scene) -> Mask {
        scene.blocked(self.clearance)
    }

    pub fn inflation_cells(&self, scale: f64) -> usize {
        (self.radius / scale - 1e-9).ceil().max(0.0) as usize
    }
}

/// Zero-mean Gaussian actuation error, seeded.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ActuationNoise {
    pub forward_sigma: f64,
    pub turn_sigma: f64,
    pub seed: u64,
}

impl ActuationNoise {
    pub fn is_zero(&self) -> bool {
        self.forward_sigma == 0.0 && self.turn_sigma == 0.0
    }
}

/// Result of one action under the collision rule: a forward move whose
/// destination cell is blocked or off the grid leaves the state unchanged.
pub fn step(blocked: &Mask, state: AgentState, action: Action, scale: f64) -> AgentState {
    let next = apply_action(state, action, scale);
    if action == Action::Forward && !enterable(blocked, &next) {
        return state;
    }
    next
}

fn enterable(blocked: &Mask, s: &AgentState) -> bool {
    let (x, y) = (s.px.round() as i64, s.py.round() as i64);
    let inside = x >= 0 && y >= 0 && (x as usize) < blocked.rows && (y as usize) < blocked.cols;
    inside && !blocked.get_signed(x, y)
}

/// Simulator body with an action budget and path-length bookkeeping.
#[derive(Debug, Clone)]
pub struct SimBody {
    blocked: Mask,
    scale: f64,
    state: AgentState,
    budget: usize,
    used: usize,
    forwards: usize,
    actions: Vec<Action>,
    noise: ActuationNoise,
    rng: ChaCha8Rng,
}

impl SimBody {
    pub fn new(blocked: Mask, scale: f64, start: AgentState, budget: usize) -> Self {
        Self::with_noise(blocked, scale, start, budget, ActuationNoise::default())
    }

    pub fn with_noise(blocked: Mask, scale: f64, start: AgentState, budget: usize, noise: ActuationNoise) -> Self {
        Self {
            blocked,
            scale,
            state: start,
            budget,
            used: 0,
            forwards: 0,
            actions: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(noise.seed),
            noise,
        }
    }

    /// Meters travelled: one forward quantum per FORWARD action issued.
    pub fn path_length(&self) -> f64 {
        FORWARD_STEP_M * self.forwards as f64
    }

    pub fn forward_count(&self) -> usize {
        self.forwards
    }

    pub fn actions(&self) -> &[Action] {
        &self.actions
    }

    pub fn remaining(&self) -> usize {
        self.budget - self.used
    }

    pub fn teleport(&mut self, state: AgentState) {
        self.state = state;
    }

    fn noisy(&mut self, action: Action) -> AgentState {
        if self.noise.is_zero() || action == Action::Stop {
            return step(&self.blocked, self.state, action, self.scale);
        }
        let mut gauss = |sigma: f64| {
            if sigma > 0.0 {
                Normal::new(0.0, sigma).expect("positive sigma").sample(&mut self.rng)
            } else {
                0.0
            }
        };
        match action {
            Action::Forward => {
                let len = (FORWARD_STEP_M + gauss(self.noise.forward_sigma)).max(0.0) / self.scale;
                let (dx, dy) = heading_vector(self.state.heading + gauss(self.noise.turn_sigma));
                let next = AgentState { px: self.state.px + dx * len, py: self.state.py + dy * len, ..self.state };
                if enterable(&self.blocked, &next) {
                    next
                } else {
                    self.state
                }
            }
            _ => {
                let mut next = step(&self.blocked, self.state, action, self.scale);
                next.heading = normalize_degrees(next.heading + gauss(self.noise.turn_sigma));
                next
            }
        }
    }
}

impl Body for SimBody {
    fn state(&self) -> AgentState {
        self.state
    }

    fn act(&mut self, action: Action) -> Result<(), NavError> {
        if self.used >= self.budget {
            return Err(NavError::BudgetExhausted(self.budget));
        }
        self.used += 1;
        if action == Action::Forward {
            self.forwards += 1;
        }
        self.state = self.noisy(action);
        self.actions.push(action);
        Ok(())
    }
}
