use rand::Rng;

use super::{check_action, Observation, StepResult};
use crate::error::Result;

pub const MIN_POSITION: f64 = -1.2;
pub const MAX_POSITION: f64 = 0.6;
pub const MAX_SPEED: f64 = 0.07;
pub const GOAL_POSITION: f64 = 0.5;
const FORCE: f64 = 0.001;
const GRAVITY: f64 = 0.0025;
const TIME_LIMIT: usize = 200;

/// Underpowered car in a valley; actions push left, coast, push right.
#[derive(Clone, Debug)]
pub struct MountainCar {
    position: f64,
    velocity: f64,
    elapsed: usize,
}

impl MountainCar {
    pub fn new() -> Self {
        MountainCar {
            position: -0.5,
            velocity: 0.0,
            elapsed: 0,
        }
    }

    /// Places the car at an arbitrary state with a fresh time limit.
    pub fn with_state(position: f64, velocity: f64) -> Self {
        MountainCar {
            position,
            velocity,
            elapsed: 0,
        }
    }

    pub fn state(&self) -> Observation {
        vec![self.position, self.velocity]
    }

    pub fn reset<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Observation {
        self.position = rng.gen_range(-0.6..=-0.4);
        self.velocity = 0.0;
        self.elapsed = 0;
        self.state()
    }

    /// One application of the update equations, without episode bookkeeping.
    pub fn dynamics(position: f64, velocity: f64, action: usize) -> (f64, f64) {
        let mut v = velocity + (action as f64 - 1.0) * FORCE - GRAVITY * (3.0 * position).cos();
        v = v.clamp(-MAX_SPEED, MAX_SPEED);
        let p = (position + v).clamp(MIN_POSITION, MAX_POSITION);
        if p == MIN_POSITION && v < 0.0 {
            v = 0.0;
        }
        (p, v)
    }

    pub fn step(&mut self, action: usize) -> Result<StepResult> {
        check_action(action, 3)?;
        let (p, v) = Self::dynamics(self.position, self.velocity, action);
        self.position = p;
        self.velocity = v;
        self.elapsed += 1;
        let terminal = p >= GOAL_POSITION;
        Ok(StepResult {
            next_obs: self.state(),
            reward: -1.0,
            terminal,
            truncated: !terminal && self.elapsed >= TIME_LIMIT,
        })
    }
}

impl Default for MountainCar {
    fn default() -> Self {
        Self::new()
    }
}
