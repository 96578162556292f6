//! Task suite: MountainCar-v0 and Acrobot-v1 dynamics, and the two-stage sine stream.

mod acrobot;
mod mountain_car;
mod sine;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use acrobot::Acrobot;
pub use mountain_car::MountainCar;
pub use sine::{sine_batch, SineSample, SineStage};

use crate::error::{Error, Result};

/// A state vector as seen by the agent.
pub type Observation = Vec<f64>;

#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    pub next_obs: Observation,
    pub reward: f64,
    /// The episode reached a true absorbing state; no bootstrapping past it.
    pub terminal: bool,
    /// The episode was cut by the time limit; the agent should still bootstrap.
    pub truncated: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    MountainCar,
    Acrobot,
}

impl Task {
    pub fn state_dim(self) -> usize {
        match self {
            Task::MountainCar => 2,
            Task::Acrobot => 6,
        }
    }

    pub fn n_actions(self) -> usize {
        3
    }

    pub fn time_limit(self) -> usize {
        match self {
            Task::MountainCar => 200,
            Task::Acrobot => 500,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Task::MountainCar => "mountain_car",
            Task::Acrobot => "acrobot",
        }
    }

    pub fn make(self) -> TaskEnv {
        match self {
            Task::MountainCar => TaskEnv::MountainCar(MountainCar::new()),
            Task::Acrobot => TaskEnv::Acrobot(Acrobot::new()),
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "mountain_car" | "mountaincar" | "mountaincar_v0" => Ok(Task::MountainCar),
            "acrobot" | "acrobot_v1" => Ok(Task::Acrobot),
            other => Err(Error::Config(format!("unknown task '{other}'"))),
        }
    }
}

/// A control environment instance; owns its state and episode step counter.
#[derive(Clone, Debug)]
pub enum TaskEnv {
    MountainCar(MountainCar),
    Acrobot(Acrobot),
}

impl TaskEnv {
    pub fn task(&self) -> Task {
        match self {
            TaskEnv::MountainCar(_) => Task::MountainCar,
            TaskEnv::Acrobot(_) => Task::Acrobot,
        }
    }

    pub fn reset<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Observation {
        match self {
            TaskEnv::MountainCar(env) => env.reset(rng),
            TaskEnv::Acrobot(env) => env.reset(rng),
        }
    }

    pub fn step(&mut self, action: usize) -> Result<StepResult> {
        match self {
            TaskEnv::MountainCar(env) => env.step(action),
            TaskEnv::Acrobot(env) => env.step(action),
        }
    }
}

pub(crate) fn check_action(action: usize, n_actions: usize) -> Result<()> {
    if action >= n_actions {
        return Err(Error::InvalidAction { action, n_actions });
    }
    Ok(())
}
