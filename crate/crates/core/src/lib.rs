//! Memory-efficient deep Q-learning.
//!
//! DQN keeps old knowledge alive with a large replay buffer. The MeDQN learners shrink that
//! buffer to one mini-batch (uniform state sampling) or a fraction of DQN's size (real state
//! sampling), and instead regularize the online network toward the target network on
//! sampled states.

pub mod agents;
pub mod diagnostics;
pub mod envs;
pub mod error;
pub mod harness;
pub mod nn;
pub mod par;
pub mod replay;

pub use error::{Error, Result};
