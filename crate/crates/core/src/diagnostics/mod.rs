//! Executable checks of the method's analytic claims, plus the forgetting probes.

mod bound;
mod gradcheck;
mod linear;
mod sine;

pub use bound::{check_bound_suite, check_upper_bound, BoundCheck, BoundSuiteReport, TabularInstance};
pub use gradcheck::{
    check_gradients, check_gradients_suite, random_instance as gradcheck_instance, GradCheckReport, GradSuiteReport,
};
pub use linear::{linear_consolidation_recover, linear_recovery_suite, solve_linear, LinearRecovery, LinearSuiteReport};
pub use sine::{run_sine_two_stage, sine_region_mse, SineOutcome, SINE_GRID};

use serde::{Deserialize, Serialize};

use crate::agents::argmax;
use crate::error::{Error, Result};
use crate::nn::MlpParams;

/// The MountainCar state whose greedy action is tracked through training.
pub const PROBE_STATE: [f64; 2] = [-0.70167243, 0.04185214];

/// Environment steps between probe records.
pub const PROBE_EVERY: u64 = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeRecord {
    pub step: u64,
    pub greedy_action: usize,
}

/// Lowest-index argmax of `Q(probe_state, ·; θ)`.
pub fn probe_greedy(params: &MlpParams, probe_state: &[f64]) -> Result<usize> {
    if probe_state.len() != params.input_dim() {
        return Err(Error::shape("probe_greedy", params.input_dim(), probe_state.len()));
    }
    Ok(argmax(&params.forward_one(probe_state)?))
}

/// Number of consecutive records whose greedy action differs.
pub fn flip_count(records: &[ProbeRecord]) -> usize {
    records
        .windows(2)
        .filter(|w| w[0].greedy_action != w[1].greedy_action)
        .count()
}
