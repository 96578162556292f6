//! Training runs, sweeps and plotting on top of the agents.

mod config;
mod metrics;
mod plot;
mod stats;
mod sweep;
mod train;

pub use config::{ConfigFile, Overrides, RunConfig, DEFAULT_LOG_EVERY};
pub use metrics::{metrics_writer, read_metrics, MetricsRow, METRICS_HEADER};
pub use plot::{build_curves, emit_plot, label_for, render_svg, Curve, SMOOTHING};
pub use stats::{ema, mode, Summary};
pub use sweep::{run_sweep, summarize, write_summary, SummaryRow, SweepConfig, SUMMARY_FILE};
pub use train::{execute, run_in_memory, run_training, RunOutcome, RETURN_WINDOW};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type RunRng = ChaCha8Rng;

/// Independent generator for item `stream` of an experiment seeded with `seed`.
pub fn rng_for(seed: u64, stream: u64) -> RunRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: u64 = rng_for(1, 0).gen();
        assert_eq!(a, rng_for(1, 0).gen::<u64>());
        assert_ne!(a, rng_for(1, 1).gen::<u64>());
        assert_ne!(a, rng_for(2, 0).gen::<u64>());
    }
}
