use std::f64::consts::PI;

use crate::envs::{sine_batch, SineStage};
use crate::error::Result;
use crate::harness::rng_for;
use crate::nn::{mse_loss, Matrix, MlpParams, Optimizer, OptimizerKind};
use crate::replay::StateBounds;

/// Grid points used for region MSE.
pub const SINE_GRID: usize = 201;
const HIDDEN: [usize; 2] = [32, 32];
const LR: f64 = 0.01;
const BATCH: usize = 32;
const UPDATES_PER_STAGE: usize = 1000;
/// Unweighted consolidation term in the two-stage regression.
const CONSOLIDATION_WEIGHT: f64 = 1.0;

/// Mean of `(f(x) − sin(πx))²` over `n_grid` evenly spaced points of `[lo, hi]`, endpoints included.
pub fn sine_region_mse(f: impl Fn(f64) -> f64, region: (f64, f64), n_grid: usize) -> f64 {
    let (lo, hi) = region;
    let n = if lo == hi { 1 } else { n_grid.max(2) };
    let total: f64 = (0..n)
        .map(|i| {
            let x = if n == 1 { lo } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 };
            let err = f(x) - (PI * x).sin();
            err * err
        })
        .sum();
    total / n as f64
}

fn network_fn(params: &MlpParams) -> impl Fn(f64) -> f64 + '_ {
    move |x| params.forward_one(&[x]).expect("scalar network")[0]
}

#[derive(Clone, Debug)]
pub struct SineOutcome {
    /// Region MSE on `[0, 1]` right after Stage 1.
    pub stage1_fit: f64,
    /// Region MSE on `[0, 1]` after Stage 2.
    pub mse_stage1_region: f64,
    /// Region MSE on `[0, 2]` after Stage 2.
    pub mse_full: f64,
    pub params: MlpParams,
}

/// Trains on `x ∈ [0, 1]`, then on `x ∈ [1, 2]`, optionally consolidating toward the
/// Stage-1 snapshot on inputs drawn uniformly from the Stage-1 input bounds.
pub fn run_sine_two_stage(use_consolidation: bool, seed: u64) -> Result<SineOutcome> {
    let mut rng = rng_for(seed, 0);
    let mut sizes = vec![1];
    sizes.extend_from_slice(&HIDDEN);
    sizes.push(1);
    let mut params = MlpParams::init(&sizes, &mut rng)?;
    let mut opt = Optimizer::new(OptimizerKind::adam(), LR)?;
    let mut bounds = StateBounds::new(1);

    let xy = |samples: &[crate::envs::SineSample]| -> Result<(Matrix, Matrix)> {
        let x = Matrix::from_vec(samples.len(), 1, samples.iter().map(|s| s.x).collect())?;
        let y = Matrix::from_vec(samples.len(), 1, samples.iter().map(|s| s.y).collect())?;
        Ok((x, y))
    };

    for _ in 0..UPDATES_PER_STAGE {
        let samples = sine_batch(SineStage::One, BATCH, &mut rng);
        for s in &samples {
            bounds.update(&[s.x])?;
        }
        let (x, y) = xy(&samples)?;
        let cache = params.forward_cached(&x)?;
        let (_, grad) = mse_loss(cache.output(), &y)?;
        let grads = params.backward_cached(&cache, &grad)?;
        opt.step(&mut params, &grads)?;
    }
    let stage1_fit = sine_region_mse(network_fn(&params), (0.0, 1.0), SINE_GRID);

    let teacher = params.clone();
    let frozen_bounds = bounds.clone();
    for _ in 0..UPDATES_PER_STAGE {
        let samples = sine_batch(SineStage::Two, BATCH, &mut rng);
        let (x, y) = xy(&samples)?;
        let cache = params.forward_cached(&x)?;
        let (_, grad) = mse_loss(cache.output(), &y)?;
        let mut grads = params.backward_cached(&cache, &grad)?;
        if use_consolidation {
            let pseudo = frozen_bounds.sample_uniform(BATCH, &mut rng)?;
            let xs = Matrix::from_vec(BATCH, 1, pseudo.iter().map(|p| p[0]).collect())?;
            let old = teacher.forward(&xs)?;
            let cache = params.forward_cached(&xs)?;
            let (_, cgrad) = mse_loss(cache.output(), &old)?;
            grads.add_scaled(&params.backward_cached(&cache, &cgrad)?, CONSOLIDATION_WEIGHT)?;
        }
        opt.step(&mut params, &grads)?;
    }
    Ok(SineOutcome {
        stage1_fit,
        mse_stage1_region: sine_region_mse(network_fn(&params), (0.0, 1.0), SINE_GRID),
        mse_full: sine_region_mse(network_fn(&params), (0.0, 2.0), SINE_GRID),
        params,
    })
}
