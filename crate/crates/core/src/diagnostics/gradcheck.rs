use rand::Rng;

use crate::error::Result;
use crate::nn::{Matrix, MlpParams};
use crate::par;

pub const FD_STEP: f64 = 1e-5;
pub const REL_TOLERANCE: f64 = 1e-4;
pub const REL_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub layer_sizes: Vec<usize>,
    pub entries: usize,
    pub max_rel_error: f64,
}

/// `|a − b| / max(|a|, |b|, 1e-6)`
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

fn scalar_objective(params: &MlpParams, batch: &Matrix, upstream: &Matrix) -> Result<f64> {
    let out = params.forward(batch)?;
    Ok(out.as_slice().iter().zip(upstream.as_slice()).map(|(o, u)| o * u).sum())
}

/// Compares reverse-mode gradients of `Σ upstream ⊙ f(batch)` with central differences.
pub fn check_gradients(params: &MlpParams, batch: &Matrix, upstream: &Matrix) -> Result<GradCheckReport> {
    let grads = params.backward(batch, upstream)?;
    let analytic: Vec<f64> = grads.tensors().flatten().copied().collect();
    let mut probe = params.clone();
    let mut max_rel_error = 0.0f64;
    let mut flat = 0;
    let n_tensors = params.tensors().count();
    for tensor in 0..n_tensors {
        let len = params.tensors().nth(tensor).unwrap().len();
        for i in 0..len {
            let orig = probe.tensors().nth(tensor).unwrap()[i];
            probe.tensors_mut().nth(tensor).unwrap()[i] = orig + FD_STEP;
            let plus = scalar_objective(&probe, batch, upstream)?;
            probe.tensors_mut().nth(tensor).unwrap()[i] = orig - FD_STEP;
            let minus = scalar_objective(&probe, batch, upstream)?;
            probe.tensors_mut().nth(tensor).unwrap()[i] = orig;
            let numeric = (plus - minus) / (2.0 * FD_STEP);
            max_rel_error = max_rel_error.max(relative_error(analytic[flat], numeric));
            flat += 1;
        }
    }
    Ok(GradCheckReport {
        layer_sizes: params.layer_sizes().to_vec(),
        entries: flat,
        max_rel_error,
    })
}

/// A random network of 1 to 3 layers with at most 16 units per layer, a batch of up to
/// 8 inputs in `[-1, 1]` and a random upstream gradient.
pub fn random_instance<R: Rng + ?Sized>(rng: &mut R) -> Result<(MlpParams, Matrix, Matrix)> {
    let n_layers = rng.gen_range(1..=3);
    let sizes: Vec<usize> = (0..=n_layers).map(|_| rng.gen_range(1..=16)).collect();
    let params = MlpParams::init(&sizes, rng)?;
    // nonzero biases so that the check also exercises the bias path away from init
    let mut params = params;
    for t in params.tensors_mut().skip(1).step_by(2) {
        t.iter_mut().for_each(|b| *b = rng.gen_range(-0.5..0.5));
    }
    let rows = rng.gen_range(1..=8);
    let batch = Matrix::from_vec(rows, sizes[0], (0..rows * sizes[0]).map(|_| rng.gen_range(-1.0..1.0)).collect())?;
    let out = *sizes.last().unwrap();
    let upstream = Matrix::from_vec(rows, out, (0..rows * out).map(|_| rng.gen_range(-1.0..1.0)).collect())?;
    Ok((params, batch, upstream))
}

#[derive(Clone, Debug)]
pub struct GradSuiteReport {
    pub instances: Vec<GradCheckReport>,
    pub max_rel_error: f64,
}

impl GradSuiteReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error < REL_TOLERANCE
    }
}

pub fn check_gradients_suite(instances: usize, seed: u64) -> Result<GradSuiteReport> {
    let idx: Vec<u64> = (0..instances as u64).collect();
    let reports = par::map(&idx, |&i| {
        let mut rng = crate::harness::rng_for(seed, i);
        let (p, x, u) = random_instance(&mut rng)?;
        check_gradients(&p, &x, &u)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let max_rel_error = reports.iter().map(|r| r.max_rel_error).fold(0.0, f64::max);
    Ok(GradSuiteReport {
        instances: reports,
        max_rel_error,
    })
}
