use rand::Rng;

use crate::error::Result;
use crate::nn::Matrix;
use crate::par;

pub const PIVOT_TOLERANCE: f64 = 1e-12;
/// Draws allowed per trial before giving up on finding a nonsingular system.
const MAX_DRAWS: usize = 100;

/// Solves `a · x = b` by Gaussian elimination with partial pivoting.
/// Returns `None` if a pivot falls below [`PIVOT_TOLERANCE`] in magnitude.
pub fn solve_linear(a: &Matrix, b: &[f64]) -> Option<Vec<f64>> {
    let n = a.rows();
    assert_eq!(a.cols(), n, "solve_linear needs a square system");
    assert_eq!(b.len(), n);
    let mut m = a.clone();
    let mut rhs = b.to_vec();
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&i, &j| m[(i, col)].abs().total_cmp(&m[(j, col)].abs()))
            .unwrap();
        if m[(pivot_row, col)].abs() < PIVOT_TOLERANCE {
            return None;
        }
        if pivot_row != col {
            for k in 0..n {
                let tmp = m[(col, k)];
                m[(col, k)] = m[(pivot_row, k)];
                m[(pivot_row, k)] = tmp;
            }
            rhs.swap(col, pivot_row);
        }
        let pivot = m[(col, col)];
        for row in col + 1..n {
            let factor = m[(row, col)] / pivot;
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                m[(row, k)] -= factor * m[(col, k)];
            }
            rhs[row] -= factor * rhs[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let tail: f64 = (row + 1..n).map(|k| m[(row, k)] * x[k]).sum();
        x[row] = (rhs[row] - tail) / m[(row, row)];
    }
    Some(x)
}

#[derive(Clone, Debug)]
pub struct LinearRecovery {
    pub theta_target: Vec<f64>,
    pub theta_recovered: Vec<f64>,
    pub max_abs_error: f64,
    /// `‖X θ − Y‖∞` on the accepted system.
    pub residual: f64,
    /// Systems discarded as numerically singular before one was accepted.
    pub resamples: usize,
}

/// Recovers a linear target `θ⁻` from `n` random inputs and its outputs on them alone.
pub fn linear_consolidation_recover<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<LinearRecovery> {
    let theta_target: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    recover_with(theta_target, n, rng)
}

fn recover_with<R: Rng + ?Sized>(theta_target: Vec<f64>, n: usize, rng: &mut R) -> Result<LinearRecovery> {
    let mut resamples = 0;
    loop {
        let x = Matrix::from_vec(n, n, (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect())?;
        let y = matvec(&x, &theta_target);
        match solve_linear(&x, &y) {
            Some(theta) => {
                let residual = matvec(&x, &theta)
                    .iter()
                    .zip(&y)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                let max_abs_error = theta
                    .iter()
                    .zip(&theta_target)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                return Ok(LinearRecovery {
                    theta_target,
                    theta_recovered: theta,
                    max_abs_error,
                    residual,
                    resamples,
                });
            }
            None if resamples + 1 < MAX_DRAWS => resamples += 1,
            None => {
                return Err(crate::Error::NonFinite(format!(
                    "no nonsingular {n}x{n} system in {MAX_DRAWS} draws"
                )))
            }
        }
    }
}

fn matvec(a: &Matrix, x: &[f64]) -> Vec<f64> {
    a.iter_rows()
        .map(|r| r.iter().zip(x).map(|(p, q)| p * q).sum())
        .collect()
}

#[derive(Clone, Debug)]
pub struct LinearSuiteReport {
    pub trials: usize,
    pub dim: usize,
    pub max_abs_error: f64,
    pub max_residual: f64,
    pub resamples: usize,
}

impl LinearSuiteReport {
    pub fn resample_rate(&self) -> f64 {
        self.resamples as f64 / (self.trials + self.resamples) as f64
    }

    pub fn passed(&self) -> bool {
        self.max_abs_error < 1e-6 && self.max_residual < 1e-9 && self.resample_rate() < 0.05
    }
}

pub fn linear_recovery_suite(trials: usize, dim: usize, seed: u64) -> Result<LinearSuiteReport> {
    let idx: Vec<u64> = (0..trials as u64).collect();
    let results = par::map(&idx, |&i| {
        let mut rng = crate::harness::rng_for(seed, i);
        linear_consolidation_recover(dim, &mut rng)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(LinearSuiteReport {
        trials,
        dim,
        max_abs_error: results.iter().map(|r| r.max_abs_error).fold(0.0, f64::max),
        max_residual: results.iter().map(|r| r.residual).fold(0.0, f64::max),
        resamples: results.iter().map(|r| r.resamples).sum(),
    })
}
