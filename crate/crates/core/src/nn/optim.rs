use serde::{Deserialize, Serialize};

use super::{GradientSet, MlpParams};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
    /// Centered RMSProp with the epsilon added outside the square root.
    CenteredRmsProp { alpha: f64, eps: f64 },
}

impl OptimizerKind {
    pub fn adam() -> Self {
        OptimizerKind::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn centered_rmsprop() -> Self {
        OptimizerKind::CenteredRmsProp {
            alpha: 0.95,
            eps: 0.01,
        }
    }
}

/// An optimizer together with its per-parameter moment accumulators.
///
/// Accumulators are allocated lazily on the first step so that the state can be built
/// before the network it will train.
#[derive(Clone, Debug)]
pub struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64) -> Result<Self> {
        if !(lr >= 0.0 && lr.is_finite()) {
            return Err(Error::Config(format!("learning rate must be finite and >= 0, got {lr}")));
        }
        Ok(Optimizer {
            kind,
            lr,
            step: 0,
            first: Vec::new(),
            second: Vec::new(),
        })
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    pub fn learning_rate(&self) -> f64 {
        self.lr
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    fn ensure_state(&mut self, params: &MlpParams) {
        if self.first.is_empty() && self.kind != OptimizerKind::Sgd {
            self.first = params.tensors().map(|t| vec![0.0; t.len()]).collect();
            self.second = self.first.clone();
        }
    }

    /// Applies one update to `params` in place.
    pub fn step(&mut self, params: &mut MlpParams, grads: &GradientSet) -> Result<()> {
        if !grads.matches(params) {
            return Err(Error::shape(
                "optimizer step",
                format!("gradients for layers {:?}", params.layer_sizes()),
                "incongruent gradient set",
            ));
        }
        if !grads.is_finite() {
            return Err(Error::NonFinite(format!(
                "gradient at optimizer step {}",
                self.step + 1
            )));
        }
        self.ensure_state(params);
        self.step += 1;
        let lr = self.lr;
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.tensors_mut().zip(grads.tensors()) {
                    for (w, dw) in p.iter_mut().zip(g) {
                        *w -= lr * dw;
                    }
                }
            }
            OptimizerKind::Adam { beta1, beta2, eps } => {
                let t = self.step as i32;
                let bc1 = 1.0 - beta1.powi(t);
                let bc2 = 1.0 - beta2.powi(t);
                let tensors = params
                    .tensors_mut()
                    .zip(grads.tensors())
                    .zip(self.first.iter_mut().zip(self.second.iter_mut()));
                for ((p, g), (m, v)) in tensors {
                    for i in 0..p.len() {
                        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                        let m_hat = m[i] / bc1;
                        let v_hat = v[i] / bc2;
                        p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
                    }
                }
            }
            OptimizerKind::CenteredRmsProp { alpha, eps } => {
                let tensors = params
                    .tensors_mut()
                    .zip(grads.tensors())
                    .zip(self.first.iter_mut().zip(self.second.iter_mut()));
                for ((p, g), (mean_g, mean_sq)) in tensors {
                    for i in 0..p.len() {
                        mean_sq[i] = alpha * mean_sq[i] + (1.0 - alpha) * g[i] * g[i];
                        mean_g[i] = alpha * mean_g[i] + (1.0 - alpha) * g[i];
                        // clamp guards against tiny negative variance from rounding
                        let var = (mean_sq[i] - mean_g[i] * mean_g[i]).max(0.0);
                        p[i] -= lr * g[i] / (var.sqrt() + eps);
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Matrix;

    fn scalar(theta: f64) -> MlpParams {
        MlpParams::from_parts(vec![Matrix::from_vec(1, 1, vec![theta]).unwrap()], vec![vec![0.0]])
            .unwrap()
    }

    fn grad(g: f64) -> GradientSet {
        GradientSet {
            weights: vec![Matrix::from_vec(1, 1, vec![g]).unwrap()],
            biases: vec![vec![0.0]],
        }
    }

    #[test]
    fn sgd_one_step() {
        let mut p = scalar(1.0);
        let mut opt = Optimizer::new(OptimizerKind::Sgd, 0.1).unwrap();
        opt.step(&mut p, &grad(2.0)).unwrap();
        assert!((p.weight(0)[(0, 0)] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn zero_gradient_leaves_params() {
        for kind in [
            OptimizerKind::Sgd,
            OptimizerKind::adam(),
            OptimizerKind::centered_rmsprop(),
        ] {
            let mut p = scalar(0.3);
            let mut opt = Optimizer::new(kind, 0.01).unwrap();
            opt.step(&mut p, &grad(0.0)).unwrap();
            assert_eq!(p.weight(0)[(0, 0)], 0.3, "{kind:?}");
        }
    }

    #[test]
    fn adam_matches_hand_stepped_trace() {
        // Hand-stepped recurrence: m1 = 0.1, v1 = 0.001, m̂ = v̂ = 1 -> step lr/(1+eps).
        // Step 2: m2 = 0.19, v2 = 0.001999, bias corrections 0.19 and 0.001999 -> m̂ = v̂ = 1.
        let lr: f64 = 0.001;
        let eps = 1e-8;
        let expected_1 = 1.0 - lr / (1.0 + eps);
        let expected_2 = expected_1 - lr * 1.0 / (1.0 + eps);
        let mut p = scalar(1.0);
        let mut opt = Optimizer::new(OptimizerKind::adam(), lr).unwrap();
        opt.step(&mut p, &grad(1.0)).unwrap();
        assert!((p.weight(0)[(0, 0)] - expected_1).abs() < 1e-15);
        opt.step(&mut p, &grad(1.0)).unwrap();
        assert!((p.weight(0)[(0, 0)] - expected_2).abs() < 1e-15);
        assert_eq!(opt.steps_taken(), 2);
    }

    #[test]
    fn centered_rmsprop_first_step() {
        // mean_sq = 0.05 g^2, mean_g = 0.05 g -> var = 0.05 g^2 - 0.0025 g^2 = 0.0475 g^2
        let g: f64 = 2.0;
        let lr = 0.01;
        let var: f64 = 0.0475 * g * g;
        let expected = 1.0 - lr * g / (var.sqrt() + 0.01);
        let mut p = scalar(1.0);
        let mut opt = Optimizer::new(OptimizerKind::centered_rmsprop(), lr).unwrap();
        opt.step(&mut p, &grad(g)).unwrap();
        assert!((p.weight(0)[(0, 0)] - expected).abs() < 1e-14);
    }

    #[test]
    fn non_finite_gradient_aborts() {
        let mut p = scalar(1.0);
        let mut opt = Optimizer::new(OptimizerKind::adam(), 0.01).unwrap();
        let err = opt.step(&mut p, &grad(f64::NAN)).unwrap_err();
        assert!(matches!(err, Error::NonFinite(_)));
        assert_eq!(p.weight(0)[(0, 0)], 1.0);
    }

    #[test]
    fn rejects_negative_lr() {
        assert!(Optimizer::new(OptimizerKind::Sgd, -1.0).is_err());
    }
}
