//! Dense MLP substrate: forward and reverse-mode passes, losses and optimizers.

mod loss;
mod matrix;
mod mlp;
mod optim;

pub use loss::mse_loss;
pub use matrix::Matrix;
pub use mlp::{ForwardCache, GradientSet, MlpParams};
pub use optim::{Optimizer, OptimizerKind};
