use super::Matrix;
use crate::error::{Error, Result};

/// Mean squared error over every element, with its gradient with respect to `pred`.
pub fn mse_loss(pred: &Matrix, target: &Matrix) -> Result<(f64, Matrix)> {
    if pred.shape() != target.shape() {
        return Err(Error::shape(
            "mse_loss",
            format!("{:?}", pred.shape()),
            format!("{:?}", target.shape()),
        ));
    }
    let n = pred.as_slice().len();
    if n == 0 {
        return Ok((0.0, pred.clone()));
    }
    let scale = 1.0 / n as f64;
    let mut grad = Matrix::zeros(pred.rows(), pred.cols());
    let mut loss = 0.0;
    for ((g, p), t) in grad
        .as_mut_slice()
        .iter_mut()
        .zip(pred.as_slice())
        .zip(target.as_slice())
    {
        let diff = p - t;
        loss += diff * diff;
        *g = 2.0 * diff * scale;
    }
    Ok((loss * scale, grad))
}
