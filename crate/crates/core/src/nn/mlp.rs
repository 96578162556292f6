use rand::Rng;

use super::matrix::matmul_acc;
use super::Matrix;
use crate::error::{Error, Result};

/// Weights and biases of a fully connected ReLU network with a linear output layer.
///
/// `weights[l]` has shape `(layer_sizes[l + 1], layer_sizes[l])` and `biases[l]` has
/// length `layer_sizes[l + 1]`. Cloning yields an independent, bitwise-equal copy, which
/// is how the target network is produced.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpParams {
    layer_sizes: Vec<usize>,
    weights: Vec<Matrix>,
    biases: Vec<Vec<f64>>,
}

/// Activations recorded during a forward pass, consumed by [`MlpParams::backward_cached`].
#[derive(Clone, Debug)]
pub struct ForwardCache {
    /// Input to each layer; `inputs[0]` is the batch itself.
    inputs: Vec<Matrix>,
    output: Matrix,
}

impl ForwardCache {
    pub fn output(&self) -> &Matrix {
        &self.output
    }
}

/// Per-tensor gradients, shape-congruent with the [`MlpParams`] they were computed for.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientSet {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
}

fn check_layer_sizes(layer_sizes: &[usize]) -> Result<()> {
    if layer_sizes.len() < 2 || layer_sizes.contains(&0) {
        return Err(Error::Config(format!(
            "layer sizes must have at least an input and an output dimension, all positive; got {layer_sizes:?}"
        )));
    }
    Ok(())
}

impl MlpParams {
    /// Uniform `[-1/sqrt(fan_in), 1/sqrt(fan_in)]` weights, zero biases.
    pub fn init<R: Rng + ?Sized>(layer_sizes: &[usize], rng: &mut R) -> Result<Self> {
        check_layer_sizes(layer_sizes)?;
        let mut weights = Vec::with_capacity(layer_sizes.len() - 1);
        let mut biases = Vec::with_capacity(layer_sizes.len() - 1);
        for pair in layer_sizes.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            let data = (0..fan_in * fan_out)
                .map(|_| rng.gen_range(-bound..=bound))
                .collect();
            weights.push(Matrix::from_vec(fan_out, fan_in, data)?);
            biases.push(vec![0.0; fan_out]);
        }
        Ok(MlpParams {
            layer_sizes: layer_sizes.to_vec(),
            weights,
            biases,
        })
    }

    pub fn zeros(layer_sizes: &[usize]) -> Result<Self> {
        check_layer_sizes(layer_sizes)?;
        let weights = layer_sizes
            .windows(2)
            .map(|p| Matrix::zeros(p[1], p[0]))
            .collect();
        let biases = layer_sizes[1..].iter().map(|&n| vec![0.0; n]).collect();
        Ok(MlpParams {
            layer_sizes: layer_sizes.to_vec(),
            weights,
            biases,
        })
    }

    pub fn from_parts(weights: Vec<Matrix>, biases: Vec<Vec<f64>>) -> Result<Self> {
        if weights.is_empty() || weights.len() != biases.len() {
            return Err(Error::shape(
                "MlpParams::from_parts",
                "one bias per weight matrix",
                format!("{} weights, {} biases", weights.len(), biases.len()),
            ));
        }
        let mut layer_sizes = vec![weights[0].cols()];
        for (w, b) in weights.iter().zip(&biases) {
            let fan_in = *layer_sizes.last().unwrap();
            if w.cols() != fan_in || b.len() != w.rows() {
                return Err(Error::shape(
                    "MlpParams::from_parts",
                    format!("({}, {fan_in}) weight with matching bias", w.rows()),
                    format!("{:?} weight, bias of {}", w.shape(), b.len()),
                ));
            }
            layer_sizes.push(w.rows());
        }
        check_layer_sizes(&layer_sizes)?;
        Ok(MlpParams {
            layer_sizes,
            weights,
            biases,
        })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn n_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn weight(&self, layer: usize) -> &Matrix {
        &self.weights[layer]
    }

    pub fn weight_mut(&mut self, layer: usize) -> &mut Matrix {
        &mut self.weights[layer]
    }

    pub fn bias(&self, layer: usize) -> &[f64] {
        &self.biases[layer]
    }

    pub fn bias_mut(&mut self, layer: usize) -> &mut [f64] {
        &mut self.biases[layer]
    }

    pub fn num_params(&self) -> usize {
        self.tensors().map(<[f64]>::len).sum()
    }

    /// Every parameter tensor as a flat slice, weights and bias interleaved per layer.
    pub fn tensors(&self) -> impl Iterator<Item = &[f64]> {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| [w.as_slice(), b.as_slice()])
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut [f64]> {
        self.weights
            .iter_mut()
            .zip(self.biases.iter_mut())
            .flat_map(|(w, b)| [w.as_mut_slice(), b.as_mut_slice()])
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().flatten().all(|v| v.is_finite())
    }

    fn check_input(&self, batch: &Matrix) -> Result<()> {
        if batch.cols() != self.input_dim() {
            return Err(Error::shape(
                "mlp forward",
                format!("{} input columns", self.input_dim()),
                format!("{} columns", batch.cols()),
            ));
        }
        Ok(())
    }

    pub fn forward(&self, batch: &Matrix) -> Result<Matrix> {
        self.check_input(batch)?;
        let mut act = batch.clone();
        for l in 0..self.n_layers() {
            act = self.layer(l, &act);
        }
        Ok(act)
    }

    /// Forward pass on a single observation.
    pub fn forward_one(&self, x: &[f64]) -> Result<Vec<f64>> {
        let batch = Matrix::from_vec(1, x.len(), x.to_vec())?;
        Ok(self.forward(&batch)?.as_slice().to_vec())
    }

    pub fn forward_cached(&self, batch: &Matrix) -> Result<ForwardCache> {
        self.check_input(batch)?;
        let mut inputs = Vec::with_capacity(self.n_layers());
        let mut act = batch.clone();
        for l in 0..self.n_layers() {
            let next = self.layer(l, &act);
            inputs.push(act);
            act = next;
        }
        Ok(ForwardCache {
            inputs,
            output: act,
        })
    }

    fn layer(&self, l: usize, input: &Matrix) -> Matrix {
        let w = &self.weights[l];
        let (n_out, n_in) = w.shape();
        let mut data = Vec::with_capacity(input.rows() * n_out);
        for _ in 0..input.rows() {
            data.extend_from_slice(&self.biases[l]);
        }
        matmul_acc(&mut data, input.as_slice(), w.transpose().as_slice(), input.rows(), n_in, n_out);
        if l + 1 < self.n_layers() {
            for z in &mut data {
                *z = z.max(0.0);
            }
        }
        Matrix::from_vec(input.rows(), n_out, data).expect("layer output shape")
    }

    /// Gradient of `sum(upstream ⊙ forward(batch))` with respect to every parameter.
    pub fn backward(&self, batch: &Matrix, upstream: &Matrix) -> Result<GradientSet> {
        let cache = self.forward_cached(batch)?;
        self.backward_cached(&cache, upstream)
    }

    pub fn backward_cached(&self, cache: &ForwardCache, upstream: &Matrix) -> Result<GradientSet> {
        if upstream.shape() != cache.output.shape() {
            return Err(Error::shape(
                "mlp backward",
                format!("{:?}", cache.output.shape()),
                format!("{:?}", upstream.shape()),
            ));
        }
        let n_layers = self.n_layers();
        let mut gw: Vec<Matrix> = Vec::with_capacity(n_layers);
        let mut gb: Vec<Vec<f64>> = Vec::with_capacity(n_layers);
        let mut delta = upstream.clone();
        for l in (0..n_layers).rev() {
            let w = &self.weights[l];
            let input = &cache.inputs[l];
            let (n_out, n_in) = w.shape();
            let batch = delta.rows();
            let mut grad_w = Matrix::zeros(n_out, n_in);
            let mut grad_b = vec![0.0; n_out];
            for d_row in delta.iter_rows() {
                for (g, &d) in grad_b.iter_mut().zip(d_row) {
                    *g += d;
                }
            }
            matmul_acc(
                grad_w.as_mut_slice(),
                delta.transpose().as_slice(),
                input.as_slice(),
                n_out,
                batch,
                n_in,
            );
            if l > 0 {
                let mut prev = Matrix::zeros(batch, n_in);
                matmul_acc(prev.as_mut_slice(), delta.as_slice(), w.as_slice(), batch, n_out, n_in);
                // input[l] is the ReLU output of layer l-1, so input > 0 iff the unit was active
                for (p, &a) in prev.as_mut_slice().iter_mut().zip(input.as_slice()) {
                    if a <= 0.0 {
                        *p = 0.0;
                    }
                }
                delta = prev;
            }
            gw.push(grad_w);
            gb.push(grad_b);
        }
        gw.reverse();
        gb.reverse();
        Ok(GradientSet {
            weights: gw,
            biases: gb,
        })
    }
}

impl GradientSet {
    pub fn zeros_like(params: &MlpParams) -> Self {
        GradientSet {
            weights: params
                .weights
                .iter()
                .map(|w| Matrix::zeros(w.rows(), w.cols()))
                .collect(),
            biases: params.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    pub fn tensors(&self) -> impl Iterator<Item = &[f64]> {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| [w.as_slice(), b.as_slice()])
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut [f64]> {
        self.weights
            .iter_mut()
            .zip(self.biases.iter_mut())
            .flat_map(|(w, b)| [w.as_mut_slice(), b.as_mut_slice()])
    }

    pub fn scale(&mut self, factor: f64) {
        for t in self.tensors_mut() {
            for x in t {
                *x *= factor;
            }
        }
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, other: &GradientSet, scale: f64) -> Result<()> {
        if !self.congruent_with(other) {
            return Err(Error::shape(
                "GradientSet::add_scaled",
                "congruent gradient sets",
                "mismatched tensors",
            ));
        }
        for (a, b) in self.tensors_mut().zip(other.tensors()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += scale * y;
            }
        }
        Ok(())
    }

    pub fn congruent_with(&self, other: &GradientSet) -> bool {
        self.weights.len() == other.weights.len()
            && self
                .weights
                .iter()
                .zip(&other.weights)
                .all(|(a, b)| a.shape() == b.shape())
            && self
                .biases
                .iter()
                .zip(&other.biases)
                .all(|(a, b)| a.len() == b.len())
    }

    pub fn matches(&self, params: &MlpParams) -> bool {
        self.weights.len() == params.weights.len()
            && self
                .weights
                .iter()
                .zip(&params.weights)
                .all(|(a, b)| a.shape() == b.shape())
            && self
                .biases
                .iter()
                .zip(&params.biases)
                .all(|(a, b)| a.len() == b.len())
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().flatten().all(|v| v.is_finite())
    }

    pub fn is_zero(&self) -> bool {
        self.tensors().flatten().all(|&v| v == 0.0)
    }
}
