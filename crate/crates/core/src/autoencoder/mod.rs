//! A symmetric fully connected autoencoder trained by plain SGD.
//!
//! Layer `i` maps `X_{i+1} = act(W_{i,i+1} X_i + b_{i,i+1})`. The default topology is
//! 200-100-50-25-50-100-200; the middle layer is the latent code. The reconstruction layer uses
//! the same activation unless [`NetworkParams::with_output_activation`] sets another.

mod checkpoint;
mod train;

use std::fmt;
use std::str::FromStr;

use rand::Rng;

pub use checkpoint::{read_checkpoint, write_checkpoint, write_text_export, CHECKPOINT_VERSION};
pub use train::{gradient, train_sgd, Gradients, TrainConfig, TrainOutcome};

use crate::error::{Error, Result};
use crate::seed::rng;

pub const DEFAULT_LAYER_DIMS: [usize; 7] = [200, 100, 50, 25, 50, 100, 200];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    Affine,
    Tanh,
    Relu,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Affine => z,
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `a`.
    #[inline]
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Affine => 1.0,
            Activation::Tanh => 1.0 - a * a,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Affine => "affine",
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "affine" | "linear" | "identity" => Ok(Activation::Affine),
            "tanh" => Ok(Activation::Tanh),
            "relu" => Ok(Activation::Relu),
            other => Err(Error::validation("activation", format!("unknown activation {other:?}"))),
        }
    }
}

/// Weights and biases of every layer transition.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    dims: Vec<usize>,
    /// `weights[l]` is `dims[l+1] x dims[l]`, row-major.
    pub(crate) weights: Vec<Vec<f64>>,
    pub(crate) biases: Vec<Vec<f64>>,
    activation: Activation,
    output_activation: Activation,
}

/// Checks that the topology is at least three layers, odd-length and mirror-symmetric.
pub fn validate_dims(dims: &[usize]) -> Result<()> {
    if dims.len() < 3 || dims.len() % 2 == 0 {
        return Err(Error::Config(format!(
            "layer dims must list an odd number (>= 3) of widths, got {dims:?}"
        )));
    }
    if dims.contains(&0) {
        return Err(Error::Config(format!("layer widths must be positive, got {dims:?}")));
    }
    if dims.iter().ne(dims.iter().rev()) {
        return Err(Error::Config(format!("layer dims must be symmetric about the code layer, got {dims:?}")));
    }
    Ok(())
}

impl NetworkParams {
    /// Every weight and bias drawn i.i.d. uniform on `[-1, 1]`.
    pub fn init(dims: &[usize], activation: Activation, seed: u64) -> Result<Self> {
        let mut rng = rng(seed);
        Self::from_fn(dims, activation, |_, _| rng.random_range(-1.0..=1.0))
    }

    pub fn zeros(dims: &[usize], activation: Activation) -> Result<Self> {
        Self::from_fn(dims, activation, |_, _| 0.0)
    }

    /// Builds parameters from `f(layer, flat_index)`; weights of a layer come before its biases
    /// and layers are visited in order. Bias indices are offset by the layer's weight count.
    pub fn from_fn(dims: &[usize], activation: Activation, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        validate_dims(dims)?;
        let mut weights = Vec::with_capacity(dims.len() - 1);
        let mut biases = Vec::with_capacity(dims.len() - 1);
        for l in 0..dims.len() - 1 {
            let n = dims[l + 1] * dims[l];
            weights.push((0..n).map(|i| f(l, i)).collect());
            biases.push((0..dims[l + 1]).map(|i| f(l, n + i)).collect());
        }
        Ok(Self {
            dims: dims.to_vec(),
            weights,
            biases,
            activation,
            output_activation: activation,
        })
    }

    pub(crate) fn from_parts(
        dims: Vec<usize>,
        activation: Activation,
        output_activation: Activation,
        weights: Vec<Vec<f64>>,
        biases: Vec<Vec<f64>>,
    ) -> Result<Self> {
        validate_dims(&dims)?;
        for l in 0..dims.len() - 1 {
            let (w, b) = (weights.get(l), biases.get(l));
            if w.map(Vec::len) != Some(dims[l + 1] * dims[l]) || b.map(Vec::len) != Some(dims[l + 1]) {
                return Err(Error::Format(format!("layer {l} parameter sizes do not match dims {dims:?}")));
            }
        }
        if weights.len() != dims.len() - 1 || biases.len() != dims.len() - 1 {
            return Err(Error::Format("wrong number of layers".into()));
        }
        Ok(Self {
            dims,
            weights,
            biases,
            activation,
            output_activation,
        })
    }

    /// Replaces the activation of the last (reconstruction) transition.
    pub fn with_output_activation(mut self, activation: Activation) -> Self {
        self.output_activation = activation;
        self
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn output_activation(&self) -> Activation {
        self.output_activation
    }

    /// Activation applied after transition `l`.
    #[inline]
    pub fn activation_of(&self, l: usize) -> Activation {
        if l + 1 == self.n_transitions() {
            self.output_activation
        } else {
            self.activation
        }
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    /// Index of the code layer in `dims`.
    pub fn code_layer(&self) -> usize {
        self.dims.len() / 2
    }

    pub fn code_dim(&self) -> usize {
        self.dims[self.code_layer()]
    }

    pub fn n_transitions(&self) -> usize {
        self.dims.len() - 1
    }

    /// Shape `(rows, cols)` of the weight matrix of transition `l`.
    pub fn weight_shape(&self, l: usize) -> (usize, usize) {
        (self.dims[l + 1], self.dims[l])
    }

    pub fn weights(&self, l: usize) -> &[f64] {
        &self.weights[l]
    }

    pub fn biases(&self, l: usize) -> &[f64] {
        &self.biases[l]
    }

    pub fn weights_mut(&mut self, l: usize) -> &mut [f64] {
        &mut self.weights[l]
    }

    pub fn biases_mut(&mut self, l: usize) -> &mut [f64] {
        &mut self.biases[l]
    }

    /// Iterates every parameter value, weights before biases within each layer.
    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| w.iter().chain(b.iter()).copied())
    }

    /// Applies transitions `from..to` to `x`.
    fn propagate(&self, x: &[f64], from: usize, to: usize) -> Vec<f64> {
        let mut cur = x.to_vec();
        for l in from..to {
            let mut next = vec![0.0; self.dims[l + 1]];
            affine(&self.weights[l], &self.biases[l], &cur, &mut next);
            let act = self.activation_of(l);
            next.iter_mut().for_each(|v| *v = act.apply(*v));
            cur = next;
        }
        cur
    }

    /// Maps an input to its latent code (layers L1 to L4 in the default topology).
    pub fn encode(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.input_dim(), x.len())?;
        Ok(self.propagate(x, 0, self.code_layer()))
    }

    /// Maps a latent code back to input space.
    pub fn decode(&self, z: &[f64]) -> Result<Vec<f64>> {
        check_len(self.code_dim(), z.len())?;
        Ok(self.propagate(z, self.code_layer(), self.n_transitions()))
    }

    pub fn reconstruct(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.input_dim(), x.len())?;
        Ok(self.propagate(x, 0, self.n_transitions()))
    }
}

fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::Shape { expected, actual })
    }
}

/// `out = W x + b` for row-major `W`.
#[inline]
pub(crate) fn affine(w: &[f64], b: &[f64], x: &[f64], out: &mut [f64]) {
    let cols = x.len();
    for (r, o) in out.iter_mut().enumerate() {
        let row = &w[r * cols..(r + 1) * cols];
        *o = b[r] + dot(row, x);
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    // Four accumulators let the compiler vectorize; the summation order is fixed.
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        for k in 0..4 {
            acc[k] += a[4 * i + k] * b[4 * i + k];
        }
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in 4 * chunks..a.len() {
        s += a[i] * b[i];
    }
    s
}

/// Sum of squared residuals `(x - x_hat)^T (x - x_hat)`.
pub fn reconstruction_error(x: &[f64], x_hat: &[f64]) -> Result<f64> {
    check_len(x.len(), x_hat.len())?;
    Ok(x.iter().zip(x_hat).map(|(a, b)| (a - b) * (a - b)).sum())
}
