use rand::seq::SliceRandom;

use super::{affine, check_len, NetworkParams};
use crate::error::{Error, Result};
use crate::seed::rng;

/// Gradient of the reconstruction error, shaped like [`NetworkParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    fn zeros_like(p: &NetworkParams) -> Self {
        Self {
            weights: p.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: p.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| w.iter().chain(b.iter()).copied())
    }
}

/// Reusable buffers for one forward/backward pass.
struct Workspace {
    /// `acts[0]` is the input, `acts[l + 1]` the output of transition `l`.
    acts: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
    upstream: Vec<f64>,
    delta: Vec<f64>,
    prev: Vec<f64>,
}

impl Workspace {
    fn new(p: &NetworkParams) -> Self {
        let widest = *p.dims().iter().max().unwrap();
        Self {
            acts: p.dims().iter().map(|&d| vec![0.0; d]).collect(),
            pre: p.dims()[1..].iter().map(|&d| vec![0.0; d]).collect(),
            upstream: Vec::with_capacity(widest),
            delta: Vec::with_capacity(widest),
            prev: Vec::with_capacity(widest),
        }
    }

    /// Forward pass; returns the reconstruction error.
    fn forward(&mut self, p: &NetworkParams, x: &[f64]) -> f64 {
        self.acts[0].copy_from_slice(x);
        for l in 0..p.n_transitions() {
            let act = p.activation_of(l);
            let (head, tail) = self.acts.split_at_mut(l + 1);
            affine(&p.weights[l], &p.biases[l], &head[l], &mut self.pre[l]);
            for (a, &z) in tail[0].iter_mut().zip(&self.pre[l]) {
                *a = act.apply(z);
            }
        }
        let out = &self.acts[p.n_transitions()];
        out.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum()
    }

    /// Seeds `upstream` with dE/d(output) = 2 (x_hat - x).
    fn seed_upstream(&mut self, p: &NetworkParams, x: &[f64]) {
        let out = &self.acts[p.n_transitions()];
        self.upstream.clear();
        self.upstream.extend(out.iter().zip(x).map(|(a, b)| 2.0 * (a - b)));
    }

    /// Turns `upstream` (dE/d activation) into `delta` (dE/d pre-activation) for layer `l`.
    fn layer_delta(&mut self, p: &NetworkParams, l: usize) {
        let act = p.activation_of(l);
        self.delta.clear();
        self.delta.extend(
            self.upstream
                .iter()
                .zip(&self.pre[l])
                .zip(&self.acts[l + 1])
                .map(|((u, &z), &a)| u * act.derivative(z, a)),
        );
    }
}

/// Exact gradient of the reconstruction error of `x` with respect to every parameter.
///
/// Returns the error alongside the gradient.
pub fn gradient(p: &NetworkParams, x: &[f64]) -> Result<(f64, Gradients)> {
    check_len(p.input_dim(), x.len())?;
    let mut ws = Workspace::new(p);
    let mut grads = Gradients::zeros_like(p);
    let loss = ws.forward(p, x);
    ws.seed_upstream(p, x);
    for l in (0..p.n_transitions()).rev() {
        ws.layer_delta(p, l);
        let cols = p.dims()[l];
        let w = &p.weights[l];
        let a_in = &ws.acts[l];
        let gw = &mut grads.weights[l];
        grads.biases[l].copy_from_slice(&ws.delta);
        for (r, &d) in ws.delta.iter().enumerate() {
            for c in 0..cols {
                gw[r * cols + c] = d * a_in[c];
            }
        }
        if l > 0 {
            ws.prev.clear();
            ws.prev.resize(cols, 0.0);
            for (r, &d) in ws.delta.iter().enumerate() {
                let row = &w[r * cols..(r + 1) * cols];
                for (pv, &wv) in ws.prev.iter_mut().zip(row) {
                    *pv += wv * d;
                }
            }
            std::mem::swap(&mut ws.upstream, &mut ws.prev);
        }
    }
    Ok((loss, grads))
}

/// One SGD update on a single sample; identical to `p - lr * gradient(p, x)`.
fn sgd_step(p: &mut NetworkParams, ws: &mut Workspace, x: &[f64], lr: f64) -> f64 {
    let loss = ws.forward(p, x);
    ws.seed_upstream(p, x);
    for l in (0..p.n_transitions()).rev() {
        ws.layer_delta(p, l);
        let cols = p.dims()[l];
        let a_in = &ws.acts[l];
        let w = &mut p.weights[l];
        let propagate = l > 0;
        if propagate {
            ws.prev.clear();
            ws.prev.resize(cols, 0.0);
        }
        for (r, &d) in ws.delta.iter().enumerate() {
            let row = &mut w[r * cols..(r + 1) * cols];
            if propagate {
                for (pv, &wv) in ws.prev.iter_mut().zip(row.iter()) {
                    *pv += wv * d;
                }
            }
            for (wv, &a) in row.iter_mut().zip(a_in) {
                *wv -= lr * (d * a);
            }
        }
        for (b, &d) in p.biases[l].iter_mut().zip(&ws.delta) {
            *b -= lr * d;
        }
        if propagate {
            std::mem::swap(&mut ws.upstream, &mut ws.prev);
        }
    }
    loss
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    pub shuffle: bool,
    /// Training stops once successive epoch-mean losses differ by less than this.
    pub stop_tolerance: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            epochs: 500,
            seed: 0,
            shuffle: true,
            stop_tolerance: 1e-5,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::validation("learning_rate", "must be positive"));
        }
        if self.epochs == 0 {
            return Err(Error::validation("epochs", "must be at least 1"));
        }
        if !(self.stop_tolerance >= 0.0) {
            return Err(Error::validation("stop_tolerance", "must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub params: NetworkParams,
    /// Mean reconstruction error of each epoch, measured before each sample's update.
    pub loss_curve: Vec<f64>,
}

/// Trains with batch-size-1 SGD over a seeded shuffle of the dataset.
pub fn train_sgd<V: AsRef<[f64]>>(params: NetworkParams, dataset: &[V], cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::InsufficientData("training set is empty".into()));
    }
    for v in dataset {
        check_len(params.input_dim(), v.as_ref().len())?;
    }
    let mut params = params;
    let mut ws = Workspace::new(&params);
    let mut rng = rng(cfg.seed);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut curve = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        if cfg.shuffle {
            order.shuffle(&mut rng);
        }
        let mut total = 0.0;
        for &i in &order {
            total += sgd_step(&mut params, &mut ws, dataset[i].as_ref(), cfg.learning_rate);
            if !total.is_finite() {
                return Err(Error::Diverged { epoch });
            }
        }
        let mean = total / dataset.len() as f64;
        let converged = curve.last().is_some_and(|&prev: &f64| (prev - mean).abs() < cfg.stop_tolerance);
        curve.push(mean);
        if converged {
            break;
        }
    }
    Ok(TrainOutcome {
        params,
        loss_curve: curve,
    })
}
