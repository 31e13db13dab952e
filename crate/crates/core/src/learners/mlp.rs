//! One-hidden-layer network: affine → ReLU → batch-norm → (dropout) → affine → sigmoid.
//!
//! The pre-sigmoid output is the margin. Training minimises the squared error
//! between the sigmoid output and the {0, 1} label with mini-batch SGD and
//! momentum; the learning rate decays once per epoch.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{require_both_classes, require_dim, Classifier, LabeledExample};
use crate::{rng, Error, Label, Result};

const BN_EPS: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpParams {
    /// Hidden width; `None` means `ceil(dim / 2)`.
    pub hidden: Option<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Per-epoch multiplicative learning-rate decay.
    pub decay: f64,
    pub momentum: f64,
    /// Probability of dropping a hidden unit during training.
    pub dropout: f64,
    /// Weight of the old value in the running batch-norm statistics.
    pub bn_momentum: f64,
}

impl Default for MlpParams {
    fn default() -> Self {
        Self {
            hidden: None,
            epochs: 50,
            batch_size: 8,
            learning_rate: 0.001,
            decay: 0.99,
            momentum: 0.95,
            dropout: 0.5,
            bn_momentum: 0.9,
        }
    }
}

impl MlpParams {
    /// Learning rate used during `epoch` (0-based).
    pub fn learning_rate_at(&self, epoch: usize) -> f64 {
        self.learning_rate * self.decay.powi(epoch as i32)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BatchNormMode {
    /// Normalise with the statistics of the current batch.
    Batch,
    /// Normalise with the running averages.
    Running,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub dim: usize,
    pub hidden: usize,
    /// `hidden × dim`, row per hidden unit.
    pub hidden_weights: Vec<f64>,
    pub hidden_bias: Vec<f64>,
    pub bn_scale: Vec<f64>,
    pub bn_shift: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub output_weights: Vec<f64>,
    pub output_bias: f64,
}

/// Gradients of the loss, one field per parameter group.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGradients {
    pub hidden_weights: Vec<f64>,
    pub hidden_bias: Vec<f64>,
    pub bn_scale: Vec<f64>,
    pub bn_shift: Vec<f64>,
    pub output_weights: Vec<f64>,
    pub output_bias: f64,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

struct Forward {
    pre: Vec<f64>,
    normalized: Vec<f64>,
    inv_std: Vec<f64>,
    activations: Vec<f64>,
    margins: Vec<f64>,
}

impl MlpModel {
    pub fn init(dim: usize, hidden: usize, r: &mut impl Rng) -> Self {
        let hidden_limit = (6.0 / dim.max(1) as f64).sqrt();
        let output_limit = (6.0 / (hidden + 1) as f64).sqrt();
        Self {
            dim,
            hidden,
            hidden_weights: (0..dim * hidden).map(|_| r.random_range(-hidden_limit..hidden_limit)).collect(),
            hidden_bias: vec![0.0; hidden],
            bn_scale: vec![1.0; hidden],
            bn_shift: vec![0.0; hidden],
            running_mean: vec![0.0; hidden],
            running_var: vec![1.0; hidden],
            output_weights: (0..hidden).map(|_| r.random_range(-output_limit..output_limit)).collect(),
            output_bias: 0.0,
        }
    }

    /// One hidden unit with zero weights; the output bias alone decides.
    pub fn constant(dim: usize, label: Label) -> Self {
        Self {
            dim,
            hidden: 1,
            hidden_weights: vec![0.0; dim],
            hidden_bias: vec![0.0],
            bn_scale: vec![1.0],
            bn_shift: vec![0.0],
            running_mean: vec![0.0],
            running_var: vec![1.0],
            output_weights: vec![0.0],
            output_bias: if label == 1 { 1.0 } else { -1.0 },
        }
    }

    /// Parameter groups in a fixed order, for gradient checks and optimisers.
    pub fn parameter_groups_mut(&mut self) -> [(&'static str, &mut [f64]); 6] {
        [
            ("hidden_weights", &mut self.hidden_weights[..]),
            ("hidden_bias", &mut self.hidden_bias[..]),
            ("bn_scale", &mut self.bn_scale[..]),
            ("bn_shift", &mut self.bn_shift[..]),
            ("output_weights", &mut self.output_weights[..]),
            ("output_bias", std::slice::from_mut(&mut self.output_bias)),
        ]
    }

    /// Pre-sigmoid output in inference mode.
    pub fn margin(&self, x: &[f64]) -> f64 {
        let mut z = self.output_bias;
        for j in 0..self.hidden {
            let w = &self.hidden_weights[j * self.dim..(j + 1) * self.dim];
            let a = (self.hidden_bias[j] + w.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()).max(0.0);
            let inv_std = 1.0 / (self.running_var[j] + BN_EPS).sqrt();
            let h = self.bn_scale[j] * (a - self.running_mean[j]) * inv_std + self.bn_shift[j];
            z += self.output_weights[j] * h;
        }
        z
    }

    fn forward(&self, xs: &[&[f64]], mode: BatchNormMode, mask: Option<&[f64]>) -> Forward {
        let (n, h, d) = (xs.len(), self.hidden, self.dim);
        let mut pre = vec![0.0; n * h];
        for (i, x) in xs.iter().enumerate() {
            for j in 0..h {
                let w = &self.hidden_weights[j * d..(j + 1) * d];
                let a = self.hidden_bias[j] + w.iter().zip(x.iter()).map(|(w, v)| w * v).sum::<f64>();
                pre[i * h + j] = a;
            }
        }
        let (mean, var) = match mode {
            BatchNormMode::Running => (self.running_mean.clone(), self.running_var.clone()),
            BatchNormMode::Batch => {
                let mut mean = vec![0.0; h];
                let mut var = vec![0.0; h];
                for j in 0..h {
                    mean[j] = (0..n).map(|i| pre[i * h + j].max(0.0)).sum::<f64>() / n as f64;
                    var[j] = (0..n).map(|i| (pre[i * h + j].max(0.0) - mean[j]).powi(2)).sum::<f64>() / n as f64;
                }
                (mean, var)
            }
        };
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + BN_EPS).sqrt()).collect();
        let mut normalized = vec![0.0; n * h];
        let mut activations = vec![0.0; n * h];
        let mut margins = vec![self.output_bias; n];
        for i in 0..n {
            for j in 0..h {
                let k = i * h + j;
                let xhat = (pre[k].max(0.0) - mean[j]) * inv_std[j];
                normalized[k] = xhat;
                let mut a = self.bn_scale[j] * xhat + self.bn_shift[j];
                if let Some(m) = mask {
                    a *= m[k];
                }
                activations[k] = a;
                margins[i] += self.output_weights[j] * a;
            }
        }
        Forward {
            pre,
            normalized,
            inv_std,
            activations,
            margins,
        }
    }

    /// Loss `(1/2n) Σ (sigmoid(z) − y)²` over a batch.
    pub fn loss(&self, xs: &[&[f64]], ys: &[Label], mode: BatchNormMode) -> f64 {
        let f = self.forward(xs, mode, None);
        f.margins
            .iter()
            .zip(ys)
            .map(|(&z, &y)| (sigmoid(z) - y as f64).powi(2))
            .sum::<f64>()
            / (2.0 * xs.len() as f64)
    }

    /// Loss and its gradient by backpropagation. `mask` holds per-unit
    /// dropout multipliers (`n × hidden`), already scaled by `1 / (1 − p)`.
    pub fn gradients(&self, xs: &[&[f64]], ys: &[Label], mode: BatchNormMode, mask: Option<&[f64]>) -> (f64, MlpGradients) {
        let (n, h, d) = (xs.len(), self.hidden, self.dim);
        let f = self.forward(xs, mode, mask);
        let nf = n as f64;
        let mut loss = 0.0;
        let mut dz = vec![0.0; n];
        for i in 0..n {
            let p = sigmoid(f.margins[i]);
            let err = p - ys[i] as f64;
            loss += err * err;
            dz[i] = err * p * (1.0 - p) / nf;
        }
        loss /= 2.0 * nf;

        let mut g = MlpGradients {
            hidden_weights: vec![0.0; h * d],
            hidden_bias: vec![0.0; h],
            bn_scale: vec![0.0; h],
            bn_shift: vec![0.0; h],
            output_weights: vec![0.0; h],
            output_bias: dz.iter().sum(),
        };
        let mut dxhat = vec![0.0; n * h];
        for i in 0..n {
            for j in 0..h {
                let k = i * h + j;
                g.output_weights[j] += dz[i] * f.activations[k];
                let mut dbn = dz[i] * self.output_weights[j];
                if let Some(m) = mask {
                    dbn *= m[k];
                }
                g.bn_scale[j] += dbn * f.normalized[k];
                g.bn_shift[j] += dbn;
                dxhat[k] = dbn * self.bn_scale[j];
            }
        }
        for j in 0..h {
            let (sum_dxhat, sum_dxhat_xhat) = (0..n).fold((0.0, 0.0), |(s, t), i| {
                let k = i * h + j;
                (s + dxhat[k], t + dxhat[k] * f.normalized[k])
            });
            for i in 0..n {
                let k = i * h + j;
                let drelu = match mode {
                    BatchNormMode::Running => dxhat[k] * f.inv_std[j],
                    BatchNormMode::Batch => {
                        f.inv_std[j] / nf * (nf * dxhat[k] - sum_dxhat - f.normalized[k] * sum_dxhat_xhat)
                    }
                };
                let dpre = if f.pre[k] > 0.0 { drelu } else { 0.0 };
                if dpre != 0.0 {
                    g.hidden_bias[j] += dpre;
                    let row = &mut g.hidden_weights[j * d..(j + 1) * d];
                    for (gw, x) in row.iter_mut().zip(xs[i].iter()) {
                        *gw += dpre * x;
                    }
                }
            }
        }
        (loss, g)
    }

    fn update_running_stats(&mut self, xs: &[&[f64]], momentum: f64) {
        let (n, h) = (xs.len() as f64, self.hidden);
        let f = self.forward(xs, BatchNormMode::Batch, None);
        for j in 0..h {
            let acts = (0..xs.len()).map(|i| f.pre[i * h + j].max(0.0));
            let mean = acts.clone().sum::<f64>() / n;
            let var = acts.map(|a| (a - mean).powi(2)).sum::<f64>() / n;
            self.running_mean[j] = momentum * self.running_mean[j] + (1.0 - momentum) * mean;
            self.running_var[j] = momentum * self.running_var[j] + (1.0 - momentum) * var;
        }
    }
}

impl Classifier for MlpModel {
    fn dim(&self) -> usize {
        self.dim
    }

    /// Match when the probability is at least 0.5, i.e. margin ≥ 0.
    fn predict_unchecked(&self, x: &[f64]) -> Label {
        (self.margin(x) >= 0.0) as Label
    }
}

/// `(margin, probability)` in inference mode.
pub fn mlp_margin(model: &MlpModel, x: &[f64]) -> Result<(f64, f64)> {
    require_dim(model.dim, x)?;
    let z = model.margin(x);
    Ok((z, sigmoid(z)))
}

pub fn train_mlp(examples: &[LabeledExample<'_>], params: &MlpParams, seed: u64) -> Result<MlpModel> {
    if examples.is_empty() {
        return Err(Error::invalid("cannot train on an empty set"));
    }
    require_both_classes(examples)?;
    let dim = examples[0].features.len();
    for e in examples {
        require_dim(dim, e.features)?;
    }
    let hidden = params.hidden.unwrap_or(dim.div_ceil(2));
    if hidden < 1 {
        return Err(Error::invalid("hidden width must be at least 1"));
    }
    if !(0.0..1.0).contains(&params.dropout) {
        return Err(Error::invalid("dropout must lie in [0, 1)"));
    }
    let mut r = rng::from_seed(seed);
    let mut model = MlpModel::init(dim, hidden, &mut r);
    let mut velocity: Vec<Vec<f64>> = model.parameter_groups_mut().iter().map(|(_, p)| vec![0.0; p.len()]).collect();
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let keep = 1.0 - params.dropout;
    for epoch in 0..params.epochs {
        let lr = params.learning_rate_at(epoch);
        order.shuffle(&mut r);
        for batch in order.chunks(params.batch_size.max(1)) {
            let xs: Vec<&[f64]> = batch.iter().map(|&i| examples[i].features).collect();
            let ys: Vec<Label> = batch.iter().map(|&i| examples[i].label).collect();
            let mask: Option<Vec<f64>> = (params.dropout > 0.0).then(|| {
                (0..xs.len() * hidden)
                    .map(|_| if r.random::<f64>() < keep { 1.0 / keep } else { 0.0 })
                    .collect()
            });
            let (_, g) = model.gradients(&xs, &ys, BatchNormMode::Batch, mask.as_deref());
            let grads: [&[f64]; 6] = [
                &g.hidden_weights,
                &g.hidden_bias,
                &g.bn_scale,
                &g.bn_shift,
                &g.output_weights,
                std::slice::from_ref(&g.output_bias),
            ];
            for (((_, params_), v), grad) in model.parameter_groups_mut().into_iter().zip(&mut velocity).zip(grads) {
                for ((p, v), g) in params_.iter_mut().zip(v.iter_mut()).zip(grad) {
                    *v = params.momentum * *v - lr * g;
                    *p += *v;
                }
            }
            model.update_running_stats(&xs, params.bn_momentum);
        }
    }
    Ok(model)
}
