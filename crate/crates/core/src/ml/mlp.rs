use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// One-hidden-layer perceptron: inputs → tanh hidden layer → softmax outputs.
///
/// All weights live in one flat vector laid out as
/// `[w1 (hidden × inputs), b1 (hidden), w2 (outputs × hidden), b2 (outputs)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub n_in: usize,
    pub n_hidden: usize,
    pub n_out: usize,
    pub params: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlpTrainConfig {
    pub hidden: usize,
    pub lr: f64,
    pub momentum: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
}

impl Default for MlpTrainConfig {
    fn default() -> Self {
        Self {
            hidden: 20,
            lr: 0.05,
            momentum: 0.9,
            max_epochs: 3000,
            patience: 20,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlpFitReport {
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub best_val_loss: f64,
}

fn log_sum_exp(z: &[f64]) -> f64 {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

impl Mlp {
    pub fn param_count(n_in: usize, n_hidden: usize, n_out: usize) -> usize {
        n_hidden * n_in + n_hidden + n_out * n_hidden + n_out
    }

    /// Weights drawn uniformly from [−0.5, 0.5].
    pub fn init(n_in: usize, n_hidden: usize, n_out: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = (0..Self::param_count(n_in, n_hidden, n_out))
            .map(|_| rng.random_range(-0.5..=0.5))
            .collect();
        Self {
            n_in,
            n_hidden,
            n_out,
            params,
        }
    }

    fn offsets(&self) -> (usize, usize, usize) {
        let b1 = self.n_hidden * self.n_in;
        let w2 = b1 + self.n_hidden;
        let b2 = w2 + self.n_out * self.n_hidden;
        (b1, w2, b2)
    }

    /// Hidden activations and output logits for one input.
    fn forward(&self, x: &[f64], hidden: &mut [f64], logits: &mut [f64]) {
        let (b1, w2, b2) = self.offsets();
        let p = &self.params;
        for (h, a) in hidden.iter_mut().enumerate() {
            let row = &p[h * self.n_in..(h + 1) * self.n_in];
            let s: f64 = row.iter().zip(x).map(|(w, v)| w * v).sum();
            *a = (s + p[b1 + h]).tanh();
        }
        for (o, z) in logits.iter_mut().enumerate() {
            let row = &p[w2 + o * self.n_hidden..w2 + (o + 1) * self.n_hidden];
            let s: f64 = row.iter().zip(hidden.iter()).map(|(w, a)| w * a).sum();
            *z = s + p[b2 + o];
        }
    }

    pub fn predict_proba(&self, x: &[f64]) -> Vec<f64> {
        let mut hidden = vec![0.0; self.n_hidden];
        let mut logits = vec![0.0; self.n_out];
        self.forward(x, &mut hidden, &mut logits);
        super::softmax(&logits)
    }

    /// Mean cross-entropy over the batch.
    pub fn loss(&self, xs: &[Vec<f64>], ys: &[usize]) -> f64 {
        let mut hidden = vec![0.0; self.n_hidden];
        let mut logits = vec![0.0; self.n_out];
        let total: f64 = xs
            .iter()
            .zip(ys)
            .map(|(x, &y)| {
                self.forward(x, &mut hidden, &mut logits);
                log_sum_exp(&logits) - logits[y]
            })
            .sum();
        total / xs.len() as f64
    }

    /// Mean cross-entropy and its backpropagated gradient.
    pub fn loss_and_gradient(&self, xs: &[Vec<f64>], ys: &[usize]) -> (f64, Vec<f64>) {
        let (b1, w2, b2) = self.offsets();
        let p = &self.params;
        let mut grad = vec![0.0; p.len()];
        let mut hidden = vec![0.0; self.n_hidden];
        let mut logits = vec![0.0; self.n_out];
        let mut delta_h = vec![0.0; self.n_hidden];
        let mut total = 0.0;
        for (x, &y) in xs.iter().zip(ys) {
            self.forward(x, &mut hidden, &mut logits);
            let lse = log_sum_exp(&logits);
            total += lse - logits[y];
            delta_h.iter_mut().for_each(|d| *d = 0.0);
            for o in 0..self.n_out {
                let dz = (logits[o] - lse).exp() - if o == y { 1.0 } else { 0.0 };
                grad[b2 + o] += dz;
                let row = w2 + o * self.n_hidden;
                for h in 0..self.n_hidden {
                    grad[row + h] += dz * hidden[h];
                    delta_h[h] += dz * p[row + h];
                }
            }
            for h in 0..self.n_hidden {
                let dpre = delta_h[h] * (1.0 - hidden[h] * hidden[h]);
                grad[b1 + h] += dpre;
                let row = h * self.n_in;
                for (j, v) in x.iter().enumerate() {
                    grad[row + j] += dpre * v;
                }
            }
        }
        let n = xs.len() as f64;
        grad.iter_mut().for_each(|g| *g /= n);
        (total / n, grad)
    }

    /// Full-batch momentum gradient descent with early stopping on validation loss.
    ///
    /// Returns the weights from the epoch with the lowest validation loss.
    pub fn fit(
        train_x: &[Vec<f64>],
        train_y: &[usize],
        val_x: &[Vec<f64>],
        val_y: &[usize],
        n_classes: usize,
        config: &MlpTrainConfig,
    ) -> Result<(Self, MlpFitReport)> {
        super::check_training_set(train_x, train_y, n_classes)?;
        if val_x.is_empty() || val_x.len() != val_y.len() {
            return Err(Error::Fit("validation set must be non-empty".into()));
        }
        if config.hidden == 0 || config.max_epochs == 0 {
            return Err(Error::Config("hidden and max_epochs must be >= 1".into()));
        }
        if !(config.lr.is_finite() && config.lr > 0.0) {
            return Err(Error::Config(format!("learning rate must be > 0, got {}", config.lr)));
        }
        let mut model = Self::init(train_x[0].len(), config.hidden, n_classes, config.seed);
        let mut velocity = vec![0.0; model.params.len()];
        let mut best = model.params.clone();
        let mut report = MlpFitReport {
            epochs_run: 0,
            best_epoch: 0,
            best_val_loss: model.loss(val_x, val_y),
        };
        let mut stale = 0;
        for epoch in 1..=config.max_epochs {
            let (loss, grad) = model.loss_and_gradient(train_x, train_y);
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Divergence { epoch, lr: config.lr });
            }
            for ((w, v), g) in model.params.iter_mut().zip(&mut velocity).zip(&grad) {
                *v = config.momentum * *v - config.lr * g;
                *w += *v;
            }
            let val_loss = model.loss(val_x, val_y);
            if !val_loss.is_finite() {
                return Err(Error::Divergence { epoch, lr: config.lr });
            }
            report.epochs_run = epoch;
            if val_loss < report.best_val_loss {
                report.best_val_loss = val_loss;
                report.best_epoch = epoch;
                best.copy_from_slice(&model.params);
                stale = 0;
            } else {
                stale += 1;
                if stale >= config.patience {
                    break;
                }
            }
        }
        model.params = best;
        Ok((model, report))
    }
}

/// Central-difference gradient of the mean cross-entropy.
pub fn numeric_gradient(model: &Mlp, xs: &[Vec<f64>], ys: &[usize], step: f64) -> Vec<f64> {
    let mut probe = model.clone();
    (0..model.params.len())
        .map(|i| {
            let w = model.params[i];
            probe.params[i] = w + step;
            let up = probe.loss(xs, ys);
            probe.params[i] = w - step;
            let down = probe.loss(xs, ys);
            probe.params[i] = w;
            (up - down) / (2.0 * step)
        })
        .collect()
}

/// Largest `|a − n| / max(|a|, |n|, 1e-6)` over all components.
pub fn compare_gradients(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-6))
        .fold(0.0, f64::max)
}

pub const GRADIENT_CHECK_STEP: f64 = 1e-5;

pub fn gradient_check(model: &Mlp, xs: &[Vec<f64>], ys: &[usize]) -> Result<f64> {
    if xs.is_empty() || xs.len() != ys.len() {
        return Err(Error::Domain("gradient check needs a non-empty batch".into()));
    }
    let (_, analytic) = model.loss_and_gradient(xs, ys);
    let numeric = numeric_gradient(model, xs, ys, GRADIENT_CHECK_STEP);
    Ok(compare_gradients(&analytic, &numeric))
}
