//! Minibatch training through time with the surrogate gradient.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::snn::network::{cross_entropy, GradBuffers, Network, Trace};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 16,
            learning_rate: 0.01,
            epochs: 10,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn check(&self) -> Result<()> {
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::Config("batch size and epochs must be positive".into()));
        }
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::Config("learning rate must be finite and >= 0".into()));
        }
        Ok(())
    }
}

/// Loss, accuracy and spike rate over a set of samples.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalStats {
    pub loss: f64,
    pub accuracy: f64,
    /// Mean module spikes per sample.
    pub spikes_per_sample: f64,
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val: EvalStats,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochLog>,
    /// Validation stats after the last epoch.
    pub final_val: EvalStats,
}

/// Adam state over the flat parameter vector.
#[derive(Clone, Debug)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: i32,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(len: usize, lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: vec![0.0; len],
            v: vec![0.0; len],
        }
    }

    pub fn update(&mut self, params: &mut [f64], grad: &[f64]) {
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            params[i] -= self.lr * mh / (vh.sqrt() + self.eps);
        }
    }
}

/// Forward-only pass over `indices`.
pub fn evaluate(net: &Network, data: &Dataset, indices: &[usize]) -> Result<EvalStats> {
    let mut trace = Trace::default();
    let mut loss = 0.0;
    let mut correct = 0usize;
    let mut spikes = 0u64;
    for &i in indices {
        net.forward(data.sample(i), &mut trace)?;
        let y = data.labels[i];
        loss += cross_entropy(&trace.logits, y).0;
        let pred = argmax(&trace.logits);
        correct += usize::from(pred == y);
        spikes += trace.module_spikes.iter().sum::<u64>();
    }
    let n = indices.len().max(1) as f64;
    Ok(EvalStats {
        loss: loss / n,
        accuracy: correct as f64 / n,
        spikes_per_sample: spikes as f64 / n,
        samples: indices.len(),
    })
}

fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Trains `net` in place and reports validation statistics per epoch.
/// Deterministic given `cfg.seed`.
pub fn train(net: &mut Network, data: &Dataset, cfg: &TrainConfig) -> Result<TrainReport> {
    cfg.check()?;
    if data.train.is_empty() || data.val.is_empty() {
        return Err(Error::Config("dataset needs non-empty train and validation splits".into()));
    }
    if data.classes != net.classes() {
        return Err(Error::Config(format!(
            "dataset has {} classes, network reads out {}",
            data.classes,
            net.classes()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut opt = Adam::new(net.params().len(), cfg.learning_rate);
    let mut order = data.train.clone();
    let mut grad = vec![0.0; net.params().len()];
    let mut trace = Trace::default();
    let mut buf = GradBuffers::default();
    let mut epochs = Vec::with_capacity(cfg.epochs);
    let mut last_finite = f64::NAN;

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                if net.forward(data.sample(i), &mut trace).is_err() {
                    return Err(Error::Divergence {
                        epoch,
                        last_finite_loss: last_finite,
                    });
                }
                total += net.backward(&trace, data.labels[i], scale, &mut grad, &mut buf);
            }
            if grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Divergence {
                    epoch,
                    last_finite_loss: last_finite,
                });
            }
            opt.update(net.params_mut(), &grad);
        }
        let train_loss = total / order.len() as f64;
        let val = match evaluate(net, data, &data.val) {
            Ok(v) if v.loss.is_finite() => v,
            _ => {
                return Err(Error::Divergence {
                    epoch,
                    last_finite_loss: last_finite,
                })
            }
        };
        last_finite = val.loss;
        epochs.push(EpochLog {
            epoch,
            train_loss,
            val,
        });
    }
    let final_val = epochs.last().map(|e| e.val).expect("at least one epoch");
    Ok(TrainReport { epochs, final_val })
}
