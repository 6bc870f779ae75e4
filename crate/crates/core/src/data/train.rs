use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::arch::Network;
use crate::error::{Error, Result};
use crate::nn::{argmax, softmax_cross_entropy};

use super::eval::evaluate;
use super::Dataset;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// Multiplier applied at each milestone.
    pub lr_decay: f64,
    /// Epochs (0-based) at which the decay applies; `None` means half and
    /// three quarters of `epochs`, rounded up.
    pub milestones: Option<Vec<usize>>,
    pub momentum: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub weight_decay: f64,
    /// Stop after the first epoch whose training accuracy reaches this value.
    pub target_train_accuracy: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.1,
            lr_decay: 0.1,
            milestones: None,
            momentum: 0.9,
            batch_size: 64,
            epochs: 30,
            seed: 0,
            weight_decay: 1e-5,
            target_train_accuracy: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidConfig(what.to_string()));
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return bad("learning_rate must be finite and non-negative");
        }
        if !(self.lr_decay > 0.0 && self.lr_decay.is_finite()) {
            return bad("lr_decay must be positive");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad("momentum must be in [0, 1)");
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return bad("weight_decay must be finite and non-negative");
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return bad("batch_size and epochs must be positive");
        }
        if let Some(t) = self.target_train_accuracy {
            if !(0.0..=1.0).contains(&t) {
                return bad("target_train_accuracy must be in [0, 1]");
            }
        }
        Ok(())
    }

    pub fn resolved_milestones(&self) -> Vec<usize> {
        self.milestones
            .clone()
            .unwrap_or_else(|| vec![self.epochs.div_ceil(2), (self.epochs * 3).div_ceil(4)])
    }

    pub fn learning_rate_at(&self, epoch: usize) -> f64 {
        let passed = self.resolved_milestones().iter().filter(|&&m| m <= epoch).count();
        self.learning_rate * self.lr_decay.powi(passed as i32)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub learning_rate: f64,
    /// Mean cross-entropy over the epoch's examples.
    pub loss: f64,
    /// Accuracy of the train-mode forward passes made during the epoch.
    pub train_accuracy: f64,
    pub val_accuracy: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochStats>,
}

impl History {
    pub fn last(&self) -> Option<&EpochStats> {
        self.epochs.last()
    }
}

/// Mini-batch SGD with momentum and L2 weight decay:
/// `v = momentum * v + (g + decay * w)`, `w -= lr * v`.
pub fn train(net: &mut Network, train_set: &Dataset, val_set: Option<&Dataset>, cfg: &TrainConfig) -> Result<History> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::EmptyDataset);
    }
    train_set.check_input(net.spec())?;
    if let Some(val) = val_set {
        val.check_input(net.spec())?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut velocity: Vec<Vec<f32>> = net.params_mut().iter().map(|p| vec![0.0; p.len()]).collect();
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut history = History::default();
    for epoch in 0..cfg.epochs {
        let lr = cfg.learning_rate_at(epoch);
        order.shuffle(&mut rng);
        let (mut loss_sum, mut correct) = (0.0f64, 0usize);
        for chunk in order.chunks(cfg.batch_size) {
            let (input, labels) = train_set.batch(chunk)?;
            let (logits, cache) = net.forward_train(&input)?;
            let (loss, grad, probs) = softmax_cross_entropy(&logits, &labels)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch });
            }
            loss_sum += f64::from(loss) * chunk.len() as f64;
            let k = probs.shape()[1];
            correct += probs
                .data()
                .chunks(k)
                .zip(&labels)
                .filter(|(row, &l)| argmax(row) == l)
                .count();
            let grads = net.backward(&cache, &grad)?;
            sgd_step(net.params_mut(), &grads.0, &mut velocity, lr, cfg);
        }
        let val_accuracy = match val_set {
            Some(v) if !v.is_empty() => Some(evaluate(&*net, v)?),
            _ => None,
        };
        let stats = EpochStats {
            epoch,
            learning_rate: lr,
            loss: loss_sum / train_set.len() as f64,
            train_accuracy: correct as f64 / train_set.len() as f64,
            val_accuracy,
        };
        let done = cfg.target_train_accuracy.is_some_and(|t| stats.train_accuracy >= t);
        history.epochs.push(stats);
        if done {
            break;
        }
    }
    Ok(history)
}

fn sgd_step(params: Vec<&mut [f32]>, grads: &[Vec<f32>], velocity: &mut [Vec<f32>], lr: f64, cfg: &TrainConfig) {
    let (lr, mu, wd) = (lr as f32, cfg.momentum as f32, cfg.weight_decay as f32);
    for ((p, g), v) in params.into_iter().zip(grads).zip(velocity) {
        for ((w, &g), v) in p.iter_mut().zip(g).zip(v.iter_mut()) {
            *v = mu * *v + g + wd * *w;
            *w -= lr * *v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_schedule() {
        let cfg = TrainConfig {
            epochs: 40,
            ..TrainConfig::default()
        };
        assert_eq!(cfg.resolved_milestones(), vec![20, 30]);
        assert!((cfg.learning_rate_at(19) - 0.1).abs() < 1e-12);
        assert!((cfg.learning_rate_at(20) - 0.01).abs() < 1e-12);
        assert!((cfg.learning_rate_at(39) - 0.001).abs() < 1e-12);
    }

    #[test]
    fn invalid_configs() {
        for cfg in [
            TrainConfig { batch_size: 0, ..Default::default() },
            TrainConfig { momentum: 1.0, ..Default::default() },
            TrainConfig { learning_rate: f64::NAN, ..Default::default() },
        ] {
            assert!(cfg.validate().is_err());
        }
    }

    #[test]
    fn plain_gradient_step() {
        let cfg = TrainConfig {
            momentum: 0.0,
            weight_decay: 0.0,
            ..Default::default()
        };
        let mut a = [1.0f32, -2.0];
        let mut v = vec![vec![0.0; 2]];
        sgd_step(vec![&mut a[..]], &[vec![0.5, -1.0]], &mut v, 0.1, &cfg);
        assert_eq!(a, [1.0 - 0.05, -2.0 + 0.1]);
    }
}
