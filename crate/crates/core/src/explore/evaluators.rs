use crate::arch::{build_network, infer_residual_topology, ArchitectureSpec};
use crate::data::{evaluate, train, Dataset, TrainConfig};
use crate::error::Result;

use super::search::{Evaluation, Evaluator};

/// Sum of the narrow widths of every bottleneck block.
pub fn narrow_width_sum(spec: &ArchitectureSpec) -> Result<usize> {
    Ok(infer_residual_topology(spec)?.narrow_widths(spec).iter().sum())
}

/// Accuracy from a closure over the spec; no training.
pub struct FnEvaluator<F>(pub F);

impl<F> Evaluator for FnEvaluator<F>
where
    F: Fn(&ArchitectureSpec) -> f64 + Sync,
{
    fn evaluate(&self, spec: &ArchitectureSpec, _seed: u64) -> Result<Evaluation> {
        Ok(Evaluation {
            val_accuracy: (self.0)(spec),
            network: None,
        })
    }
}

/// `min(1, base + narrow_width_sum / divisor)`, a closed-form stand-in for training.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WidthSumEvaluator {
    pub base: f64,
    pub divisor: f64,
}

impl Default for WidthSumEvaluator {
    fn default() -> Self {
        WidthSumEvaluator {
            base: 0.9,
            divisor: 1000.0,
        }
    }
}

impl Evaluator for WidthSumEvaluator {
    fn evaluate(&self, spec: &ArchitectureSpec, _seed: u64) -> Result<Evaluation> {
        let sum = narrow_width_sum(spec)? as f64;
        Ok(Evaluation {
            val_accuracy: (self.base + sum / self.divisor).min(1.0),
            network: None,
        })
    }
}

/// Trains each candidate from scratch and reports validation accuracy.
/// `full` (when set) is the longer recipe used by `reverify`.
pub struct TrainingEvaluator {
    pub train: Dataset,
    pub val: Dataset,
    pub proxy: TrainConfig,
    pub full: Option<TrainConfig>,
}

impl TrainingEvaluator {
    fn run(&self, spec: &ArchitectureSpec, seed: u64, cfg: &TrainConfig) -> Result<Evaluation> {
        let mut net = build_network(spec, seed)?;
        let cfg = TrainConfig { seed, ..cfg.clone() };
        train(&mut net, &self.train, None, &cfg)?;
        Ok(Evaluation {
            val_accuracy: evaluate(&net, &self.val)?,
            network: Some(net),
        })
    }
}

impl Evaluator for TrainingEvaluator {
    fn evaluate(&self, spec: &ArchitectureSpec, seed: u64) -> Result<Evaluation> {
        self.run(spec, seed, &self.proxy)
    }

    fn reverify(&self, spec: &ArchitectureSpec, seed: u64) -> Result<Evaluation> {
        self.run(spec, seed, self.full.as_ref().unwrap_or(&self.proxy))
    }
}
