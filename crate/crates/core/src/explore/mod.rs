//! Constrained design exploration: sample width and depth variants of a
//! prototype, score them, and keep only those meeting the requirements.
//!
//! The search is a simple stand-in, not a generative-synthesis method: each
//! generation samples bottleneck widths and block counts from per-block
//! normal distributions, drops candidates that fail the requirements, then
//! recenters the distributions on the best candidate found so far and shrinks
//! their spread.

mod evaluators;
mod generator;
mod search;

use serde::{Deserialize, Serialize};

use crate::arch::{ArchitectureSpec, FeatureShape, LayerKind};
use crate::error::{Error, Result};

pub use evaluators::{narrow_width_sum, FnEvaluator, TrainingEvaluator, WidthSumEvaluator};
pub use generator::{generate, GeneratorState, WidthDistribution};
pub use search::{explore, Budget, Candidate, Evaluation, Evaluator, Exploration};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Requirements {
    pub min_val_accuracy: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_params: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_macs: Option<u64>,
}

impl Default for Requirements {
    fn default() -> Self {
        Requirements {
            min_val_accuracy: 0.95,
            max_params: None,
            max_macs: None,
        }
    }
}

impl Requirements {
    pub fn validate(&self) -> Result<()> {
        if !(self.min_val_accuracy > 0.0 && self.min_val_accuracy <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "min_val_accuracy {} must be in (0, 1]",
                self.min_val_accuracy
            )));
        }
        Ok(())
    }

    pub fn satisfied_by(&self, m: &Metrics) -> bool {
        m.val_accuracy >= self.min_val_accuracy
            && self.max_params.is_none_or(|p| m.param_count <= p)
            && self.max_macs.is_none_or(|p| m.mac_count <= p)
    }
}

/// `scale * log10(acc^accuracy_exponent / (params_M^param_exponent * macs_M^mac_exponent))`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UConfig {
    pub accuracy_exponent: f64,
    pub param_exponent: f64,
    pub mac_exponent: f64,
    pub scale: f64,
}

impl Default for UConfig {
    fn default() -> Self {
        UConfig {
            accuracy_exponent: 2.0,
            param_exponent: 0.5,
            mac_exponent: 0.5,
            scale: 20.0,
        }
    }
}

impl UConfig {
    pub fn validate(&self) -> Result<()> {
        let exps = [self.accuracy_exponent, self.param_exponent, self.mac_exponent];
        if exps.iter().any(|e| !(e.is_finite() && *e >= 0.0)) || !self.scale.is_finite() || self.scale <= 0.0 {
            return Err(Error::InvalidConfig(
                "U exponents must be finite and non-negative and scale positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub val_accuracy: f64,
    pub param_count: u64,
    pub mac_count: u64,
}

const MILLION_FLOOR: f64 = 1e-6;

pub fn universal_performance(m: &Metrics, cfg: &UConfig) -> Result<f64> {
    if !(m.val_accuracy > 0.0 && m.val_accuracy <= 1.0) {
        return Err(Error::InvalidMetrics(format!("accuracy {} outside (0, 1]", m.val_accuracy)));
    }
    let params = (m.param_count as f64 / 1e6).max(MILLION_FLOOR);
    let macs = (m.mac_count as f64 / 1e6).max(MILLION_FLOOR);
    Ok(cfg.scale
        * (cfg.accuracy_exponent * m.val_accuracy.log10()
            - cfg.param_exponent * params.log10()
            - cfg.mac_exponent * macs.log10()))
}

/// Multiply-accumulates of one forward pass on a `[C, H, W]` input:
/// `m*r*Cin*Cout*H*W` per conv (same padding) and `in*out` for dense.
pub fn estimate_macs(spec: &ArchitectureSpec, input: [usize; 3]) -> Result<u64> {
    if input.contains(&0) {
        return Err(Error::InvalidShape(format!("input {input:?} has an empty dimension")));
    }
    let resized = ArchitectureSpec {
        input,
        ..spec.clone()
    };
    let shapes = resized.validate()?;
    let mut prev = FeatureShape::Map {
        channels: input[0],
        h: input[1],
        w: input[2],
    };
    let mut total = 0u64;
    for (layer, shape) in resized.layers.iter().zip(shapes) {
        total += match (layer.kind, prev, shape) {
            (LayerKind::Conv, FeatureShape::Map { channels: cin, .. }, FeatureShape::Map { channels: cout, h, w }) => {
                let (m, r, _) = layer.conv_dims().unwrap_or_default();
                (m * r * cin * cout * h * w) as u64
            }
            (LayerKind::Dense, FeatureShape::Vector(i), FeatureShape::Vector(o)) => (i * o) as u64,
            _ => 0,
        };
        prev = shape;
    }
    Ok(total)
}
