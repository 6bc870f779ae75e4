//! Speech Commands ingestion, SGD training, evaluation and checkpoints.
//!
//! Files are assigned to splits by a 32-bit FNV-1a hash of their base file
//! name (extension included) modulo 100: below 80 is train, below 90 is val,
//! the rest is test.

mod checkpoint;
mod eval;
mod ingest;
mod train;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::arch::ArchitectureSpec;
use crate::error::{Error, Result};
use crate::frontend::MfccMatrix;
use crate::tensor::Tensor;

pub use checkpoint::{load_checkpoint, save_checkpoint, sidecar_path, CheckpointMeta};
pub use eval::{evaluate, indicator, meets_threshold, predict, Prediction, DEFAULT_THRESHOLD};
pub use ingest::{ingest_speech_commands, Splits, BACKGROUND_NOISE_DIR};
pub use train::{train, EpochStats, History, TrainConfig};

pub const CLASS_NAMES: [&str; 12] = [
    "yes", "no", "up", "down", "left", "right", "on", "off", "stop", "go", "_silence_", "_unknown_",
];
pub const SILENCE: usize = 10;
pub const UNKNOWN: usize = 11;

/// The fixed 12-way class order; index `i` is the network's output `i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    names: Vec<String>,
}

impl Default for LabelMap {
    fn default() -> Self {
        LabelMap {
            names: CLASS_NAMES.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl LabelMap {
    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, index: usize) -> Option<&str> {
        self.names.get(index).map(String::as_str)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Target keywords map to themselves; every other word is `_unknown_`.
    pub fn label_for_word(&self, word: &str) -> usize {
        match self.index_of(word) {
            Some(i) if i < SILENCE => i,
            _ => UNKNOWN,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" | "validation" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::InvalidConfig(format!("unknown split `{other}` (train, val, test)"))),
        }
    }
}

pub fn fnv1a32(bytes: &[u8]) -> u32 {
    bytes.iter().fold(0x811c_9dc5u32, |h, &b| (h ^ u32::from(b)).wrapping_mul(0x0100_0193))
}

pub fn split_for(base_name: &str) -> Split {
    match fnv1a32(base_name.as_bytes()) % 100 {
        0..=79 => Split::Train,
        80..=89 => Split::Val,
        _ => Split::Test,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub features: MfccMatrix,
    pub label: usize,
    /// Relative path of the source clip, or `noise/<file>@<offset>` for silence crops.
    pub source: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub split: Split,
    pub examples: Vec<Example>,
}

impl Dataset {
    pub fn new(split: Split, examples: Vec<Example>) -> Self {
        Dataset { split, examples }
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn class_counts(&self) -> [usize; 12] {
        let mut counts = [0; 12];
        for ex in &self.examples {
            if let Some(c) = counts.get_mut(ex.label) {
                *c += 1;
            }
        }
        counts
    }

    /// First `n` examples.
    pub fn subset(&self, n: usize) -> Dataset {
        Dataset::new(self.split, self.examples.iter().take(n).cloned().collect())
    }

    /// Stacks the selected examples into `[N, 1, frames, coeffs]`.
    pub fn batch(&self, indices: &[usize]) -> Result<(Tensor, Vec<usize>)> {
        let first = indices
            .first()
            .map(|&i| &self.examples[i].features)
            .ok_or(Error::EmptyDataset)?;
        let (frames, coeffs) = (first.frame_count(), first.coeff_count());
        let mut data = Vec::with_capacity(indices.len() * frames * coeffs);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            let ex = &self.examples[i];
            if ex.features.frame_count() != frames || ex.features.coeff_count() != coeffs {
                return Err(Error::ShapeMismatch(format!(
                    "example {} is {}x{}, batch is {frames}x{coeffs}",
                    ex.source,
                    ex.features.frame_count(),
                    ex.features.coeff_count()
                )));
            }
            data.extend_from_slice(ex.features.values());
            labels.push(ex.label);
        }
        Ok((Tensor::new(vec![indices.len(), 1, frames, coeffs], data)?, labels))
    }

    /// Errors unless every example matches the network input `[1, frames, coeffs]`.
    pub fn check_input(&self, spec: &ArchitectureSpec) -> Result<()> {
        for ex in &self.examples {
            let shape = [1, ex.features.frame_count(), ex.features.coeff_count()];
            if shape != spec.input {
                return Err(Error::ShapeMismatch(format!(
                    "example {} has shape {:?}, network {} expects {:?}",
                    ex.source, shape, spec.name, spec.input
                )));
            }
            if ex.label >= spec.class_count() {
                return Err(Error::ShapeMismatch(format!(
                    "label {} out of range for {} classes",
                    ex.label,
                    spec.class_count()
                )));
            }
        }
        Ok(())
    }
}
