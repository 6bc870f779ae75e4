use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::arch::{ArchitectureSpec, Network};
use crate::error::{Error, Result};

use super::TrainConfig;

/// JSON stored next to an ESNW checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub spec: ArchitectureSpec,
    pub epoch: usize,
    pub val_accuracy: Option<f64>,
    pub config: TrainConfig,
}

/// `model.esnw` → `model.json`
pub fn sidecar_path(weights: &Path) -> PathBuf {
    weights.with_extension("json")
}

pub fn save_checkpoint(weights: impl AsRef<Path>, net: &Network, meta: &CheckpointMeta) -> Result<()> {
    let weights = weights.as_ref();
    net.save_weights(weights)?;
    let side = sidecar_path(weights);
    let text = serde_json::to_string_pretty(meta).map_err(|e| Error::Format(e.to_string()))?;
    fs::write(&side, text + "\n").map_err(|e| Error::io(&side, e))
}

pub fn load_checkpoint(weights: impl AsRef<Path>) -> Result<(Network, CheckpointMeta)> {
    let weights = weights.as_ref();
    let side = sidecar_path(weights);
    let text = fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
    let meta: CheckpointMeta = serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", side.display())))?;
    meta.spec.validate()?;
    let mut net = Network::zeroed(&meta.spec)?;
    net.load_weights(weights)?;
    Ok((net, meta))
}
