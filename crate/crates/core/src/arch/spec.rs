use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::pool::pooled_dims;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LayerKind {
    Conv,
    AvgPool,
    Dense,
    Softmax,
}

impl fmt::Display for LayerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LayerKind::Conv => "conv",
            LayerKind::AvgPool => "avg-pool",
            LayerKind::Dense => "dense",
            LayerKind::Softmax => "softmax",
        })
    }
}

/// One row of an architecture table: `Type m r n Params`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerSpec {
    pub kind: LayerKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    /// `[pool_h, pool_w]`; absent on an avg-pool row means global pooling.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pool: Option<[usize; 2]>,
    /// Expected parameter count for this row, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<u64>,
}

impl LayerSpec {
    pub fn conv(m: usize, r: usize, n: usize) -> Self {
        LayerSpec {
            kind: LayerKind::Conv,
            m: Some(m),
            r: Some(r),
            n: Some(n),
            pool: None,
            params: None,
        }
    }

    pub fn avg_pool(pool_h: usize, pool_w: usize) -> Self {
        LayerSpec {
            pool: Some([pool_h, pool_w]),
            ..Self::global_pool()
        }
    }

    pub fn global_pool() -> Self {
        LayerSpec {
            kind: LayerKind::AvgPool,
            m: None,
            r: None,
            n: None,
            pool: None,
            params: None,
        }
    }

    pub fn dense(n: usize) -> Self {
        LayerSpec {
            kind: LayerKind::Dense,
            n: Some(n),
            ..Self::global_pool()
        }
    }

    pub fn softmax() -> Self {
        LayerSpec {
            kind: LayerKind::Softmax,
            ..Self::global_pool()
        }
    }

    pub fn with_params(mut self, params: u64) -> Self {
        self.params = Some(params);
        self
    }

    pub fn is_global_pool(&self) -> bool {
        self.kind == LayerKind::AvgPool && self.pool.is_none()
    }

    /// `(m, r, n)` of a conv row.
    pub fn conv_dims(&self) -> Option<(usize, usize, usize)> {
        match self.kind {
            LayerKind::Conv => Some((self.m?, self.r?, self.n?)),
            _ => None,
        }
    }
}

/// Shape of the value flowing between layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureShape {
    Map { channels: usize, h: usize, w: usize },
    Vector(usize),
}

/// A declarative network: input shape plus ordered layer rows.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchitectureSpec {
    pub name: String,
    /// `[channels, frames, coefficients]`
    pub input: [usize; 3],
    pub layers: Vec<LayerSpec>,
    /// Rounded total as printed in a reference table, e.g. `"43.7K"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reported_total: Option<String>,
}

pub const DEFAULT_INPUT: [usize; 3] = [1, 98, 40];

impl ArchitectureSpec {
    /// Checks row fields and channel chaining; returns the shape after every layer.
    pub fn validate(&self) -> Result<Vec<FeatureShape>> {
        let bad = |msg: String| Err(Error::MalformedSpec(format!("{}: {msg}", self.name)));
        let [c0, h0, w0] = self.input;
        if c0 == 0 || h0 == 0 || w0 == 0 {
            return bad(format!("input {:?} has an empty dimension", self.input));
        }
        let len = self.layers.len();
        if len < 3 {
            return bad("needs at least a conv, a dense and a softmax layer".into());
        }
        if self.layers[0].kind != LayerKind::Conv {
            return bad("first layer must be conv".into());
        }
        if self.layers[len - 2].kind != LayerKind::Dense || self.layers[len - 1].kind != LayerKind::Softmax {
            return bad("last two layers must be dense then softmax".into());
        }

        let mut shape = FeatureShape::Map { channels: c0, h: h0, w: w0 };
        let mut shapes = Vec::with_capacity(len);
        for (i, layer) in self.layers.iter().enumerate() {
            let unexpected = |field: &str| -> Result<()> {
                Err(Error::MalformedSpec(format!(
                    "{}: layer {i} ({}) must not set `{field}`",
                    self.name, layer.kind
                )))
            };
            shape = match layer.kind {
                LayerKind::Conv => {
                    if layer.pool.is_some() {
                        unexpected("pool")?;
                    }
                    let Some((m, r, n)) = layer.conv_dims() else {
                        return bad(format!("conv layer {i} needs m, r and n"));
                    };
                    if m == 0 || r == 0 || n == 0 {
                        return bad(format!("conv layer {i} has a zero dimension"));
                    }
                    match shape {
                        FeatureShape::Map { h, w, .. } => FeatureShape::Map { channels: n, h, w },
                        FeatureShape::Vector(_) => return bad(format!("conv layer {i} follows global pooling")),
                    }
                }
                LayerKind::AvgPool => {
                    if layer.m.is_some() || layer.r.is_some() {
                        unexpected("m/r")?;
                    }
                    if layer.n.is_some() {
                        unexpected("n")?;
                    }
                    let FeatureShape::Map { channels, h, w } = shape else {
                        return bad(format!("avg-pool layer {i} has no spatial input"));
                    };
                    match layer.pool {
                        None => FeatureShape::Vector(channels),
                        Some([ph, pw]) => {
                            if ph == 0 || pw == 0 || ph > h || pw > w {
                                return bad(format!("avg-pool layer {i}: {ph}×{pw} does not fit {h}×{w}"));
                            }
                            let (oh, ow) = pooled_dims(h, w, ph, pw);
                            FeatureShape::Map { channels, h: oh, w: ow }
                        }
                    }
                }
                LayerKind::Dense => {
                    if layer.m.is_some() || layer.r.is_some() {
                        unexpected("m/r")?;
                    }
                    if layer.pool.is_some() {
                        unexpected("pool")?;
                    }
                    let Some(n) = layer.n.filter(|&n| n > 0) else {
                        return bad(format!("dense layer {i} needs n ≥ 1"));
                    };
                    if i != len - 2 {
                        return bad(format!("dense layer {i} must be second to last"));
                    }
                    match shape {
                        FeatureShape::Vector(_) => FeatureShape::Vector(n),
                        FeatureShape::Map { .. } => {
                            return bad(format!("dense layer {i} needs a global avg-pool before it"))
                        }
                    }
                }
                LayerKind::Softmax => {
                    if layer.m.is_some() || layer.r.is_some() || layer.n.is_some() || layer.pool.is_some() {
                        unexpected("m/r/n/pool")?;
                    }
                    if i != len - 1 {
                        return bad(format!("softmax layer {i} must be last"));
                    }
                    shape
                }
            };
            shapes.push(shape);
        }
        Ok(shapes)
    }

    /// Input channel count of every layer that has weights (conv and dense).
    pub fn input_channels(&self) -> Vec<Option<usize>> {
        let mut channels = self.input[0];
        self.layers
            .iter()
            .map(|layer| match layer.kind {
                LayerKind::Conv | LayerKind::Dense => {
                    let cin = channels;
                    channels = layer.n.unwrap_or(0);
                    Some(cin)
                }
                _ => None,
            })
            .collect()
    }

    pub fn conv_indices(&self) -> Vec<usize> {
        self.layers
            .iter()
            .enumerate()
            .filter(|(_, l)| l.kind == LayerKind::Conv)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn class_count(&self) -> usize {
        self.layers
            .iter()
            .rev()
            .find(|l| l.kind == LayerKind::Dense)
            .and_then(|l| l.n)
            .unwrap_or(0)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: ArchitectureSpec = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }
}

pub fn serialize_spec(spec: &ArchitectureSpec) -> String {
    spec.to_json()
}

pub fn parse_spec(text: &str) -> Result<ArchitectureSpec> {
    ArchitectureSpec::from_json(text)
}
