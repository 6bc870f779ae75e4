use serde::Serialize;

use crate::error::{Error, Result};

use super::spec::{ArchitectureSpec, LayerKind};

/// Grouping of a spec's conv rows into stem, identity-skip bottleneck blocks,
/// and the layers after the last block. All values are layer indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ResidualTopology {
    pub stem: usize,
    /// `(narrow_conv, wide_conv)` pairs, each adjacent in the layer list.
    pub blocks: Vec<(usize, usize)>,
    pub tail: Vec<usize>,
    /// Channel width carried by the skip connections (the stem's `n`).
    pub width: usize,
}

impl ResidualTopology {
    pub fn block_starting_at(&self, layer: usize) -> Option<(usize, usize)> {
        self.blocks.iter().copied().find(|&(narrow, _)| narrow == layer)
    }

    /// Narrow widths of the blocks in order.
    pub fn narrow_widths(&self, spec: &ArchitectureSpec) -> Vec<usize> {
        self.blocks
            .iter()
            .map(|&(narrow, _)| spec.layers[narrow].n.unwrap_or(0))
            .collect()
    }
}

/// After the stem, a conv narrower than the running width that is immediately
/// followed by a conv restoring that width forms a block. At most one further
/// conv may follow the blocks, and it must be the last conv (the tail).
pub fn infer_residual_topology(spec: &ArchitectureSpec) -> Result<ResidualTopology> {
    spec.validate()?;
    let malformed = |msg: String| Error::MalformedSpec(format!("{}: {msg}", spec.name));
    let convs = spec.conv_indices();
    let stem = convs[0];
    let width = spec.layers[stem].n.unwrap_or(0);
    let n_of = |i: usize| spec.layers[i].n.unwrap_or(0);

    let mut blocks = Vec::new();
    let mut k = 1;
    while k < convs.len() {
        let narrow = convs[k];
        let is_last = k + 1 == convs.len();
        if !is_last {
            let wide = convs[k + 1];
            if n_of(narrow) < width && n_of(wide) == width {
                if wide != narrow + 1 {
                    return Err(malformed(format!(
                        "layers {narrow} and {wide} would form a block but are not adjacent"
                    )));
                }
                blocks.push((narrow, wide));
                k += 2;
                continue;
            }
            return Err(malformed(format!(
                "conv at layer {narrow} (n = {}) fits no wide–narrow–wide grouping at width {width}",
                n_of(narrow)
            )));
        }
        // final conv not part of a block
        break;
    }

    let after = blocks.last().map_or(stem, |&(_, wide)| wide);
    let tail: Vec<usize> = (after + 1..spec.layers.len()).collect();
    if let Some(&pos) = tail
        .iter()
        .filter(|&&i| spec.layers[i].kind == LayerKind::Conv)
        .nth(1)
    {
        return Err(malformed(format!("unexpected extra conv at layer {pos}")));
    }
    Ok(ResidualTopology {
        stem,
        blocks,
        tail,
        width,
    })
}
