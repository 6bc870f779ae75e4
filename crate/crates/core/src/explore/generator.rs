use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::arch::{infer_residual_topology, ArchitectureSpec, LayerSpec};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WidthDistribution {
    pub mean: f64,
    pub spread: f64,
}

impl WidthDistribution {
    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        if self.spread > 0.0 {
            Normal::new(self.mean, self.spread).map_or(self.mean, |d| d.sample(rng))
        } else {
            self.mean
        }
    }
}

/// Distributions the generator samples from, plus the prototype they vary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorState {
    pub base: ArchitectureSpec,
    /// One distribution per block position, `max_blocks` long.
    pub widths: Vec<WidthDistribution>,
    pub block_count: WidthDistribution,
    pub min_blocks: usize,
    pub max_blocks: usize,
    pub generation: usize,
    /// Skip-connection width; narrow widths are clamped to `[1, width - 1]`.
    width: usize,
    /// Layer index where the blocks begin and the index just past them.
    body: (usize, usize),
}

impl GeneratorState {
    /// Means at the prototype's widths, block count in `[k - 2, k + 2]`
    /// (at least one), width spread a quarter of the skip width.
    pub fn from_prototype(base: &ArchitectureSpec) -> Result<Self> {
        let topo = infer_residual_topology(base)?;
        let k = topo.blocks.len();
        Self::with_range(base, k.saturating_sub(2).max(1), k + 2, topo.width as f64 / 4.0)
    }

    pub fn with_range(base: &ArchitectureSpec, min_blocks: usize, max_blocks: usize, spread: f64) -> Result<Self> {
        let topo = infer_residual_topology(base)?;
        if min_blocks > max_blocks || max_blocks == 0 {
            return Err(Error::InvalidConfig(format!("block range {min_blocks}..={max_blocks} is empty")));
        }
        if topo.width < 2 {
            return Err(Error::MalformedSpec(format!("{}: width {} leaves no room for a bottleneck", base.name, topo.width)));
        }
        for pair in topo.blocks.windows(2) {
            if pair[0].1 + 1 != pair[1].0 {
                return Err(Error::MalformedSpec(format!(
                    "{}: layers between blocks at {} and {} are not supported",
                    base.name, pair[0].1, pair[1].0
                )));
            }
        }
        let body = match (topo.blocks.first(), topo.blocks.last()) {
            (Some(&(first, _)), Some(&(_, last))) => (first, last + 1),
            _ => (topo.stem + 1, topo.stem + 1),
        };
        let narrows = topo.narrow_widths(base);
        let fallback = if narrows.is_empty() {
            topo.width as f64 / 2.0
        } else {
            narrows.iter().sum::<usize>() as f64 / narrows.len() as f64
        };
        let widths = (0..max_blocks)
            .map(|i| WidthDistribution {
                mean: narrows.get(i).map_or(fallback, |&w| w as f64),
                spread,
            })
            .collect();
        Ok(GeneratorState {
            base: base.clone(),
            widths,
            block_count: WidthDistribution {
                mean: (topo.blocks.len() as f64).clamp(min_blocks as f64, max_blocks as f64),
                spread: 1.0,
            },
            min_blocks,
            max_blocks,
            generation: 0,
            width: topo.width,
            body,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    fn clamp_width(&self, w: f64) -> usize {
        (w.round().max(1.0) as usize).min(self.width - 1)
    }

    /// Moves every mean onto `narrows` (and its block count), then shrinks all spreads.
    pub fn recenter(&mut self, narrows: &[usize], shrink: f64) {
        if !narrows.is_empty() {
            self.block_count.mean = narrows.len() as f64;
            for (dist, &w) in self.widths.iter_mut().zip(narrows) {
                dist.mean = w as f64;
            }
        }
        self.shrink(shrink);
    }

    pub fn shrink(&mut self, factor: f64) {
        for d in &mut self.widths {
            d.spread *= factor;
        }
        self.block_count.spread *= factor;
    }
}

/// Samples a block count and one narrow width per block, keeping every other
/// layer of the prototype. Deterministic per `(state, seed)`.
pub fn generate(state: &GeneratorState, seed: u64) -> ArchitectureSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = (state.block_count.sample(&mut rng).round().max(0.0) as usize).clamp(state.min_blocks, state.max_blocks);
    let narrows: Vec<usize> = state.widths[..count]
        .iter()
        .map(|d| state.clamp_width(d.sample(&mut rng)))
        .collect();
    let strip = |l: &LayerSpec| LayerSpec { params: None, ..l.clone() };
    let base = &state.base;
    let mut layers: Vec<LayerSpec> = base.layers[..state.body.0].iter().map(strip).collect();
    for &n in &narrows {
        layers.push(LayerSpec::conv(3, 3, n));
        layers.push(LayerSpec::conv(3, 3, state.width));
    }
    layers.extend(base.layers[state.body.1..].iter().map(strip));
    let tag = narrows.iter().map(|n| n.to_string()).collect::<Vec<_>>().join("-");
    ArchitectureSpec {
        name: format!("{}-g{}-{}", base.name, state.generation, tag),
        input: base.input,
        layers,
        reported_total: None,
    }
}
