//! Instantiated networks: parameters, train/infer forward passes, backward
//! pass, and the batch-norm-folded inference variant.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::nn::{
    avg_pool2d, avg_pool2d_backward, dense_backward, dense_forward, fold_batchnorm, global_avg_pool,
    global_avg_pool_backward, relu_backward, relu_forward, residual_block_forward, softmax, BatchNormLayer,
    ConvBn, ConvBnCache, ConvLayer, CountParams, DenseLayer, FoldedConv, ParamMode, ResidualBlock,
    ResidualCache,
};
use crate::tensor::Tensor;

use super::spec::{ArchitectureSpec, LayerKind};
use super::topology::{infer_residual_topology, ResidualTopology};

#[derive(Debug, Clone, PartialEq)]
pub enum Stage {
    /// conv → bn → relu without a skip (stem and tail convs).
    ConvBnRelu { layer: usize, unit: ConvBn },
    Residual { layers: (usize, usize), block: ResidualBlock },
    AvgPool { pool_h: usize, pool_w: usize },
    GlobalAvgPool,
    Dense { layer: usize, dense: DenseLayer },
    Softmax,
}

#[derive(Debug, Clone)]
enum StageCache {
    ConvBnRelu(ConvBnCache),
    Residual(ResidualCache),
    Pool(Vec<usize>),
    Dense(Tensor),
    None,
}

/// Activations kept by [`Network::forward_train`] for the backward pass.
#[derive(Debug, Clone)]
pub struct TrainCache {
    stages: Vec<StageCache>,
}

/// Gradients in the order of [`Network::params_mut`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients(pub Vec<Vec<f32>>);

/// Anything that maps a `[N, C, H, W]` batch to `[N, K]` class probabilities.
pub trait Classifier {
    fn spec(&self) -> &ArchitectureSpec;

    fn predict_proba(&self, batch: &Tensor) -> Result<Tensor>;

    fn class_count(&self) -> usize {
        self.spec().class_count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    spec: ArchitectureSpec,
    topology: ResidualTopology,
    stages: Vec<Stage>,
}

fn conv_bn(spec: &ArchitectureSpec, layer: usize, in_channels: usize) -> ConvBn {
    let (m, r, n) = spec.layers[layer].conv_dims().expect("validated conv row");
    ConvBn {
        conv: ConvLayer::zeros(in_channels, n, m, r),
        bn: BatchNormLayer::new(n),
    }
}

/// Reshapes `[C, H, W]` to `[1, C, H, W]` and checks against the spec input.
fn as_batch(spec: &ArchitectureSpec, input: &Tensor) -> Result<Tensor> {
    let (n, c, h, w) = input.dims4()?;
    if [c, h, w] != spec.input {
        return Err(Error::ShapeMismatch(format!(
            "network {} expects [N, {}, {}, {}], got {:?}",
            spec.name,
            spec.input[0],
            spec.input[1],
            spec.input[2],
            input.shape()
        )));
    }
    if input.rank() == 4 {
        Ok(input.clone())
    } else {
        input.clone().reshape(&[n, c, h, w])
    }
}

impl Network {
    /// All-zero weights, unit batch-norm; the layout `build` fills in.
    pub fn zeroed(spec: &ArchitectureSpec) -> Result<Self> {
        let topology = infer_residual_topology(spec)?;
        let channels = spec.input_channels();
        let mut stages = Vec::new();
        let mut i = 0;
        while i < spec.layers.len() {
            let layer = &spec.layers[i];
            let stage = match layer.kind {
                LayerKind::Conv => {
                    let cin = channels[i].expect("conv has input channels");
                    if let Some((narrow, wide)) = topology.block_starting_at(i) {
                        let a = conv_bn(spec, narrow, cin);
                        let b = conv_bn(spec, wide, a.out_channels());
                        i = wide;
                        Stage::Residual {
                            layers: (narrow, wide),
                            block: ResidualBlock::new(a, b)?,
                        }
                    } else {
                        Stage::ConvBnRelu {
                            layer: i,
                            unit: conv_bn(spec, i, cin),
                        }
                    }
                }
                LayerKind::AvgPool => match layer.pool {
                    Some([pool_h, pool_w]) => Stage::AvgPool { pool_h, pool_w },
                    None => Stage::GlobalAvgPool,
                },
                LayerKind::Dense => Stage::Dense {
                    layer: i,
                    dense: DenseLayer::zeros(channels[i].expect("dense has inputs"), layer.n.unwrap_or(0)),
                },
                LayerKind::Softmax => Stage::Softmax,
            };
            stages.push(stage);
            i += 1;
        }
        Ok(Network {
            spec: spec.clone(),
            topology,
            stages,
        })
    }

    /// He-initialized network; weights are drawn in layer order from a
    /// ChaCha8 stream seeded with `seed`.
    pub fn build(spec: &ArchitectureSpec, seed: u64) -> Result<Self> {
        let mut net = Self::zeroed(spec)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut he = |conv_or_dense: (&mut Tensor, usize)| {
            let (weights, fan_in) = conv_or_dense;
            let normal = Normal::new(0.0f32, (2.0 / fan_in as f32).sqrt()).expect("positive std");
            weights.data_mut().iter_mut().for_each(|w| *w = normal.sample(&mut rng));
        };
        for stage in &mut net.stages {
            match stage {
                Stage::ConvBnRelu { unit, .. } => he(conv_init(&mut unit.conv)),
                Stage::Residual { block, .. } => {
                    he(conv_init(&mut block.a.conv));
                    he(conv_init(&mut block.b.conv));
                }
                Stage::Dense { dense, .. } => he((&mut dense.weights, dense.in_features)),
                _ => {}
            }
        }
        Ok(net)
    }

    pub fn spec(&self) -> &ArchitectureSpec {
        &self.spec
    }

    pub fn topology(&self) -> &ResidualTopology {
        &self.topology
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    pub fn stages_mut(&mut self) -> &mut [Stage] {
        &mut self.stages
    }

    pub fn param_count(&self, mode: ParamMode) -> u64 {
        self.count_params(mode)
    }

    /// Inference-mode logits `[N, K]`.
    pub fn forward_logits(&self, input: &Tensor) -> Result<Tensor> {
        let mut x = as_batch(&self.spec, input)?;
        for stage in &self.stages {
            x = match stage {
                Stage::ConvBnRelu { unit, .. } => relu_forward(&unit.forward_infer(&x)?),
                Stage::Residual { block, .. } => residual_block_forward(&x, block)?,
                Stage::AvgPool { pool_h, pool_w } => avg_pool2d(&x, *pool_h, *pool_w)?,
                Stage::GlobalAvgPool => global_avg_pool(&x)?,
                Stage::Dense { dense, .. } => dense_forward(&x, dense)?,
                Stage::Softmax => x,
            };
        }
        Ok(x)
    }

    /// Inference-mode class probabilities `[N, K]`.
    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        softmax(&self.forward_logits(input)?)
    }

    /// Train-mode logits (batch statistics, running stats updated).
    pub fn forward_train(&mut self, input: &Tensor) -> Result<(Tensor, TrainCache)> {
        let mut x = as_batch(&self.spec, input)?;
        let mut caches = Vec::with_capacity(self.stages.len());
        for stage in &mut self.stages {
            let (next, cache) = match stage {
                Stage::ConvBnRelu { unit, .. } => {
                    let (out, cache) = unit.forward_train(&x)?;
                    (relu_forward(&out), StageCache::ConvBnRelu(cache))
                }
                Stage::Residual { block, .. } => {
                    let (out, cache) = block.forward_train(&x)?;
                    (out, StageCache::Residual(cache))
                }
                Stage::AvgPool { pool_h, pool_w } => {
                    (avg_pool2d(&x, *pool_h, *pool_w)?, StageCache::Pool(x.shape().to_vec()))
                }
                Stage::GlobalAvgPool => (global_avg_pool(&x)?, StageCache::Pool(x.shape().to_vec())),
                Stage::Dense { dense, .. } => {
                    let out = dense_forward(&x, dense)?;
                    (out, StageCache::Dense(x))
                }
                Stage::Softmax => (x, StageCache::None),
            };
            x = next;
            caches.push(cache);
        }
        Ok((x, TrainCache { stages: caches }))
    }

    /// Backpropagates `grad_logits` (`[N, K]`) through a train-mode pass.
    pub fn backward(&self, cache: &TrainCache, grad_logits: &Tensor) -> Result<Gradients> {
        let mut grad = grad_logits.clone();
        let mut per_stage: Vec<Vec<Vec<f32>>> = Vec::with_capacity(self.stages.len());
        for (stage, cache) in self.stages.iter().zip(&cache.stages).rev() {
            let (next, grads) = match (stage, cache) {
                (Stage::ConvBnRelu { unit, .. }, StageCache::ConvBnRelu(c)) => {
                    let g = relu_backward(&unit.replay(c)?, &grad)?;
                    let (gi, gp) = unit.backward(c, &g)?;
                    (gi, vec![gp.weights.into_data(), gp.gamma, gp.beta])
                }
                (Stage::Residual { block, .. }, StageCache::Residual(c)) => {
                    let (gi, gp) = block.backward(c, &grad)?;
                    (
                        gi,
                        vec![
                            gp.a.weights.into_data(),
                            gp.a.gamma,
                            gp.a.beta,
                            gp.b.weights.into_data(),
                            gp.b.gamma,
                            gp.b.beta,
                        ],
                    )
                }
                (Stage::AvgPool { pool_h, pool_w }, StageCache::Pool(shape)) => {
                    (avg_pool2d_backward(shape, *pool_h, *pool_w, &grad)?, vec![])
                }
                (Stage::GlobalAvgPool, StageCache::Pool(shape)) => (global_avg_pool_backward(shape, &grad)?, vec![]),
                (Stage::Dense { dense, .. }, StageCache::Dense(input)) => {
                    let (gi, gw) = dense_backward(input, dense, &grad)?;
                    (gi, vec![gw.into_data()])
                }
                (Stage::Softmax, StageCache::None) => (grad, vec![]),
                _ => return Err(Error::ShapeMismatch("train cache does not match network".into())),
            };
            grad = next;
            per_stage.push(grads);
        }
        Ok(Gradients(per_stage.into_iter().rev().flatten().collect()))
    }

    /// Trainable parameter slices in a fixed order matching [`Gradients`].
    pub fn params_mut(&mut self) -> Vec<&mut [f32]> {
        let mut out: Vec<&mut [f32]> = Vec::new();
        for stage in &mut self.stages {
            match stage {
                Stage::ConvBnRelu { unit, .. } => {
                    out.push(unit.conv.weights.data_mut());
                    out.push(&mut unit.bn.gamma);
                    out.push(&mut unit.bn.beta);
                }
                Stage::Residual { block, .. } => {
                    for u in [&mut block.a, &mut block.b] {
                        out.push(u.conv.weights.data_mut());
                        out.push(&mut u.bn.gamma);
                        out.push(&mut u.bn.beta);
                    }
                }
                Stage::Dense { dense, .. } => out.push(dense.weights.data_mut()),
                _ => {}
            }
        }
        out
    }

    /// Conv+bn units keyed by their spec layer index, in layer order.
    pub fn conv_units(&self) -> Vec<(usize, &ConvBn)> {
        let mut out = Vec::new();
        for stage in &self.stages {
            match stage {
                Stage::ConvBnRelu { layer, unit } => out.push((*layer, unit)),
                Stage::Residual { layers, block } => {
                    out.push((layers.0, &block.a));
                    out.push((layers.1, &block.b));
                }
                _ => {}
            }
        }
        out
    }

    pub(crate) fn conv_units_mut(&mut self) -> Vec<(usize, &mut ConvBn)> {
        let mut out = Vec::new();
        for stage in &mut self.stages {
            match stage {
                Stage::ConvBnRelu { layer, unit } => out.push((*layer, unit)),
                Stage::Residual { layers, block } => {
                    out.push((layers.0, &mut block.a));
                    out.push((layers.1, &mut block.b));
                }
                _ => {}
            }
        }
        out
    }

    pub fn dense(&self) -> Option<(usize, &DenseLayer)> {
        self.stages.iter().find_map(|s| match s {
            Stage::Dense { layer, dense } => Some((*layer, dense)),
            _ => None,
        })
    }

    pub(crate) fn dense_mut(&mut self) -> Option<(usize, &mut DenseLayer)> {
        self.stages.iter_mut().find_map(|s| match s {
            Stage::Dense { layer, dense } => Some((*layer, dense)),
            _ => None,
        })
    }

    /// Absorbs every batch norm into its conv for inference.
    pub fn fold(&self) -> Result<FoldedNetwork> {
        let stages = self
            .stages
            .iter()
            .map(|stage| {
                Ok(match stage {
                    Stage::ConvBnRelu { unit, .. } => FoldedStage::ConvRelu(fold_batchnorm(&unit.conv, &unit.bn)?),
                    Stage::Residual { block, .. } => FoldedStage::Residual {
                        a: fold_batchnorm(&block.a.conv, &block.a.bn)?,
                        b: fold_batchnorm(&block.b.conv, &block.b.bn)?,
                    },
                    Stage::AvgPool { pool_h, pool_w } => FoldedStage::AvgPool {
                        pool_h: *pool_h,
                        pool_w: *pool_w,
                    },
                    Stage::GlobalAvgPool => FoldedStage::GlobalAvgPool,
                    Stage::Dense { dense, .. } => FoldedStage::Dense(dense.clone()),
                    Stage::Softmax => FoldedStage::Softmax,
                })
            })
            .collect::<Result<_>>()?;
        Ok(FoldedNetwork {
            spec: self.spec.clone(),
            stages,
        })
    }
}

fn conv_init(conv: &mut ConvLayer) -> (&mut Tensor, usize) {
    let fan_in = conv.in_channels * conv.kernel_h * conv.kernel_w;
    (&mut conv.weights, fan_in)
}

impl CountParams for Network {
    fn count_params(&self, mode: ParamMode) -> u64 {
        self.stages
            .iter()
            .map(|s| match s {
                Stage::ConvBnRelu { unit, .. } => unit.count_params(mode),
                Stage::Residual { block, .. } => block.count_params(mode),
                Stage::Dense { dense, .. } => dense.count_params(mode),
                _ => 0,
            })
            .sum()
    }
}

impl Classifier for Network {
    fn spec(&self) -> &ArchitectureSpec {
        &self.spec
    }

    fn predict_proba(&self, batch: &Tensor) -> Result<Tensor> {
        self.forward(batch)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FoldedStage {
    ConvRelu(FoldedConv),
    Residual { a: FoldedConv, b: FoldedConv },
    AvgPool { pool_h: usize, pool_w: usize },
    GlobalAvgPool,
    Dense(DenseLayer),
    Softmax,
}

/// A network whose batch norms have been folded into biased convolutions.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldedNetwork {
    spec: ArchitectureSpec,
    stages: Vec<FoldedStage>,
}

impl FoldedNetwork {
    pub fn stages(&self) -> &[FoldedStage] {
        &self.stages
    }

    pub fn forward_logits(&self, input: &Tensor) -> Result<Tensor> {
        let mut x = as_batch(&self.spec, input)?;
        for stage in &self.stages {
            x = match stage {
                FoldedStage::ConvRelu(conv) => relu_forward(&conv.forward(&x)?),
                FoldedStage::Residual { a, b } => {
                    let mid = relu_forward(&a.forward(&x)?);
                    let mut sum = b.forward(&mid)?;
                    sum.add_assign(&x)?;
                    relu_forward(&sum)
                }
                FoldedStage::AvgPool { pool_h, pool_w } => avg_pool2d(&x, *pool_h, *pool_w)?,
                FoldedStage::GlobalAvgPool => global_avg_pool(&x)?,
                FoldedStage::Dense(dense) => dense_forward(&x, dense)?,
                FoldedStage::Softmax => x,
            };
        }
        Ok(x)
    }

    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        softmax(&self.forward_logits(input)?)
    }
}

impl Classifier for FoldedNetwork {
    fn spec(&self) -> &ArchitectureSpec {
        &self.spec
    }

    fn predict_proba(&self, batch: &Tensor) -> Result<Tensor> {
        self.forward(batch)
    }
}

/// Builds a network from a spec and seed.
pub fn build_network(spec: &ArchitectureSpec, seed: u64) -> Result<Network> {
    Network::build(spec, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arch::builtin::builtin_spec;

    fn input(seed: usize) -> Tensor {
        Tensor::from_fn(&[1, 98, 40], |i| (((i + seed) * 2654435761usize) % 1000) as f32 / 100.0 - 5.0)
    }

    #[test]
    fn same_seed_same_weights() {
        let spec = builtin_spec("C").unwrap();
        assert_eq!(Network::build(&spec, 7).unwrap(), Network::build(&spec, 7).unwrap());
        assert_ne!(Network::build(&spec, 7).unwrap(), Network::build(&spec, 8).unwrap());
    }

    #[test]
    fn forward_gives_twelve_probabilities() {
        for name in ["A", "D"] {
            let net = Network::build(&builtin_spec(name).unwrap(), 1).unwrap();
            let p = net.forward(&input(3)).unwrap();
            assert_eq!(p.shape(), &[1, 12]);
            let sum: f32 = p.data().iter().sum();
            assert!((sum - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn stage_layout_follows_topology() {
        let net = Network::zeroed(&builtin_spec("D").unwrap()).unwrap();
        let kinds: Vec<&str> = net
            .stages()
            .iter()
            .map(|s| match s {
                Stage::ConvBnRelu { .. } => "conv",
                Stage::Residual { .. } => "res",
                Stage::AvgPool { .. } => "pool",
                Stage::GlobalAvgPool => "gap",
                Stage::Dense { .. } => "dense",
                Stage::Softmax => "softmax",
            })
            .collect();
        assert_eq!(kinds, ["conv", "pool", "res", "res", "res", "gap", "dense", "softmax"]);
        assert_eq!(net.param_count(ParamMode::Paper), 80_325);
    }

    #[test]
    fn rejects_wrong_input_shape() {
        let net = Network::zeroed(&builtin_spec("B").unwrap()).unwrap();
        assert!(matches!(net.forward(&Tensor::zeros(&[1, 97, 40])), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn gradients_align_with_params() {
        let mut net = Network::build(&builtin_spec("D").unwrap(), 2).unwrap();
        let batch = Tensor::from_fn(&[2, 1, 98, 40], |i| ((i * 31) % 17) as f32 * 0.1);
        let (logits, cache) = net.forward_train(&batch).unwrap();
        let grads = net.backward(&cache, &Tensor::full(logits.shape(), 0.1)).unwrap();
        let sizes: Vec<usize> = net.params_mut().iter().map(|p| p.len()).collect();
        assert_eq!(grads.0.iter().map(Vec::len).collect::<Vec<_>>(), sizes);
    }
}
