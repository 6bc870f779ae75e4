//! Conv + batch-norm units and the identity-skip bottleneck block built from them.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

use super::activation::{relu_backward, relu_forward};
use super::batchnorm::{
    batchnorm_backward, batchnorm_forward_infer, batchnorm_forward_train, BatchNormLayer, BatchStats,
};
use super::conv::{conv2d_backward, conv2d_forward, ConvLayer};

/// A convolution followed by its batch norm.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvBn {
    pub conv: ConvLayer,
    pub bn: BatchNormLayer,
}

/// What a train-mode `ConvBn` forward needs to keep for its backward pass.
#[derive(Debug, Clone)]
pub struct ConvBnCache {
    input: Tensor,
    conv_out: Tensor,
    stats: BatchStats,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvBnGrads {
    pub weights: Tensor,
    pub gamma: Vec<f32>,
    pub beta: Vec<f32>,
}

impl ConvBn {
    pub fn new(conv: ConvLayer, bn: BatchNormLayer) -> Result<Self> {
        if bn.channels() != conv.out_channels {
            return Err(Error::ChannelMismatch {
                expected: conv.out_channels,
                found: bn.channels(),
            });
        }
        Ok(ConvBn { conv, bn })
    }

    pub fn in_channels(&self) -> usize {
        self.conv.in_channels
    }

    pub fn out_channels(&self) -> usize {
        self.conv.out_channels
    }

    pub fn forward_infer(&self, input: &Tensor) -> Result<Tensor> {
        batchnorm_forward_infer(&conv2d_forward(input, &self.conv)?, &self.bn)
    }

    pub fn forward_train(&mut self, input: &Tensor) -> Result<(Tensor, ConvBnCache)> {
        let conv_out = conv2d_forward(input, &self.conv)?;
        let (out, stats) = batchnorm_forward_train(&conv_out, &mut self.bn)?;
        Ok((
            out,
            ConvBnCache {
                input: input.clone(),
                conv_out,
                stats,
            },
        ))
    }

    /// Recomputes the train-mode output from the cache (no running-stat update).
    pub fn replay(&self, cache: &ConvBnCache) -> Result<Tensor> {
        let mut bn = self.bn.clone();
        bn.running_mean.clone_from(&cache.stats.mean);
        bn.running_var.clone_from(&cache.stats.var);
        batchnorm_forward_infer(&cache.conv_out, &bn)
    }

    pub fn backward(&self, cache: &ConvBnCache, grad_out: &Tensor) -> Result<(Tensor, ConvBnGrads)> {
        let (grad_conv, gamma, beta) = batchnorm_backward(&cache.conv_out, &self.bn, grad_out, &cache.stats)?;
        let (grad_in, weights) = conv2d_backward(&cache.input, &self.conv, &grad_conv)?;
        Ok((grad_in, ConvBnGrads { weights, gamma, beta }))
    }
}

/// `out = relu(bn_b(conv_b(relu(bn_a(conv_a(x))))) + x)`: wide → narrow → wide
/// with an identity skip.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualBlock {
    pub a: ConvBn,
    pub b: ConvBn,
}

#[derive(Debug, Clone)]
pub struct ResidualCache {
    a: ConvBnCache,
    b: ConvBnCache,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualGrads {
    pub a: ConvBnGrads,
    pub b: ConvBnGrads,
}

impl ResidualBlock {
    pub fn new(a: ConvBn, b: ConvBn) -> Result<Self> {
        let width = a.in_channels();
        if b.in_channels() != a.out_channels() {
            return Err(Error::ChannelMismatch {
                expected: a.out_channels(),
                found: b.in_channels(),
            });
        }
        if b.out_channels() != width {
            return Err(Error::ChannelMismatch {
                expected: width,
                found: b.out_channels(),
            });
        }
        Ok(ResidualBlock { a, b })
    }

    pub fn channels(&self) -> usize {
        self.a.in_channels()
    }

    fn check_input(&self, input: &Tensor) -> Result<()> {
        let (_, c, _, _) = input.dims4()?;
        if c != self.channels() {
            return Err(Error::ChannelMismatch {
                expected: self.channels(),
                found: c,
            });
        }
        Ok(())
    }

    pub fn forward_train(&mut self, input: &Tensor) -> Result<(Tensor, ResidualCache)> {
        self.check_input(input)?;
        let (a_out, a) = self.a.forward_train(input)?;
        let (mut sum, b) = self.b.forward_train(&relu_forward(&a_out))?;
        sum.add_assign(input)?;
        Ok((relu_forward(&sum), ResidualCache { a, b }))
    }

    pub fn backward(&self, cache: &ResidualCache, grad_out: &Tensor) -> Result<(Tensor, ResidualGrads)> {
        let mut sum = self.b.replay(&cache.b)?;
        sum.add_assign(&cache.a.input)?;
        let grad_sum = relu_backward(&sum, grad_out)?;
        let (grad_mid, b) = self.b.backward(&cache.b, &grad_sum)?;
        let grad_a_out = relu_backward(&self.a.replay(&cache.a)?, &grad_mid)?;
        let (mut grad_in, a) = self.a.backward(&cache.a, &grad_a_out)?;
        grad_in.add_assign(&grad_sum)?;
        Ok((grad_in, ResidualGrads { a, b }))
    }
}

/// Inference-mode forward of a residual block.
pub fn residual_block_forward(input: &Tensor, block: &ResidualBlock) -> Result<Tensor> {
    block.check_input(input)?;
    let mid = relu_forward(&block.a.forward_infer(input)?);
    let mut sum = block.b.forward_infer(&mid)?;
    sum.add_assign(input)?;
    Ok(relu_forward(&sum))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(cin: usize, cout: usize) -> ConvBn {
        ConvBn::new(ConvLayer::zeros(cin, cout, 3, 3), BatchNormLayer::new(cout)).unwrap()
    }

    #[test]
    fn zero_path_leaves_relu_of_input() {
        let mut block = ResidualBlock::new(unit(3, 2), unit(2, 3)).unwrap();
        block.b.bn.gamma = vec![0.0; 3];
        let x = Tensor::from_fn(&[3, 4, 4], |i| (i as f32 * 0.37).sin());
        let out = residual_block_forward(&x, &block).unwrap();
        assert_eq!(out, relu_forward(&x));
        let (train_out, _) = block.clone().forward_train(&x).unwrap();
        assert_eq!(train_out, relu_forward(&x));
    }

    #[test]
    fn mismatched_blocks_rejected() {
        assert!(matches!(
            ResidualBlock::new(unit(4, 2), unit(2, 3)),
            Err(Error::ChannelMismatch { expected: 4, found: 3 })
        ));
        assert!(matches!(
            ResidualBlock::new(unit(4, 2), unit(3, 4)),
            Err(Error::ChannelMismatch { .. })
        ));
        let block = ResidualBlock::new(unit(4, 2), unit(2, 4)).unwrap();
        assert!(matches!(
            residual_block_forward(&Tensor::zeros(&[3, 2, 2]), &block),
            Err(Error::ChannelMismatch { expected: 4, found: 3 })
        ));
    }

    #[test]
    fn conv_bn_requires_matching_norm() {
        assert!(ConvBn::new(ConvLayer::zeros(1, 4, 3, 3), BatchNormLayer::new(3)).is_err());
    }
}
