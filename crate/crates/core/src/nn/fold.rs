use crate::error::{Error, Result};
use crate::tensor::Tensor;

use super::batchnorm::BatchNormLayer;
use super::conv::{conv_forward_with_bias, ConvLayer};

/// A convolution with a batch norm absorbed into its weights and a per-channel bias.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldedConv {
    pub conv: ConvLayer,
    pub bias: Vec<f32>,
}

impl FoldedConv {
    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        conv_forward_with_bias(input, &self.conv, Some(&self.bias))
    }
}

/// `scale_c = gamma_c / sqrt(var_c + eps)`; weights of output channel `c` are
/// multiplied by `scale_c` and `bias_c = beta_c - mean_c · scale_c`.
pub fn fold_batchnorm(conv: &ConvLayer, bn: &BatchNormLayer) -> Result<FoldedConv> {
    if bn.channels() != conv.out_channels {
        return Err(Error::ChannelMismatch {
            expected: conv.out_channels,
            found: bn.channels(),
        });
    }
    let per_out = conv.in_channels * conv.kernel_h * conv.kernel_w;
    let mut folded = conv.clone();
    let mut bias = Vec::with_capacity(conv.out_channels);
    for (c, row) in folded.weights.data_mut().chunks_exact_mut(per_out).enumerate() {
        let scale = f64::from(bn.gamma[c]) / (f64::from(bn.running_var[c]) + f64::from(bn.eps)).sqrt();
        row.iter_mut().for_each(|w| *w = (f64::from(*w) * scale) as f32);
        bias.push((f64::from(bn.beta[c]) - f64::from(bn.running_mean[c]) * scale) as f32);
    }
    Ok(FoldedConv { conv: folded, bias })
}
