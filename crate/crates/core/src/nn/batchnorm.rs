use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const BN_EPS: f32 = 1e-5;
pub const BN_MOMENTUM: f32 = 0.1;

/// Per-channel batch normalization over `(N, H, W)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormLayer {
    pub gamma: Vec<f32>,
    pub beta: Vec<f32>,
    pub running_mean: Vec<f32>,
    pub running_var: Vec<f32>,
    pub eps: f32,
    pub momentum: f32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BnMode {
    Train,
    Infer,
}

/// Batch mean and biased variance captured by a train-mode forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchStats {
    pub mean: Vec<f32>,
    pub var: Vec<f32>,
}

impl BatchNormLayer {
    pub fn new(channels: usize) -> Self {
        BatchNormLayer {
            gamma: vec![1.0; channels],
            beta: vec![0.0; channels],
            running_mean: vec![0.0; channels],
            running_var: vec![1.0; channels],
            eps: BN_EPS,
            momentum: BN_MOMENTUM,
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }

    /// gamma and beta; running statistics are not trainable.
    pub fn param_count(&self) -> u64 {
        2 * self.channels() as u64
    }

    fn check(&self, input: &Tensor) -> Result<(usize, usize, usize)> {
        let (n, c, h, w) = input.dims4()?;
        if c != self.channels() {
            return Err(Error::ChannelMismatch {
                expected: self.channels(),
                found: c,
            });
        }
        Ok((n, c, h * w))
    }

    fn normalize(&self, input: &Tensor, mean: &[f32], var: &[f32]) -> Result<Tensor> {
        let (_, c, plane) = self.check(input)?;
        let scale: Vec<f32> = (0..c).map(|ch| self.gamma[ch] / (var[ch] + self.eps).sqrt()).collect();
        let mut out = input.clone();
        for (idx, chunk) in out.data_mut().chunks_exact_mut(plane).enumerate() {
            let ch = idx % c;
            for v in chunk {
                *v = (*v - mean[ch]) * scale[ch] + self.beta[ch];
            }
        }
        Ok(out)
    }
}

/// Mean and biased variance per channel, accumulated in double precision.
pub fn channel_stats(input: &Tensor) -> Result<BatchStats> {
    let (n, c, h, w) = input.dims4()?;
    let plane = h * w;
    let count = (n * plane) as f64;
    let mut sum = vec![0.0f64; c];
    let mut sq = vec![0.0f64; c];
    for (idx, chunk) in input.data().chunks_exact(plane).enumerate() {
        let ch = idx % c;
        for &v in chunk {
            sum[ch] += f64::from(v);
        }
    }
    let mean: Vec<f64> = sum.iter().map(|s| s / count).collect();
    for (idx, chunk) in input.data().chunks_exact(plane).enumerate() {
        let ch = idx % c;
        for &v in chunk {
            sq[ch] += (f64::from(v) - mean[ch]).powi(2);
        }
    }
    Ok(BatchStats {
        mean: mean.iter().map(|&m| m as f32).collect(),
        var: sq.iter().map(|s| (s / count) as f32).collect(),
    })
}

/// Train mode: normalize by batch statistics and fold them into the running
/// averages (`running = (1 - momentum) · running + momentum · batch`).
pub fn batchnorm_forward_train(input: &Tensor, layer: &mut BatchNormLayer) -> Result<(Tensor, BatchStats)> {
    layer.check(input)?;
    let stats = channel_stats(input)?;
    let out = layer.normalize(input, &stats.mean, &stats.var)?;
    let m = layer.momentum;
    for ch in 0..layer.channels() {
        layer.running_mean[ch] = (1.0 - m) * layer.running_mean[ch] + m * stats.mean[ch];
        layer.running_var[ch] = (1.0 - m) * layer.running_var[ch] + m * stats.var[ch];
    }
    Ok((out, stats))
}

/// Infer mode: normalize by the running statistics.
pub fn batchnorm_forward_infer(input: &Tensor, layer: &BatchNormLayer) -> Result<Tensor> {
    layer.normalize(input, &layer.running_mean, &layer.running_var)
}

pub fn batchnorm_forward(
    input: &Tensor,
    layer: &mut BatchNormLayer,
    mode: BnMode,
) -> Result<(Tensor, Option<BatchStats>)> {
    match mode {
        BnMode::Train => batchnorm_forward_train(input, layer).map(|(t, s)| (t, Some(s))),
        BnMode::Infer => batchnorm_forward_infer(input, layer).map(|t| (t, None)),
    }
}

/// Gradient of the train-mode forward: returns `(grad_input, grad_gamma, grad_beta)`.
pub fn batchnorm_backward(
    input: &Tensor,
    layer: &BatchNormLayer,
    grad_out: &Tensor,
    stats: &BatchStats,
) -> Result<(Tensor, Vec<f32>, Vec<f32>)> {
    let (_, c, plane) = layer.check(input)?;
    if grad_out.shape() != input.shape() {
        return Err(Error::ShapeMismatch(format!(
            "grad_out {:?} vs input {:?}",
            grad_out.shape(),
            input.shape()
        )));
    }
    let count = (input.len() / c) as f64;
    let inv_std: Vec<f64> = stats
        .var
        .iter()
        .map(|&v| 1.0 / (f64::from(v) + f64::from(layer.eps)).sqrt())
        .collect();

    let mut sum_dy = vec![0.0f64; c];
    let mut sum_dy_xhat = vec![0.0f64; c];
    for (idx, (xs, gs)) in input
        .data()
        .chunks_exact(plane)
        .zip(grad_out.data().chunks_exact(plane))
        .enumerate()
    {
        let ch = idx % c;
        let mean = f64::from(stats.mean[ch]);
        for (&x, &g) in xs.iter().zip(gs) {
            let g = f64::from(g);
            sum_dy[ch] += g;
            sum_dy_xhat[ch] += g * (f64::from(x) - mean) * inv_std[ch];
        }
    }

    let mut grad_in = vec![0.0f32; input.len()];
    for (idx, ((dst, xs), gs)) in grad_in
        .chunks_exact_mut(plane)
        .zip(input.data().chunks_exact(plane))
        .zip(grad_out.data().chunks_exact(plane))
        .enumerate()
    {
        let ch = idx % c;
        let mean = f64::from(stats.mean[ch]);
        let k = f64::from(layer.gamma[ch]) * inv_std[ch] / count;
        for ((d, &x), &g) in dst.iter_mut().zip(xs).zip(gs) {
            let xhat = (f64::from(x) - mean) * inv_std[ch];
            *d = (k * (count * f64::from(g) - sum_dy[ch] - xhat * sum_dy_xhat[ch])) as f32;
        }
    }
    Ok((
        input.with_shape_of(grad_in),
        sum_dy_xhat.iter().map(|&v| v as f32).collect(),
        sum_dy.iter().map(|&v| v as f32).collect(),
    ))
}
