use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Row-wise softmax with max subtraction, over `[K]` or `[N, K]`.
pub fn softmax(logits: &Tensor) -> Result<Tensor> {
    let (_, k) = logits.dims2()?;
    let mut out = logits.data().to_vec();
    for row in out.chunks_exact_mut(k) {
        softmax_in_place(row);
    }
    Ok(logits.with_shape_of(out))
}

pub(crate) fn softmax_in_place(row: &mut [f32]) {
    let max = row.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let mut sum = 0.0f64;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += f64::from(*v);
    }
    let inv = (1.0 / sum) as f32;
    row.iter_mut().for_each(|v| *v *= inv);
}

/// Negative log-likelihood of `label` under `probs`, and its gradient with
/// respect to the logits that produced `probs` (`probs - onehot(label)`).
pub fn cross_entropy(probs: &[f32], label: usize) -> Result<(f32, Vec<f32>)> {
    if label >= probs.len() {
        return Err(Error::ShapeMismatch(format!(
            "label {label} out of range for {} classes",
            probs.len()
        )));
    }
    let loss = -(f64::from(probs[label]).max(1e-30)).ln() as f32;
    let mut grad = probs.to_vec();
    grad[label] -= 1.0;
    Ok((loss, grad))
}

fn log_sum_exp(row: &[f32]) -> f64 {
    let max = row.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let max = f64::from(max);
    row.iter().map(|&v| (f64::from(v) - max).exp()).sum::<f64>().ln() + max
}

/// Mean cross-entropy over a `[N, K]` batch of logits, computed from the
/// logits directly so it stays exact (and turns non-finite) for extreme
/// inputs; gradient is scaled by `1/N`.
pub fn softmax_cross_entropy(logits: &Tensor, labels: &[usize]) -> Result<(f32, Tensor, Tensor)> {
    let (n, _) = logits.dims2()?;
    if labels.len() != n {
        return Err(Error::ShapeMismatch(format!("{} labels for {n} rows", labels.len())));
    }
    let probs = softmax(logits)?;
    let k = probs.len() / n;
    let mut total = 0.0f64;
    let mut grad = Vec::with_capacity(probs.len());
    for ((row, logit), &label) in probs.data().chunks_exact(k).zip(logits.data().chunks_exact(k)).zip(labels) {
        let (_, g) = cross_entropy(row, label)?;
        total += log_sum_exp(logit) - f64::from(logit[label]);
        grad.extend(g.into_iter().map(|v| v / n as f32));
    }
    Ok(((total / n as f64) as f32, logits.with_shape_of(grad), probs))
}

/// Index of the largest value; ties resolve to the lowest index.
pub fn argmax(values: &[f32]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}
