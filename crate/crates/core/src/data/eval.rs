use serde::Serialize;

use crate::arch::Classifier;
use crate::error::{Error, Result};
use crate::frontend::MfccMatrix;
use crate::nn::argmax;
use crate::tensor::Tensor;

use super::{Dataset, LabelMap};

pub const DEFAULT_THRESHOLD: f64 = 0.95;
const EVAL_BATCH: usize = 32;

/// Fraction of examples whose argmax (ties to the lower index) equals the label.
pub fn evaluate<C: Classifier + ?Sized>(net: &C, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    data.check_input(net.spec())?;
    let indices: Vec<usize> = (0..data.len()).collect();
    let mut correct = 0usize;
    for chunk in indices.chunks(EVAL_BATCH) {
        let (input, labels) = data.batch(chunk)?;
        let probs = net.predict_proba(&input)?;
        let k = probs.shape()[1];
        correct += probs
            .data()
            .chunks(k)
            .zip(&labels)
            .filter(|(row, &l)| argmax(row) == l)
            .count();
    }
    Ok(correct as f64 / data.len() as f64)
}

pub fn meets_threshold(accuracy: f64, threshold: f64) -> bool {
    accuracy >= threshold
}

/// Whether validation accuracy is at least `threshold`.
pub fn indicator<C: Classifier + ?Sized>(net: &C, val: &Dataset, threshold: f64) -> Result<bool> {
    Ok(meets_threshold(evaluate(net, val)?, threshold))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prediction {
    pub label: String,
    pub index: usize,
    pub probabilities: Vec<f32>,
}

pub fn predict<C: Classifier + ?Sized>(net: &C, labels: &LabelMap, mfcc: &MfccMatrix) -> Result<Prediction> {
    let input = Tensor::new(vec![1, 1, mfcc.frame_count(), mfcc.coeff_count()], mfcc.values().to_vec())?;
    let probabilities = net.predict_proba(&input)?.into_data();
    let index = argmax(&probabilities);
    let label = labels
        .name(index)
        .ok_or_else(|| Error::ShapeMismatch(format!("class {index} has no label")))?
        .to_string();
    Ok(Prediction {
        label,
        index,
        probabilities,
    })
}
