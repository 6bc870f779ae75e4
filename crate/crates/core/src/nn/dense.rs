use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Fully connected layer without bias.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub in_features: usize,
    pub out_features: usize,
    /// `[out_features, in_features]`
    pub weights: Tensor,
}

impl DenseLayer {
    pub fn new(weights: Tensor) -> Result<Self> {
        match *weights.shape() {
            [out_features, in_features] => Ok(DenseLayer {
                in_features,
                out_features,
                weights,
            }),
            _ => Err(Error::ShapeMismatch(format!(
                "dense weights must be [out, in], got {:?}",
                weights.shape()
            ))),
        }
    }

    pub fn zeros(in_features: usize, out_features: usize) -> Self {
        DenseLayer {
            in_features,
            out_features,
            weights: Tensor::zeros(&[out_features, in_features]),
        }
    }

    pub fn param_count(&self) -> u64 {
        (self.in_features * self.out_features) as u64
    }

    fn check(&self, input: &Tensor) -> Result<usize> {
        let (n, f) = input.dims2()?;
        if f != self.in_features {
            return Err(Error::ChannelMismatch {
                expected: self.in_features,
                found: f,
            });
        }
        Ok(n)
    }
}

/// `[F]` or `[N, F]` in, `[O]` or `[N, O]` out.
pub fn dense_forward(input: &Tensor, layer: &DenseLayer) -> Result<Tensor> {
    let n = layer.check(input)?;
    let mut out = Vec::with_capacity(n * layer.out_features);
    for x in input.data().chunks_exact(layer.in_features) {
        out.extend(
            layer
                .weights
                .data()
                .chunks_exact(layer.in_features)
                .map(|row| row.iter().zip(x).map(|(w, v)| w * v).sum::<f32>()),
        );
    }
    let shape = if input.rank() == 1 { vec![layer.out_features] } else { vec![n, layer.out_features] };
    Ok(Tensor::from_parts(shape, out))
}

/// Returns `(grad_input, grad_weights)`.
pub fn dense_backward(input: &Tensor, layer: &DenseLayer, grad_out: &Tensor) -> Result<(Tensor, Tensor)> {
    let n = layer.check(input)?;
    if grad_out.len() != n * layer.out_features {
        return Err(Error::ShapeMismatch(format!(
            "grad_out {:?} does not match {n}×{}",
            grad_out.shape(),
            layer.out_features
        )));
    }
    let (fin, fout) = (layer.in_features, layer.out_features);
    let w = layer.weights.data();
    let mut grad_in = vec![0.0f32; n * fin];
    let mut grad_w = vec![0.0f32; fout * fin];
    for ((x, g), gi) in input
        .data()
        .chunks_exact(fin)
        .zip(grad_out.data().chunks_exact(fout))
        .zip(grad_in.chunks_exact_mut(fin))
    {
        for (o, &go) in g.iter().enumerate() {
            let row = &w[o * fin..(o + 1) * fin];
            let grow = &mut grad_w[o * fin..(o + 1) * fin];
            for i in 0..fin {
                gi[i] += go * row[i];
                grow[i] += go * x[i];
            }
        }
    }
    Ok((
        input.with_shape_of(grad_in),
        Tensor::from_parts(vec![fout, fin], grad_w),
    ))
}
