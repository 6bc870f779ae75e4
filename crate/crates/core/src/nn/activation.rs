use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub fn relu_forward(input: &Tensor) -> Tensor {
    input.with_shape_of(input.data().iter().map(|&v| v.max(0.0)).collect())
}

/// Passes `grad_out` where the forward input was strictly positive.
pub fn relu_backward(input: &Tensor, grad_out: &Tensor) -> Result<Tensor> {
    if input.shape() != grad_out.shape() {
        return Err(Error::ShapeMismatch(format!(
            "grad_out {:?} vs input {:?}",
            grad_out.shape(),
            input.shape()
        )));
    }
    Ok(input.with_shape_of(
        input
            .data()
            .iter()
            .zip(grad_out.data())
            .map(|(&x, &g)| if x > 0.0 { g } else { 0.0 })
            .collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forward_and_backward_values() {
        let x = Tensor::new(vec![4], vec![-1.0, 0.0, 2.5, 1e-3]).unwrap();
        assert_eq!(relu_forward(&x).data(), &[0.0, 0.0, 2.5, 1e-3]);
        let g = relu_backward(&x, &Tensor::full(&[4], 2.0)).unwrap();
        assert_eq!(g.data(), &[0.0, 0.0, 2.0, 2.0]);
    }
}
