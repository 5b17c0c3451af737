use super::{same_shape, Scalar, Tensor};
use crate::error::Result;

pub fn relu<T: Scalar>(input: &Tensor<T>) -> Tensor<T> {
    input.map(|v| if v > T::zero() { v } else { T::zero() })
}

/// Passes gradient where the saved input is strictly positive; the
/// derivative at exactly 0 is taken as 0.
pub fn relu_backward<T: Scalar>(grad_out: &Tensor<T>, saved_input: &Tensor<T>) -> Result<Tensor<T>> {
    same_shape(grad_out, saved_input, "relu backward")?;
    let data = grad_out
        .data()
        .iter()
        .zip(saved_input.data())
        .map(|(&g, &x)| if x > T::zero() { g } else { T::zero() })
        .collect();
    Tensor::new(grad_out.shape(), data)
}
