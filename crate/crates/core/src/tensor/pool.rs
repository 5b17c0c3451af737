use super::{Scalar, Tensor};
use crate::error::{invalid, Result};

/// Argmax positions recorded by [`maxpool2d`].
#[derive(Clone, Debug)]
pub struct MaxPoolCache {
    input_shape: Vec<usize>,
    argmax: Vec<usize>,
}

/// 2×2 max pooling with stride 2 (odd trailing rows/columns are dropped).
///
/// Ties resolve to the first maximum in row-major scan order of the window;
/// the backward pass routes the whole gradient there.
pub fn maxpool2d<T: Scalar>(input: &Tensor<T>) -> Result<(Tensor<T>, MaxPoolCache)> {
    let (n, c, h, w) = input.dims4("maxpool input")?;
    let (oh, ow) = (h / 2, w / 2);
    if oh == 0 || ow == 0 {
        return Err(invalid(format!("maxpool needs at least 2×2 input, got {h}×{w}")));
    }
    let x = input.data();
    let mut out = Vec::with_capacity(n * c * oh * ow);
    let mut argmax = Vec::with_capacity(out.capacity());
    for plane in 0..n * c {
        let base = plane * h * w;
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = base + 2 * oy * w + 2 * ox;
                for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                    let i = base + (2 * oy + dy) * w + 2 * ox + dx;
                    if x[i] > x[best] {
                        best = i;
                    }
                }
                out.push(x[best]);
                argmax.push(best);
            }
        }
    }
    Ok((
        Tensor::new(&[n, c, oh, ow], out)?,
        MaxPoolCache {
            input_shape: input.shape().to_vec(),
            argmax,
        },
    ))
}

pub fn maxpool2d_backward<T: Scalar>(grad_out: &Tensor<T>, cache: &MaxPoolCache) -> Result<Tensor<T>> {
    if grad_out.len() != cache.argmax.len() {
        return Err(invalid("maxpool grad_out does not match forward output"));
    }
    let mut dx = Tensor::zeros(&cache.input_shape);
    let d = dx.data_mut();
    for (&g, &i) in grad_out.data().iter().zip(&cache.argmax) {
        d[i] += g;
    }
    Ok(dx)
}

/// Spatial mean: `[N,C,H,W] → [N,C]`.
pub fn global_avg_pool<T: Scalar>(input: &Tensor<T>) -> Result<Tensor<T>> {
    let (n, c, h, w) = input.dims4("global pool input")?;
    let hw = h * w;
    let inv = T::one() / T::from_usize(hw).unwrap();
    let data = input
        .data()
        .chunks_exact(hw)
        .map(|plane| plane.iter().copied().sum::<T>() * inv)
        .collect();
    Tensor::new(&[n, c], data)
}

pub fn global_avg_pool_backward<T: Scalar>(
    grad_out: &Tensor<T>,
    input_shape: &[usize],
) -> Result<Tensor<T>> {
    let &[n, c, h, w] = input_shape else {
        return Err(invalid("global pool input shape must be 4-D"));
    };
    if grad_out.shape() != [n, c] {
        return Err(invalid(format!(
            "global pool grad_out shape {:?}, expected [{n}, {c}]",
            grad_out.shape()
        )));
    }
    let hw = h * w;
    let inv = T::one() / T::from_usize(hw).unwrap();
    let mut data = Vec::with_capacity(n * c * hw);
    for &g in grad_out.data() {
        data.extend(std::iter::repeat_n(g * inv, hw));
    }
    Tensor::new(input_shape, data)
}
