use super::{gemm, Scalar, Tensor};
use crate::error::{invalid, Result};

/// Fully connected layer `[N,D]·[D,K] + bias[K] → [N,K]`.
pub fn dense_forward<T: Scalar>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    bias: &Tensor<T>,
) -> Result<Tensor<T>> {
    let (n, d) = input.dims2("dense input")?;
    let (wd, k) = weight.dims2("dense weight")?;
    if wd != d {
        return Err(invalid(format!("dense weight has {wd} rows, input has {d} features")));
    }
    if bias.shape() != [k] {
        return Err(invalid(format!("dense bias shape {:?}, expected [{k}]", bias.shape())));
    }
    let mut out: Vec<T> = bias.data().iter().copied().cycle().take(n * k).collect();
    gemm(false, false, n, k, d, input.data(), weight.data(), T::one(), &mut out);
    Tensor::new(&[n, k], out)
}

#[derive(Clone, Debug)]
pub struct DenseGrads<T> {
    pub input: Tensor<T>,
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

pub fn dense_backward<T: Scalar>(
    grad_out: &Tensor<T>,
    input: &Tensor<T>,
    weight: &Tensor<T>,
) -> Result<DenseGrads<T>> {
    let (n, d) = input.dims2("dense input")?;
    let (_, k) = weight.dims2("dense weight")?;
    if grad_out.shape() != [n, k] {
        return Err(invalid(format!(
            "dense grad_out shape {:?}, expected [{n}, {k}]",
            grad_out.shape()
        )));
    }
    let mut dx = vec![T::zero(); n * d];
    gemm(false, true, n, d, k, grad_out.data(), weight.data(), T::zero(), &mut dx);
    let mut dw = vec![T::zero(); d * k];
    gemm(true, false, d, k, n, input.data(), grad_out.data(), T::zero(), &mut dw);
    let mut db = vec![T::zero(); k];
    for row in grad_out.data().chunks_exact(k) {
        for (acc, &g) in db.iter_mut().zip(row) {
            *acc += g;
        }
    }
    Ok(DenseGrads {
        input: Tensor::new(&[n, d], dx)?,
        weight: Tensor::new(&[d, k], dw)?,
        bias: Tensor::new(&[k], db)?,
    })
}
