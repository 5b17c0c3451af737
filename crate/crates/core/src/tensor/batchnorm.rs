//! Per-channel batch normalization over `[N,C,H,W]`.
//!
//! Training mode normalizes with the batch mean and biased batch variance
//! and folds them into the running statistics as
//! `r ← momentum·r + (1 − momentum)·batch`. Inference mode uses the
//! running statistics only.

use super::{Scalar, Tensor};
use crate::error::{invalid, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// What [`batchnorm_backward`] needs from the forward pass.
#[derive(Clone, Debug)]
pub struct BnCache<T> {
    mode: Mode,
    xhat: Vec<T>,
    inv_std: Vec<T>,
    shape: [usize; 4],
}

impl<T: Scalar> BnCache<T> {
    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Batch mean-free, unit-variance activations before the affine step.
    pub fn normalized(&self) -> &[T] {
        &self.xhat
    }
}

#[allow(clippy::too_many_arguments)]
pub fn batchnorm_forward<T: Scalar>(
    input: &Tensor<T>,
    gamma: &Tensor<T>,
    beta: &Tensor<T>,
    running_mean: &mut Tensor<T>,
    running_var: &mut Tensor<T>,
    mode: Mode,
    momentum: T,
    epsilon: T,
) -> Result<(Tensor<T>, BnCache<T>)> {
    let (n, c, h, w) = input.dims4("batchnorm input")?;
    if epsilon <= T::zero() {
        return Err(invalid("batchnorm epsilon must be positive"));
    }
    for (name, t) in [
        ("gamma", gamma),
        ("beta", beta),
        ("running_mean", &*running_mean),
        ("running_var", &*running_var),
    ] {
        if t.shape() != [c] {
            return Err(invalid(format!(
                "batchnorm {name} shape {:?}, expected [{c}]",
                t.shape()
            )));
        }
    }
    let hw = h * w;
    let m = n * hw;
    if mode == Mode::Train && m < 2 {
        return Err(invalid("batchnorm training needs at least 2 values per channel"));
    }
    let x = input.data();
    let mut inv_std = vec![T::zero(); c];
    let mut mean = vec![T::zero(); c];
    match mode {
        Mode::Train => {
            let count = T::from_usize(m).unwrap();
            for ch in 0..c {
                let values = || (0..n).flat_map(move |s| x[(s * c + ch) * hw..][..hw].iter());
                let mu = values().copied().sum::<T>() / count;
                let var = values().map(|&v| (v - mu) * (v - mu)).sum::<T>() / count;
                mean[ch] = mu;
                inv_std[ch] = T::one() / (var + epsilon).sqrt();
                let rm = &mut running_mean.data_mut()[ch];
                *rm = momentum * *rm + (T::one() - momentum) * mu;
                let rv = &mut running_var.data_mut()[ch];
                *rv = momentum * *rv + (T::one() - momentum) * var;
            }
        }
        Mode::Infer => {
            for ch in 0..c {
                mean[ch] = running_mean.data()[ch];
                inv_std[ch] = T::one() / (running_var.data()[ch] + epsilon).sqrt();
            }
        }
    }
    let mut xhat = vec![T::zero(); x.len()];
    let mut out = vec![T::zero(); x.len()];
    for s in 0..n {
        for ch in 0..c {
            let (g, b) = (gamma.data()[ch], beta.data()[ch]);
            let base = (s * c + ch) * hw;
            for i in base..base + hw {
                let v = (x[i] - mean[ch]) * inv_std[ch];
                xhat[i] = v;
                out[i] = g * v + b;
            }
        }
    }
    Ok((
        Tensor::new(input.shape(), out)?,
        BnCache {
            mode,
            xhat,
            inv_std,
            shape: [n, c, h, w],
        },
    ))
}

#[derive(Clone, Debug)]
pub struct BatchNormGrads<T> {
    pub input: Tensor<T>,
    pub gamma: Tensor<T>,
    pub beta: Tensor<T>,
}

/// Gradient of training-mode batch norm. Fails with [`Error::Contract`] if
/// the cache came from an inference-mode forward pass.
pub fn batchnorm_backward<T: Scalar>(
    grad_out: &Tensor<T>,
    cache: &BnCache<T>,
    gamma: &Tensor<T>,
) -> Result<BatchNormGrads<T>> {
    if cache.mode != Mode::Train {
        return Err(Error::Contract(
            "batchnorm backward requires a training-mode forward pass".into(),
        ));
    }
    let [n, c, h, w] = cache.shape;
    if grad_out.shape() != cache.shape {
        return Err(invalid(format!(
            "batchnorm grad_out shape {:?}, expected {:?}",
            grad_out.shape(),
            cache.shape
        )));
    }
    if gamma.shape() != [c] {
        return Err(invalid("batchnorm gamma shape mismatch"));
    }
    let hw = h * w;
    let count = T::from_usize(n * hw).unwrap();
    let dy = grad_out.data();
    let mut dgamma = vec![T::zero(); c];
    let mut dbeta = vec![T::zero(); c];
    for s in 0..n {
        for ch in 0..c {
            let base = (s * c + ch) * hw;
            for i in base..base + hw {
                dbeta[ch] += dy[i];
                dgamma[ch] += dy[i] * cache.xhat[i];
            }
        }
    }
    // dx = γ·σ⁻¹/M · (M·dy − Σdy − x̂·Σ(dy·x̂))
    let mut dx = vec![T::zero(); dy.len()];
    for s in 0..n {
        for ch in 0..c {
            let scale = gamma.data()[ch] * cache.inv_std[ch] / count;
            let base = (s * c + ch) * hw;
            for i in base..base + hw {
                dx[i] = scale * (count * dy[i] - dbeta[ch] - cache.xhat[i] * dgamma[ch]);
            }
        }
    }
    Ok(BatchNormGrads {
        input: Tensor::new(grad_out.shape(), dx)?,
        gamma: Tensor::new(&[c], dgamma)?,
        beta: Tensor::new(&[c], dbeta)?,
    })
}
