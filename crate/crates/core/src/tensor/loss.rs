use super::{Scalar, Tensor};
use crate::error::{invalid, Result};

/// Row-wise softmax of `[N,K]` logits, shifted by the row maximum.
pub fn softmax<T: Scalar>(logits: &Tensor<T>) -> Result<Tensor<T>> {
    let (_, k) = logits.dims2("logits")?;
    let mut out = logits.data().to_vec();
    for row in out.chunks_exact_mut(k) {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let mut total = T::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            total += *v;
        }
        for v in row.iter_mut() {
            *v /= total;
        }
    }
    Tensor::new(logits.shape(), out)
}

#[derive(Clone, Debug)]
pub struct SoftmaxCrossEntropy<T> {
    pub loss: T,
    pub probs: Tensor<T>,
    pub grad_logits: Tensor<T>,
}

/// Mean negative log-likelihood of `labels` under softmax(`logits`).
///
/// With `class_weights`, each sample's term is scaled by the weight of its
/// true class and the mean is taken over the summed weights.
pub fn softmax_cross_entropy<T: Scalar>(
    logits: &Tensor<T>,
    labels: &[usize],
    class_weights: Option<&[T]>,
) -> Result<SoftmaxCrossEntropy<T>> {
    let (n, k) = logits.dims2("logits")?;
    if labels.len() != n {
        return Err(invalid(format!("{} labels for {n} logit rows", labels.len())));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
        return Err(invalid(format!("label {bad} out of range for {k} classes")));
    }
    if let Some(w) = class_weights {
        if w.len() != k || w.iter().any(|&v| v < T::zero()) {
            return Err(invalid("class weights must be K non-negative values"));
        }
    }
    let weight = |label: usize| class_weights.map_or(T::one(), |w| w[label]);
    let total_weight: T = labels.iter().map(|&l| weight(l)).sum();
    if total_weight <= T::zero() {
        return Err(invalid("class weights give the batch zero total weight"));
    }

    let probs = softmax(logits)?;
    let mut loss = T::zero();
    let mut grad = probs.data().to_vec();
    for (i, &label) in labels.iter().enumerate() {
        let row = &logits.data()[i * k..(i + 1) * k];
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let log_sum = row.iter().map(|&v| (v - max).exp()).sum::<T>().ln() + max;
        let wi = weight(label);
        loss += wi * (log_sum - row[label]);
        let g = &mut grad[i * k..(i + 1) * k];
        g[label] -= T::one();
        for v in g.iter_mut() {
            *v *= wi / total_weight;
        }
    }
    Ok(SoftmaxCrossEntropy {
        loss: loss / total_weight,
        probs,
        grad_logits: Tensor::new(&[n, k], grad)?,
    })
}
