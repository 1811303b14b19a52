use crate::error::{Error, Result};
use crate::numerics::{Scalar, Tensor};

/// Softmax cross-entropy with the maximum logit subtracted before
/// exponentiation. Returns the loss and `p − one_hot(label)`.
pub fn softmax_cross_entropy<S: Scalar>(logits: &Tensor<S>, label: usize) -> Result<(S, Tensor<S>)> {
    let mut grad = vec![S::zero(); logits.len()];
    let loss = softmax_ce_raw(logits.values(), label, &mut grad)?;
    Ok((loss, Tensor::new(logits.shape().to_vec(), grad)?))
}

pub(crate) fn softmax_ce_raw<S: Scalar>(logits: &[S], label: usize, grad: &mut [S]) -> Result<S> {
    let m = logits.len();
    if label >= m {
        return Err(Error::Label { label, classes: m });
    }
    let max = logits.iter().copied().fold(S::neg_infinity(), S::max);
    let mut total = S::zero();
    for (g, &z) in grad.iter_mut().zip(logits) {
        *g = (z - max).exp();
        total += *g;
    }
    for g in grad.iter_mut() {
        *g /= total;
    }
    let loss = total.ln() - (logits[label] - max);
    grad[label] -= S::one();
    Ok(loss)
}
