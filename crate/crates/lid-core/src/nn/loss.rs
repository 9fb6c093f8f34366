//! Softmax cross-entropy.

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// Row-wise max-shifted softmax.
pub fn softmax_rows<S: Scalar>(logits: &Tensor<S>) -> Tensor<S> {
    let (b, k) = (logits.rows(), logits.cols());
    let mut out = Tensor::zeros(&[b, k]);
    for r in 0..b {
        let row = logits.row(r);
        let max = row.iter().cloned().fold(S::neg_infinity(), S::max);
        let orow = out.row_mut(r);
        let mut sum = S::zero();
        for (o, &v) in orow.iter_mut().zip(row) {
            let e = (v - max).exp();
            *o = e;
            sum += e;
        }
        for o in orow.iter_mut() {
            *o = *o / sum;
        }
    }
    out
}

/// Mean cross-entropy between softmax(logits) and integer labels, plus the
/// gradient with respect to the logits: per row `(p - onehot) / batch`.
pub fn softmax_xent<S: Scalar>(logits: &Tensor<S>, labels: &[usize]) -> Result<(S, Tensor<S>)> {
    let (b, k) = (logits.rows(), logits.cols());
    if labels.len() != b {
        return Err(Error::shape(format!(
            "softmax_xent: {b} logit rows but {} labels",
            labels.len()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
        return Err(Error::invalid(format!(
            "softmax_xent: label {bad} out of range for {k} classes"
        )));
    }
    let probs = softmax_rows(logits);
    let inv_b = S::one() / S::from_f64_lossy(b as f64);
    let mut loss = S::zero();
    let mut grad = probs.clone();
    // Clamp keeps the loss finite when a true-class probability underflows.
    let tiny = S::min_positive_value();
    for (r, &label) in labels.iter().enumerate() {
        let p = probs.row(r)[label];
        loss += -(p.max(tiny)).ln();
        grad.row_mut(r)[label] -= S::one();
    }
    for g in grad.data_mut() {
        *g *= inv_b;
    }
    Ok((loss * inv_b, grad))
}
