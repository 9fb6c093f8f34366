//! Layer forward/backward passes with hand-derived gradients.
//!
//! Conventions: sequence inputs are `T x C` (rows = time steps), batched
//! vector inputs are `B x I`. Convolutions are valid (no padding), stride 1.

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// Valid 1-D convolution over time. `input` is `T x C_in`, `weights` is
/// `C_out x C_in x W`, `bias` is `C_out`; output is `(T - W + 1) x C_out`.
pub fn conv1d_forward<S: Scalar>(
    input: &Tensor<S>,
    weights: &Tensor<S>,
    bias: &Tensor<S>,
) -> Result<Tensor<S>> {
    let (t, c_in) = (input.shape()[0], input.shape()[1]);
    let (c_out, w_cin, width) = (weights.shape()[0], weights.shape()[1], weights.shape()[2]);
    if w_cin != c_in {
        return Err(Error::shape(format!(
            "conv1d: input has {c_in} channels, weights expect {w_cin}"
        )));
    }
    if bias.len() != c_out {
        return Err(Error::shape("conv1d: bias length != C_out"));
    }
    if t < width {
        return Err(Error::invalid(format!(
            "conv1d: sequence length {t} shorter than filter width {width}"
        )));
    }
    let t_out = t - width + 1;
    let mut out = Tensor::zeros(&[t_out, c_out]);
    let wd = weights.data();
    let xd = input.data();
    for ti in 0..t_out {
        let row = out.row_mut(ti);
        for o in 0..c_out {
            let mut acc = bias.data()[o];
            let wk = &wd[o * c_in * width..(o + 1) * c_in * width];
            for c in 0..c_in {
                let wkc = &wk[c * width..(c + 1) * width];
                for (k, &wv) in wkc.iter().enumerate() {
                    acc += xd[(ti + k) * c_in + c] * wv;
                }
            }
            row[o] = acc;
        }
    }
    Ok(out)
}

/// Gradients of [`conv1d_forward`] with respect to input, weights and bias.
pub fn conv1d_backward<S: Scalar>(
    input: &Tensor<S>,
    weights: &Tensor<S>,
    grad_out: &Tensor<S>,
) -> (Tensor<S>, Tensor<S>, Tensor<S>) {
    let (t, c_in) = (input.shape()[0], input.shape()[1]);
    let (c_out, _, width) = (weights.shape()[0], weights.shape()[1], weights.shape()[2]);
    let t_out = t - width + 1;
    debug_assert_eq!(grad_out.shape(), &[t_out, c_out]);

    let mut grad_input = Tensor::zeros(&[t, c_in]);
    let mut grad_weights = Tensor::zeros(weights.shape());
    let mut grad_bias = Tensor::zeros(&[c_out]);

    let xd = input.data();
    let wd = weights.data();
    let gd = grad_out.data();
    let gi = grad_input.data_mut();
    let gw = grad_weights.data_mut();
    let gb = grad_bias.data_mut();

    for ti in 0..t_out {
        let grow = &gd[ti * c_out..(ti + 1) * c_out];
        for o in 0..c_out {
            let g = grow[o];
            if g == S::zero() {
                continue;
            }
            gb[o] += g;
            let wk = o * c_in * width;
            for c in 0..c_in {
                for k in 0..width {
                    gw[wk + c * width + k] += g * xd[(ti + k) * c_in + c];
                    gi[(ti + k) * c_in + c] += g * wd[wk + c * width + k];
                }
            }
        }
    }
    (grad_input, grad_weights, grad_bias)
}

/// Per-channel batch statistics captured during a training-mode forward.
#[derive(Clone, Debug)]
pub struct BnBatchStats<S> {
    pub mean: Vec<S>,
    pub var: Vec<S>,
}

/// Cache needed by the batchnorm backward pass.
#[derive(Clone, Debug)]
pub struct BnCache<S> {
    normalized: Tensor<S>,
    inv_std: Vec<S>,
}

/// Training-mode batch normalization over rows (`N x C`, per-channel stats).
/// For convolutional activations, rows are flattened batch x time positions.
/// Variance is the population variance; the caller decides whether the
/// returned batch stats update the running estimates.
pub fn batchnorm_train_forward<S: Scalar>(
    input: &Tensor<S>,
    gamma: &Tensor<S>,
    beta: &Tensor<S>,
    eps: S,
) -> Result<(Tensor<S>, BnCache<S>, BnBatchStats<S>)> {
    let (n, c) = (input.rows(), input.cols());
    if n < 2 {
        return Err(Error::invalid(
            "batchnorm train mode requires at least 2 rows",
        ));
    }
    let xd = input.data();
    let inv_n = S::one() / S::from_f64_lossy(n as f64);
    let mut mean = vec![S::zero(); c];
    for r in 0..n {
        for (ch, m) in mean.iter_mut().enumerate() {
            *m += xd[r * c + ch];
        }
    }
    for m in mean.iter_mut() {
        *m *= inv_n;
    }
    let mut var = vec![S::zero(); c];
    for r in 0..n {
        for (ch, v) in var.iter_mut().enumerate() {
            let d = xd[r * c + ch] - mean[ch];
            *v += d * d;
        }
    }
    for v in var.iter_mut() {
        *v *= inv_n;
    }
    let inv_std: Vec<S> = var.iter().map(|&v| S::one() / (v + eps).sqrt()).collect();

    let mut normalized = Tensor::zeros(&[n, c]);
    let mut out = Tensor::zeros(&[n, c]);
    {
        let nd = normalized.data_mut();
        let od = out.data_mut();
        for r in 0..n {
            for ch in 0..c {
                let xhat = (xd[r * c + ch] - mean[ch]) * inv_std[ch];
                nd[r * c + ch] = xhat;
                od[r * c + ch] = gamma.data()[ch] * xhat + beta.data()[ch];
            }
        }
    }
    Ok((
        out,
        BnCache {
            normalized,
            inv_std,
        },
        BnBatchStats { mean, var },
    ))
}

/// Evaluation-mode batch normalization using running statistics.
pub fn batchnorm_eval_forward<S: Scalar>(
    input: &Tensor<S>,
    gamma: &Tensor<S>,
    beta: &Tensor<S>,
    running_mean: &Tensor<S>,
    running_var: &Tensor<S>,
    eps: S,
) -> Tensor<S> {
    let (n, c) = (input.rows(), input.cols());
    let mut out = Tensor::zeros(&[n, c]);
    let xd = input.data();
    let od = out.data_mut();
    for ch in 0..c {
        let inv = S::one() / (running_var.data()[ch] + eps).sqrt();
        let (g, b, m) = (gamma.data()[ch], beta.data()[ch], running_mean.data()[ch]);
        for r in 0..n {
            od[r * c + ch] = g * (xd[r * c + ch] - m) * inv + b;
        }
    }
    out
}

/// Backward pass of training-mode batchnorm.
/// Returns (grad_input, grad_gamma, grad_beta).
pub fn batchnorm_backward<S: Scalar>(
    cache: &BnCache<S>,
    gamma: &Tensor<S>,
    grad_out: &Tensor<S>,
) -> (Tensor<S>, Tensor<S>, Tensor<S>) {
    let (n, c) = (grad_out.rows(), grad_out.cols());
    let gd = grad_out.data();
    let xhat = cache.normalized.data();
    let inv_n = S::one() / S::from_f64_lossy(n as f64);

    let mut grad_gamma = Tensor::zeros(&[c]);
    let mut grad_beta = Tensor::zeros(&[c]);
    let mut sum_dxhat = vec![S::zero(); c];
    let mut sum_dxhat_xhat = vec![S::zero(); c];
    {
        let gg = grad_gamma.data_mut();
        let gb = grad_beta.data_mut();
        for r in 0..n {
            for ch in 0..c {
                let g = gd[r * c + ch];
                let xh = xhat[r * c + ch];
                gg[ch] += g * xh;
                gb[ch] += g;
                let dxhat = g * gamma.data()[ch];
                sum_dxhat[ch] += dxhat;
                sum_dxhat_xhat[ch] += dxhat * xh;
            }
        }
    }
    let mut grad_input = Tensor::zeros(&[n, c]);
    let gi = grad_input.data_mut();
    for r in 0..n {
        for ch in 0..c {
            let dxhat = gd[r * c + ch] * gamma.data()[ch];
            gi[r * c + ch] = cache.inv_std[ch]
                * (dxhat - inv_n * sum_dxhat[ch] - xhat[r * c + ch] * inv_n * sum_dxhat_xhat[ch]);
        }
    }
    (grad_input, grad_gamma, grad_beta)
}

/// Elementwise max(0, x).
pub fn relu_forward<S: Scalar>(input: &Tensor<S>) -> Tensor<S> {
    let mut out = input.clone();
    for v in out.data_mut() {
        if *v < S::zero() {
            *v = S::zero();
        }
    }
    out
}

/// Masks the upstream gradient where the forward input was <= 0.
pub fn relu_backward<S: Scalar>(input: &Tensor<S>, grad_out: &Tensor<S>) -> Tensor<S> {
    debug_assert_eq!(input.shape(), grad_out.shape());
    let mut out = grad_out.clone();
    for (g, &x) in out.data_mut().iter_mut().zip(input.data()) {
        if x <= S::zero() {
            *g = S::zero();
        }
    }
    out
}

/// Global max pooling over time: `T x C` -> `C`, ties broken to smallest t.
pub fn maxpool_time_forward<S: Scalar>(input: &Tensor<S>) -> (Tensor<S>, Vec<usize>) {
    let (t, c) = (input.rows(), input.cols());
    let xd = input.data();
    let mut out = Tensor::zeros(&[c]);
    let mut argmax = vec![0usize; c];
    for ch in 0..c {
        let mut best = xd[ch];
        let mut best_t = 0usize;
        for ti in 1..t {
            let v = xd[ti * c + ch];
            if v > best {
                best = v;
                best_t = ti;
            }
        }
        out.data_mut()[ch] = best;
        argmax[ch] = best_t;
    }
    (out, argmax)
}

/// Routes the pooled gradient back to the argmax time steps.
pub fn maxpool_time_backward<S: Scalar>(
    t: usize,
    argmax: &[usize],
    grad_out: &Tensor<S>,
) -> Tensor<S> {
    let c = argmax.len();
    let mut grad_input = Tensor::zeros(&[t, c]);
    let gi = grad_input.data_mut();
    for (ch, (&ti, &g)) in argmax.iter().zip(grad_out.data()).enumerate() {
        gi[ti * c + ch] += g;
    }
    grad_input
}

/// Affine map: `B x I` input, `O x I` weights, `O` bias -> `B x O`.
pub fn linear_forward<S: Scalar>(
    input: &Tensor<S>,
    weights: &Tensor<S>,
    bias: &Tensor<S>,
) -> Result<Tensor<S>> {
    let (b, i) = (input.rows(), input.cols());
    let (o, wi) = (weights.shape()[0], weights.shape()[1]);
    if wi != i {
        return Err(Error::shape(format!(
            "linear: input dim {i} != weight input dim {wi}"
        )));
    }
    if bias.len() != o {
        return Err(Error::shape("linear: bias length != output dim"));
    }
    let mut out = Tensor::zeros(&[b, o]);
    for bi in 0..b {
        let xrow = input.row(bi);
        let orow = out.row_mut(bi);
        for oi in 0..o {
            let wrow = &weights.data()[oi * i..(oi + 1) * i];
            let mut acc = bias.data()[oi];
            for (x, w) in xrow.iter().zip(wrow) {
                acc += *x * *w;
            }
            orow[oi] = acc;
        }
    }
    Ok(out)
}

/// Gradients of [`linear_forward`]: (grad_input, grad_weights, grad_bias).
pub fn linear_backward<S: Scalar>(
    input: &Tensor<S>,
    weights: &Tensor<S>,
    grad_out: &Tensor<S>,
) -> (Tensor<S>, Tensor<S>, Tensor<S>) {
    let (b, i) = (input.rows(), input.cols());
    let o = weights.shape()[0];
    debug_assert_eq!(grad_out.shape(), &[b, o]);

    let mut grad_input = Tensor::zeros(&[b, i]);
    let mut grad_weights = Tensor::zeros(&[o, i]);
    let mut grad_bias = Tensor::zeros(&[o]);
    let gw = grad_weights.data_mut();
    let gb = grad_bias.data_mut();
    for bi in 0..b {
        let xrow = input.row(bi);
        let grow = grad_out.row(bi);
        let girow = grad_input.row_mut(bi);
        for oi in 0..o {
            let g = grow[oi];
            if g == S::zero() {
                continue;
            }
            gb[oi] += g;
            let wrow = &weights.data()[oi * i..(oi + 1) * i];
            for ii in 0..i {
                gw[oi * i + ii] += g * xrow[ii];
                girow[ii] += g * wrow[ii];
            }
        }
    }
    (grad_input, grad_weights, grad_bias)
}
