//! Dense layer set with hand-derived backward passes, gradient reversal,
//! softmax cross-entropy and Adam.

pub mod gradcheck;
pub mod grl;
pub mod layers;
pub mod loss;
pub mod params;

pub use gradcheck::{finite_diff_grad, max_rel_error};
pub use grl::{grl_backward, grl_forward};
pub use layers::{
    batchnorm_backward, batchnorm_eval_forward, batchnorm_train_forward, conv1d_backward,
    conv1d_forward, linear_backward, linear_forward, maxpool_time_backward, maxpool_time_forward,
    relu_backward, relu_forward, BnBatchStats, BnCache,
};
pub use loss::{softmax_rows, softmax_xent};
pub use params::{adam_step, AdamConfig, Param, ParamSet};

/// He-uniform initialization bound for a layer with the given fan-in.
pub fn he_uniform_bound(fan_in: usize) -> f64 {
    (6.0 / fan_in as f64).sqrt()
}

#[cfg(test)]
mod fd_tests {
    //! Single-case finite-difference checks per layer. The multi-seed sweep
    //! lives in the acceptance suite.

    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::tensor::Tensor;

    const H: f64 = 1e-5;
    const TOL: f64 = 1e-4;

    fn rand_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<f64> {
        let len = shape.iter().product();
        let data = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
        Tensor::from_vec(shape, data).unwrap()
    }

    /// Scalar objective: weighted sum of the output, with fixed weights.
    fn weighted_sum(out: &Tensor<f64>, coeffs: &Tensor<f64>) -> f64 {
        out.data()
            .iter()
            .zip(coeffs.data())
            .map(|(a, b)| a * b)
            .sum()
    }

    #[test]
    fn conv1d_backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (t, c_in, c_out, w) = (7, 2, 3, 3);
        let input = rand_tensor(&mut rng, &[t, c_in]);
        let weights = rand_tensor(&mut rng, &[c_out, c_in, w]);
        let bias = rand_tensor(&mut rng, &[c_out]);
        let coeffs = rand_tensor(&mut rng, &[t - w + 1, c_out]);

        let out = conv1d_forward(&input, &weights, &bias).unwrap();
        assert_eq!(out.shape(), &[t - w + 1, c_out]);
        let (gi, gw, gb) = conv1d_backward(&input, &weights, &coeffs);

        let fd_gi = finite_diff_grad(
            |x| weighted_sum(&conv1d_forward(x, &weights, &bias).unwrap(), &coeffs),
            &input,
            H,
        );
        let fd_gw = finite_diff_grad(
            |p| weighted_sum(&conv1d_forward(&input, p, &bias).unwrap(), &coeffs),
            &weights,
            H,
        );
        let fd_gb = finite_diff_grad(
            |b| weighted_sum(&conv1d_forward(&input, &weights, b).unwrap(), &coeffs),
            &bias,
            H,
        );
        assert!(max_rel_error(&gi, &fd_gi) < TOL);
        assert!(max_rel_error(&gw, &fd_gw) < TOL);
        assert!(max_rel_error(&gb, &fd_gb) < TOL);
    }

    #[test]
    fn batchnorm_backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let input = rand_tensor(&mut rng, &[4, 3]);
        let gamma = rand_tensor(&mut rng, &[3]);
        let beta = rand_tensor(&mut rng, &[3]);
        let coeffs = rand_tensor(&mut rng, &[4, 3]);
        let eps = 1e-5;

        let (_, cache, _) = batchnorm_train_forward(&input, &gamma, &beta, eps).unwrap();
        let (gi, gg, gb) = batchnorm_backward(&cache, &gamma, &coeffs);

        let run = |x: &Tensor<f64>, g: &Tensor<f64>, b: &Tensor<f64>| {
            weighted_sum(&batchnorm_train_forward(x, g, b, eps).unwrap().0, &coeffs)
        };
        let fd_gi = finite_diff_grad(|x| run(x, &gamma, &beta), &input, H);
        let fd_gg = finite_diff_grad(|g| run(&input, g, &beta), &gamma, H);
        let fd_gb = finite_diff_grad(|b| run(&input, &gamma, b), &beta, H);
        assert!(max_rel_error(&gi, &fd_gi) < TOL, "{}", max_rel_error(&gi, &fd_gi));
        assert!(max_rel_error(&gg, &fd_gg) < TOL);
        assert!(max_rel_error(&gb, &fd_gb) < TOL);
    }

    #[test]
    fn relu_backward_matches_finite_differences_away_from_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let mut input = rand_tensor(&mut rng, &[5, 2]);
        for v in input.data_mut() {
            // keep samples away from the kink
            if v.abs() < 0.1 {
                *v += 0.2;
            }
        }
        let coeffs = rand_tensor(&mut rng, &[5, 2]);
        let gx = relu_backward(&input, &coeffs);
        let fd = finite_diff_grad(|x| weighted_sum(&relu_forward(x), &coeffs), &input, H);
        assert!(max_rel_error(&gx, &fd) < 1e-6);
    }

    #[test]
    fn maxpool_backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let input = rand_tensor(&mut rng, &[6, 3]);
        let coeffs = rand_tensor(&mut rng, &[3]);
        let (_, argmax) = maxpool_time_forward(&input);
        let gx = maxpool_time_backward(6, &argmax, &coeffs);
        let fd = finite_diff_grad(
            |x| weighted_sum(&maxpool_time_forward(x).0, &coeffs),
            &input,
            H,
        );
        assert!(max_rel_error(&gx, &fd) < TOL);
    }

    #[test]
    fn linear_backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let input = rand_tensor(&mut rng, &[3, 4]);
        let weights = rand_tensor(&mut rng, &[2, 4]);
        let bias = rand_tensor(&mut rng, &[2]);
        let coeffs = rand_tensor(&mut rng, &[3, 2]);

        let (gi, gw, gb) = linear_backward(&input, &weights, &coeffs);
        let fd_gi = finite_diff_grad(
            |x| weighted_sum(&linear_forward(x, &weights, &bias).unwrap(), &coeffs),
            &input,
            H,
        );
        let fd_gw = finite_diff_grad(
            |w| weighted_sum(&linear_forward(&input, w, &bias).unwrap(), &coeffs),
            &weights,
            H,
        );
        let fd_gb = finite_diff_grad(
            |b| weighted_sum(&linear_forward(&input, &weights, b).unwrap(), &coeffs),
            &bias,
            H,
        );
        assert!(max_rel_error(&gi, &fd_gi) < 1e-6);
        assert!(max_rel_error(&gw, &fd_gw) < 1e-6);
        assert!(max_rel_error(&gb, &fd_gb) < TOL);
    }

    #[test]
    fn softmax_xent_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let logits = rand_tensor(&mut rng, &[3, 4]);
        let labels = [1usize, 3, 0];
        let (_, grad) = softmax_xent(&logits, &labels).unwrap();
        let fd = finite_diff_grad(|l| softmax_xent(l, &labels).unwrap().0, &logits, H);
        assert!(max_rel_error(&grad, &fd) < TOL);
    }

    #[test]
    fn two_layer_composition_matches_finite_differences() {
        // linear -> relu -> linear -> softmax-xent, gradient w.r.t. both weights.
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let x = rand_tensor(&mut rng, &[4, 3]);
        let w1 = rand_tensor(&mut rng, &[5, 3]);
        let b1 = rand_tensor(&mut rng, &[5]);
        let w2 = rand_tensor(&mut rng, &[2, 5]);
        let b2 = rand_tensor(&mut rng, &[2]);
        let labels = [0usize, 1, 1, 0];

        let loss_of = |w1t: &Tensor<f64>, w2t: &Tensor<f64>| {
            let h = linear_forward(&x, w1t, &b1).unwrap();
            let a = relu_forward(&h);
            let logits = linear_forward(&a, w2t, &b2).unwrap();
            softmax_xent(&logits, &labels).unwrap().0
        };

        // analytic
        let h = linear_forward(&x, &w1, &b1).unwrap();
        let a = relu_forward(&h);
        let logits = linear_forward(&a, &w2, &b2).unwrap();
        let (_, dlogits) = softmax_xent(&logits, &labels).unwrap();
        let (da, dw2, _) = linear_backward(&a, &w2, &dlogits);
        let dh = relu_backward(&h, &da);
        let (_, dw1, _) = linear_backward(&x, &w1, &dh);

        let fd_w1 = finite_diff_grad(|w| loss_of(w, &w2), &w1, H);
        let fd_w2 = finite_diff_grad(|w| loss_of(&w1, w), &w2, H);
        assert!(max_rel_error(&dw1, &fd_w1) < TOL);
        assert!(max_rel_error(&dw2, &fd_w2) < TOL);
    }

    #[test]
    fn finite_diff_matches_analytic_linear_layer() {
        let mut rng = ChaCha8Rng::seed_from_u64(18);
        let input = rand_tensor(&mut rng, &[2, 6]);
        let weights = rand_tensor(&mut rng, &[3, 6]);
        let bias = rand_tensor(&mut rng, &[3]);
        let coeffs = rand_tensor(&mut rng, &[2, 3]);
        let (gi, _, _) = linear_backward(&input, &weights, &coeffs);
        let fd = finite_diff_grad(
            |x| {
                linear_forward(x, &weights, &bias)
                    .unwrap()
                    .data()
                    .iter()
                    .zip(coeffs.data())
                    .map(|(a, b)| a * b)
                    .sum()
            },
            &input,
            H,
        );
        assert!(max_rel_error(&gi, &fd) < 1e-6);
    }
}
