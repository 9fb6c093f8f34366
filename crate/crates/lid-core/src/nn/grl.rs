//! Gradient reversal layer: identity forward, `-lambda * g` backward.

use crate::tensor::{Scalar, Tensor};

/// Forward pass is a bit-exact identity.
pub fn grl_forward<S: Scalar>(input: &Tensor<S>) -> Tensor<S> {
    input.clone()
}

/// Backward pass multiplies the upstream gradient by `-lambda`.
pub fn grl_backward<S: Scalar>(grad_out: &Tensor<S>, lambda: S) -> Tensor<S> {
    let mut out = grad_out.clone();
    let neg = -lambda;
    for g in out.data_mut() {
        *g = neg * *g;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forward_is_bit_exact_identity() {
        let x = Tensor::<f32>::from_vec(&[4], vec![1.5, -0.0, 3.25e-12, -7.0]).unwrap();
        let y = grl_forward(&x);
        for (a, b) in x.data().iter().zip(y.data()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn backward_flips_sign_exactly_at_lambda_one() {
        let g = Tensor::<f32>::from_vec(&[3], vec![0.5, -2.0, 1e-20]).unwrap();
        let r = grl_backward(&g, 1.0);
        for (a, b) in g.data().iter().zip(r.data()) {
            assert_eq!((-a).to_bits(), b.to_bits());
        }
    }

    #[test]
    fn lambda_zero_detaches() {
        let g = Tensor::<f32>::from_vec(&[2], vec![3.0, -4.0]).unwrap();
        let r = grl_backward(&g, 0.0);
        assert!(r.data().iter().all(|&v| v == 0.0));
    }
}
