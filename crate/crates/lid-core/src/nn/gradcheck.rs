//! Central finite-difference gradients, used as the oracle for every
//! analytic backward pass in this crate.

use crate::tensor::{Scalar, Tensor};

/// Central differences per coordinate: `(f(x + h e_i) - f(x - h e_i)) / 2h`.
pub fn finite_diff_grad<S: Scalar>(
    mut f: impl FnMut(&Tensor<S>) -> S,
    point: &Tensor<S>,
    h: S,
) -> Tensor<S> {
    assert!(h > S::zero(), "step size must be positive");
    let mut grad = Tensor::zeros(point.shape());
    let mut probe = point.clone();
    let two_h = h + h;
    for i in 0..point.len() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + h;
        let plus = f(&probe);
        probe.data_mut()[i] = orig - h;
        let minus = f(&probe);
        probe.data_mut()[i] = orig;
        grad.data_mut()[i] = (plus - minus) / two_h;
    }
    grad
}

/// Max relative error between two gradients, with an absolute floor so that
/// near-zero components compare sanely.
pub fn max_rel_error<S: Scalar>(analytic: &Tensor<S>, numeric: &Tensor<S>) -> f64 {
    assert_eq!(analytic.shape(), numeric.shape());
    let floor = 1e-6;
    analytic
        .data()
        .iter()
        .zip(numeric.data())
        .map(|(&a, &n)| {
            let a = a.to_f64().unwrap();
            let n = n.to_f64().unwrap();
            (a - n).abs() / (a.abs().max(n.abs())).max(floor)
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_of_squares_gradient() {
        let point = Tensor::<f64>::from_vec(&[2], vec![1.0, 2.0]).unwrap();
        let g = finite_diff_grad(|x| x.data().iter().map(|v| v * v).sum(), &point, 1e-5);
        assert!((g.data()[0] - 2.0).abs() < 1e-8);
        assert!((g.data()[1] - 4.0).abs() < 1e-8);
    }

    #[test]
    fn constant_function_has_zero_gradient() {
        let point = Tensor::<f64>::from_vec(&[3], vec![0.3, -1.0, 5.0]).unwrap();
        let g = finite_diff_grad(|_| 42.0, &point, 1e-5);
        assert!(g.data().iter().all(|&v| v == 0.0));
    }
}
