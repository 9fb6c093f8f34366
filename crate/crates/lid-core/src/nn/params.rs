//! Named trainable parameters with optimizer state.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// One trainable tensor: value, accumulated gradient, Adam moments.
#[derive(Clone, Debug)]
pub struct Param<S = f32> {
    pub value: Tensor<S>,
    pub grad: Tensor<S>,
    pub m: Tensor<S>,
    pub v: Tensor<S>,
}

impl<S: Scalar> Param<S> {
    fn new(value: Tensor<S>) -> Self {
        let shape = value.shape().to_vec();
        Param {
            value,
            grad: Tensor::zeros(&shape),
            m: Tensor::zeros(&shape),
            v: Tensor::zeros(&shape),
        }
    }
}

/// Adam hyperparameters.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning_rate must be > 0".into()));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::Config(format!("{name} must be in [0, 1)")));
            }
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Config("epsilon must be > 0".into()));
        }
        Ok(())
    }
}

/// Ordered map of named parameters plus the shared Adam step count.
#[derive(Clone, Debug, Default)]
pub struct ParamSet<S = f32> {
    entries: BTreeMap<String, Param<S>>,
    step_count: u64,
}

impl<S: Scalar> ParamSet<S> {
    pub fn new() -> Self {
        ParamSet {
            entries: BTreeMap::new(),
            step_count: 0,
        }
    }

    pub fn insert(&mut self, name: &str, value: Tensor<S>) {
        self.entries.insert(name.to_string(), Param::new(value));
    }

    pub fn get(&self, name: &str) -> &Param<S> {
        self.entries
            .get(name)
            .unwrap_or_else(|| panic!("unknown parameter {name:?}"))
    }

    pub fn value(&self, name: &str) -> &Tensor<S> {
        &self.get(name).value
    }

    pub fn value_mut(&mut self, name: &str) -> &mut Tensor<S> {
        &mut self
            .entries
            .get_mut(name)
            .unwrap_or_else(|| panic!("unknown parameter {name:?}"))
            .value
    }

    /// Adds `grad` into the named parameter's gradient accumulator.
    pub fn accumulate_grad(&mut self, name: &str, grad: &Tensor<S>) {
        let p = self
            .entries
            .get_mut(name)
            .unwrap_or_else(|| panic!("unknown parameter {name:?}"));
        p.grad.add_assign(grad);
    }

    pub fn zero_grads(&mut self) {
        for p in self.entries.values_mut() {
            p.grad.fill(S::zero());
        }
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Param<S>)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// Total number of scalar parameter values.
    pub fn total_values(&self) -> usize {
        self.entries.values().map(|p| p.value.len()).sum()
    }
}

/// One Adam update with bias correction over every parameter in the set.
/// Gradients are zeroed afterwards.
pub fn adam_step<S: Scalar>(params: &mut ParamSet<S>, cfg: &AdamConfig) {
    params.step_count += 1;
    let t = params.step_count as i32;
    let lr = S::from_f64_lossy(cfg.learning_rate);
    let b1 = S::from_f64_lossy(cfg.beta1);
    let b2 = S::from_f64_lossy(cfg.beta2);
    let eps = S::from_f64_lossy(cfg.epsilon);
    let one = S::one();
    let bc1 = one - b1.powi(t);
    let bc2 = one - b2.powi(t);

    for p in params.entries.values_mut() {
        let g = p.grad.data();
        let m = p.m.data_mut();
        let v = p.v.data_mut();
        let w = p.value.data_mut();
        for i in 0..g.len() {
            m[i] = b1 * m[i] + (one - b1) * g[i];
            v[i] = b2 * v[i] + (one - b2) * g[i] * g[i];
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            w[i] = w[i] - lr * m_hat / (v_hat.sqrt() + eps);
        }
        p.grad.fill(S::zero());
    }
}
