use std::sync::Arc;

use rand::Rng;

use super::tensor::{Scalar, Tensor};
use crate::error::{Result, StcError};

/// A trainable tensor with its Adam moments.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameter<T> {
    pub name: String,
    value: Arc<Tensor<T>>,
    pub m: Vec<T>,
    pub v: Vec<T>,
    pub t: u64,
}

impl<T: Scalar> Parameter<T> {
    pub fn new(name: impl Into<String>, value: Tensor<T>) -> Self {
        let n = value.numel();
        Self {
            name: name.into(),
            value: Arc::new(value),
            m: vec![T::zero(); n],
            v: vec![T::zero(); n],
            t: 0,
        }
    }

    /// Rebuilds a parameter together with saved optimizer state.
    pub fn with_state(name: impl Into<String>, value: Tensor<T>, m: Vec<T>, v: Vec<T>, t: u64) -> Result<Self> {
        let name = name.into();
        if m.len() != value.numel() || v.len() != value.numel() {
            return Err(StcError::Format(format!("adam state size mismatch for {name}")));
        }
        Ok(Self {
            name,
            value: Arc::new(value),
            m,
            v,
            t,
        })
    }

    /// Uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
    pub fn fan_in_uniform(name: impl Into<String>, shape: &[usize], fan_in: usize, rng: &mut impl Rng) -> Self {
        let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
        let n: usize = shape.iter().product();
        let data = (0..n).map(|_| T::from_f64(rng.gen_range(-bound..bound))).collect();
        Self::new(name, Tensor::new(shape.to_vec(), data).expect("shape matches"))
    }

    pub fn value(&self) -> &Tensor<T> {
        &self.value
    }

    pub(crate) fn shared(&self) -> &Arc<Tensor<T>> {
        &self.value
    }

    /// Replaces the value and resets nothing else; used when loading.
    pub fn set_value(&mut self, value: Tensor<T>) -> Result<()> {
        if value.shape() != self.value.shape() {
            return Err(StcError::Argument(format!(
                "parameter {}: shape {:?} does not match {:?}",
                self.name,
                value.shape(),
                self.value.shape()
            )));
        }
        self.value = Arc::new(value);
        Ok(())
    }

    pub fn numel(&self) -> usize {
        self.value.numel()
    }
}

/// Bias-corrected Adam.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for Adam {
    fn default() -> Self {
        Self {
            beta1: 0.5,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl Adam {
    /// Applies one update. A missing gradient counts as zero but still
    /// advances the step count. Non-finite gradients abort before any
    /// parameter is touched.
    pub fn step<T: Scalar>(&self, params: &mut [Parameter<T>], grads: &[Option<Tensor<T>>], lr: f64) -> Result<()> {
        if params.len() != grads.len() {
            return Err(StcError::Argument("one gradient slot per parameter".into()));
        }
        for (p, g) in params.iter().zip(grads) {
            if let Some(g) = g {
                if g.shape() != p.value.shape() {
                    return Err(StcError::Argument(format!("gradient shape mismatch for {}", p.name)));
                }
                if !g.is_finite() {
                    return Err(StcError::Training(format!("non-finite gradient for {}", p.name)));
                }
            }
        }
        let (b1, b2) = (T::from_f64(self.beta1), T::from_f64(self.beta2));
        let (one, eps) = (T::one(), T::from_f64(self.eps));
        for (p, g) in params.iter_mut().zip(grads) {
            p.t += 1;
            let c1 = T::from_f64(1.0 - self.beta1.powi(p.t as i32));
            let c2 = T::from_f64(1.0 - self.beta2.powi(p.t as i32));
            let lr = T::from_f64(lr);
            let mut value = (*p.value).clone();
            let zero = T::zero();
            for i in 0..value.numel() {
                let gi = g.as_ref().map_or(zero, |g| g.data()[i]);
                p.m[i] = b1 * p.m[i] + (one - b1) * gi;
                p.v[i] = b2 * p.v[i] + (one - b2) * gi * gi;
                let m_hat = p.m[i] / c1;
                let v_hat = p.v[i] / c2;
                let x = &mut value.data_mut()[i];
                *x = *x - lr * m_hat / (v_hat.sqrt() + eps);
            }
            p.value = Arc::new(value);
        }
        Ok(())
    }
}
