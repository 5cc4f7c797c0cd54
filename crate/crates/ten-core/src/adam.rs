//! Adam optimizer over a [`ParamStore`].
//!
//! Standard update with bias correction:
//!
//! ```text
//! m ← β₁ m + (1−β₁) g        m̂ = m / (1 − β₁^t)
//! v ← β₂ v + (1−β₂) g²       v̂ = v / (1 − β₂^t)
//! θ ← θ − lr · m̂ / (√v̂ + ε)
//! ```
//!
//! with the step counter incremented before bias correction, so the first
//! step moves each coordinate by ≈ −lr·sign(g). Parameters with no
//! gradient this step are treated as having gradient zero (their moments
//! decay), which also means a never-touched parameter never moves.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::math;
use crate::params::{ParamId, ParamStore};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamConfig {
    pub fn with_learning_rate(learning_rate: f64) -> Self {
        AdamConfig { learning_rate, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AdamError {
    /// A gradient contained NaN/Inf; fail fast, naming the parameter.
    NonFiniteGradient { param: String },
    /// Gradient shape disagrees with its parameter (a caller bug).
    ShapeMismatch { param: String },
}

impl fmt::Display for AdamError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AdamError::NonFiniteGradient { param } => {
                write!(f, "non-finite gradient for parameter '{param}'")
            }
            AdamError::ShapeMismatch { param } => {
                write!(f, "gradient shape mismatch for parameter '{param}'")
            }
        }
    }
}

pub struct AdamState {
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    step: u64,
}

impl AdamState {
    /// Fresh zero moments shaped like the store's current entries.
    pub fn new(store: &ParamStore) -> Self {
        let m = store.iter().map(|(_, _, t)| Tensor::zeros(t.dims())).collect();
        let v = store.iter().map(|(_, _, t)| Tensor::zeros(t.dims())).collect();
        AdamState { m, v, step: 0 }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One update over the whole store. `grads` holds this step's
    /// gradients by parameter id; absent ids mean zero gradient.
    pub fn step(
        &mut self,
        store: &mut ParamStore,
        grads: &[(ParamId, Tensor)],
        cfg: &AdamConfig,
    ) -> Result<(), AdamError> {
        let mut by_id: Vec<Option<&Tensor>> = alloc::vec![None; store.len()];
        for (id, g) in grads {
            let name = store.name(*id);
            if g.dims() != store.get(*id).dims() {
                return Err(AdamError::ShapeMismatch { param: name.to_string() });
            }
            if !g.all_finite() {
                return Err(AdamError::NonFiniteGradient { param: name.to_string() });
            }
            by_id[id.index()] = Some(g);
        }

        self.step += 1;
        let bc1 = 1.0 - math::powi(cfg.beta1, self.step);
        let bc2 = 1.0 - math::powi(cfg.beta2, self.step);

        for i in 0..store.len() {
            let id = ParamId::from_index(i);
            let m = self.m[i].data_mut();
            let v = self.v[i].data_mut();
            let theta = store.get_mut(id).data_mut();
            match by_id[i] {
                Some(g) => {
                    for ((mi, vi), (ti, &gi)) in
                        m.iter_mut().zip(v.iter_mut()).zip(theta.iter_mut().zip(g.data()))
                    {
                        *mi = cfg.beta1 * *mi + (1.0 - cfg.beta1) * gi;
                        *vi = cfg.beta2 * *vi + (1.0 - cfg.beta2) * gi * gi;
                        let m_hat = *mi / bc1;
                        let v_hat = *vi / bc2;
                        *ti -= cfg.learning_rate * m_hat / (math::sqrt(v_hat) + cfg.epsilon);
                    }
                }
                None => {
                    for ((mi, vi), ti) in m.iter_mut().zip(v.iter_mut()).zip(theta.iter_mut()) {
                        *mi *= cfg.beta1;
                        *vi *= cfg.beta2;
                        let m_hat = *mi / bc1;
                        let v_hat = *vi / bc2;
                        *ti -= cfg.learning_rate * m_hat / (math::sqrt(v_hat) + cfg.epsilon);
                    }
                }
            }
        }
        Ok(())
    }
}
