//! Adaptive-moment optimizer with bias correction.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::Real;
use crate::tensor::ParamTensor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            ..Self::default()
        }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 5e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
struct Moments<F> {
    m: Vec<F>,
    v: Vec<F>,
}

/// First/second moment estimates keyed by parameter name.
#[derive(Debug, Clone, Default)]
pub struct Adam<F> {
    state: HashMap<String, Moments<F>>,
}

impl<F: Real> Adam<F> {
    pub fn new() -> Self {
        Self {
            state: HashMap::new(),
        }
    }

    /// Applies one update with 1-based `step_index`. Gradients are left as is.
    pub fn step(
        &mut self,
        params: &mut [&mut ParamTensor<F>],
        config: &AdamConfig,
        step_index: usize,
    ) -> Result<()> {
        for p in params.iter() {
            if p.grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFiniteGrad(p.name.clone()));
            }
        }
        let t = step_index.max(1) as i32;
        let (b1, b2) = (F::lit(config.beta1), F::lit(config.beta2));
        let bc1 = F::one() - b1.powi(t);
        let bc2 = F::one() - b2.powi(t);
        let lr = F::lit(config.lr);
        let eps = F::lit(config.eps);
        for p in params.iter_mut() {
            let st = self
                .state
                .entry(p.name.clone())
                .or_insert_with(|| Moments {
                    m: vec![F::zero(); p.len()],
                    v: vec![F::zero(); p.len()],
                });
            for i in 0..p.values.len() {
                let g = p.grad[i];
                st.m[i] = b1 * st.m[i] + (F::one() - b1) * g;
                st.v[i] = b2 * st.v[i] + (F::one() - b2) * g * g;
                let m_hat = st.m[i] / bc1;
                let v_hat = st.v[i] / bc2;
                p.values[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

/// One adaptive-moment update over `params`.
pub fn sgd_adam_step<F: Real>(
    optimizer: &mut Adam<F>,
    params: &mut [&mut ParamTensor<F>],
    config: &AdamConfig,
    step_index: usize,
) -> Result<()> {
    optimizer.step(params, config, step_index)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_grads_leave_params() {
        let mut p = ParamTensor::<f64>::from_values("p", &[3], vec![1.0, -2.0, 3.0]);
        let mut opt = Adam::new();
        for t in 1..5 {
            opt.step(&mut [&mut p], &AdamConfig::with_lr(0.1), t).unwrap();
        }
        assert_eq!(p.values, vec![1.0, -2.0, 3.0]);
    }

    #[test]
    fn first_step_moves_by_lr() {
        // t=1: m̂ = g, v̂ = g², update = lr·g/(|g|+eps) ≈ lr
        let mut p = ParamTensor::<f64>::from_values("s", &[1], vec![0.5]);
        p.grad[0] = 1.0;
        let mut opt = Adam::new();
        opt.step(&mut [&mut p], &AdamConfig::with_lr(0.1), 1).unwrap();
        assert!((p.values[0] - 0.4).abs() < 1e-6);
        assert_eq!(p.grad[0], 1.0);
    }

    #[test]
    fn identical_params_stay_identical() {
        let mut a = ParamTensor::<f32>::from_values("a", &[2], vec![0.3, 0.1]);
        let mut b = ParamTensor::<f32>::from_values("b", &[2], vec![0.3, 0.1]);
        let mut opt = Adam::new();
        for t in 1..20 {
            let g = [(t as f32).sin(), 0.2];
            a.grad.copy_from_slice(&g);
            b.grad.copy_from_slice(&g);
            opt.step(&mut [&mut a, &mut b], &AdamConfig::with_lr(0.01), t)
                .unwrap();
        }
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn non_finite_grad_names_param() {
        let mut p = ParamTensor::<f64>::zeros("grid.coar.x", &[2]);
        p.grad[1] = f64::NAN;
        let err = Adam::new()
            .step(&mut [&mut p], &AdamConfig::default(), 1)
            .unwrap_err();
        assert!(err.to_string().contains("grid.coar.x"));
    }
}
