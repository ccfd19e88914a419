use serde::{Deserialize, Serialize};

use crate::autodiff::tensor::Tensor;
use crate::error::{invalid, Error, Result};
use crate::scalar::Scalar;

/// Adam hyperparameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            beta1: 0.0,
            beta2: 0.9,
            epsilon: 1e-8,
        }
    }
}

/// Per-parameter moment estimates plus the shared step counter.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<T> {
    pub config: AdamConfig,
    pub step: u64,
    pub first_moment: Vec<Vec<T>>,
    pub second_moment: Vec<Vec<T>>,
}

impl<T: Scalar> AdamState<T> {
    /// Zeroed moments shaped like `params`.
    pub fn new(config: AdamConfig, params: &[&Tensor<T>]) -> Self {
        let zeros: Vec<Vec<T>> = params.iter().map(|p| vec![T::zero(); p.len()]).collect();
        Self {
            config,
            step: 0,
            first_moment: zeros.clone(),
            second_moment: zeros,
        }
    }

    /// One bias-corrected Adam update using each parameter's stored gradient.
    /// A parameter without a gradient is updated as if its gradient were zero.
    pub fn step(&mut self, params: &mut [&mut Tensor<T>]) -> Result<()> {
        if params.len() != self.first_moment.len() {
            return Err(invalid(format!(
                "adam: state tracks {} parameters, got {}",
                self.first_moment.len(),
                params.len()
            )));
        }
        for (p, m) in params.iter().zip(&self.first_moment) {
            if p.len() != m.len() || p.grad().is_some_and(|g| g.len() != p.len()) {
                return Err(Error::ShapeMismatch {
                    op: "adam_step",
                    lhs: p.shape().to_vec(),
                    rhs: vec![m.len()],
                });
            }
        }

        self.step += 1;
        let c = self.config;
        let (b1, b2) = (T::of(c.beta1), T::of(c.beta2));
        let (one_b1, one_b2) = (T::of(1.0 - c.beta1), T::of(1.0 - c.beta2));
        let t = self.step as i32;
        let bias1 = T::of(1.0 - c.beta1.powi(t));
        let bias2 = T::of(1.0 - c.beta2.powi(t));
        let lr = T::of(c.lr);
        let eps = T::of(c.epsilon);

        for ((p, m), v) in params
            .iter_mut()
            .zip(&mut self.first_moment)
            .zip(&mut self.second_moment)
        {
            let grad = p
                .grad()
                .map_or_else(|| vec![T::zero(); m.len()], <[T]>::to_vec);
            for (((w, g), mi), vi) in p
                .data_mut()
                .iter_mut()
                .zip(grad)
                .zip(m.iter_mut())
                .zip(v.iter_mut())
            {
                *mi = b1 * *mi + one_b1 * g;
                *vi = b2 * *vi + one_b2 * g * g;
                *w -= lr * (*mi / bias1) / ((*vi / bias2).sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn param(values: &[f64], grad: &[f64]) -> Tensor<f64> {
        let mut t = Tensor::matrix(1, values.len(), values.to_vec()).unwrap();
        t.set_grad(grad.to_vec()).unwrap();
        t
    }

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        let cfg = AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        };
        let mut p = param(&[1.0, -2.0, 0.5], &[3.0, -0.25, 40.0]);
        let mut state = AdamState::new(cfg, &[&p]);
        state.step(&mut [&mut p]).unwrap();
        let expected = [1.0 - 1e-3, -2.0 + 1e-3, 0.5 - 1e-3];
        for (got, want) in p.data().iter().zip(expected) {
            assert!((got - want).abs() < 1e-6 * cfg.lr, "{got} vs {want}");
        }
        assert_eq!(state.step, 1);
    }

    #[test]
    fn zero_gradient_leaves_parameters_unchanged() {
        let mut p = param(&[0.3, -0.7], &[0.0, 0.0]);
        let before = p.data().to_vec();
        let mut state = AdamState::new(AdamConfig::default(), &[&p]);
        for _ in 0..10 {
            state.step(&mut [&mut p]).unwrap();
        }
        assert_eq!(p.data(), &before[..]);
        assert_eq!(state.step, 10);
    }

    #[test]
    fn identical_calls_are_bit_identical() {
        let run = || {
            let mut p = param(&[0.1, 0.2], &[0.5, -1.5]);
            let mut state = AdamState::new(AdamConfig::default(), &[&p]);
            for _ in 0..3 {
                state.step(&mut [&mut p]).unwrap();
            }
            (p.data().to_vec(), state)
        };
        let (a, sa) = run();
        let (b, sb) = run();
        assert_eq!(a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        assert_eq!(sa, sb);
    }

    #[test]
    fn rejects_shape_mismatch() {
        let mut p = param(&[0.1, 0.2], &[0.5, -1.5]);
        let other = Tensor::<f64>::zeros(&[1, 3]);
        let mut state = AdamState::new(AdamConfig::default(), &[&other]);
        assert!(matches!(
            state.step(&mut [&mut p]),
            Err(Error::ShapeMismatch { op: "adam_step", .. })
        ));
    }
}
