use alloc::vec::Vec;

use super::{Matrix, Real};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_learning_rate(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            ..Self::default()
        }
    }
}

/// Adam moments for a fixed list of parameter tensors.
///
/// One state belongs to one parameter set; it is not meant to be shared
/// between concurrent updates.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T: Real> {
    pub config: AdamConfig,
    step: u64,
    first: Vec<Matrix<T>>,
    second: Vec<Matrix<T>>,
}

impl<T: Real> AdamState<T> {
    pub fn new(config: AdamConfig, shapes: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let (first, second): (Vec<_>, Vec<_>) = shapes
            .into_iter()
            .map(|(r, c)| (Matrix::zeros(r, c), Matrix::zeros(r, c)))
            .unzip();
        Self {
            config,
            step: 0,
            first,
            second,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One bias-corrected Adam update of every parameter tensor.
    pub fn step(&mut self, params: &mut [&mut Matrix<T>], grads: &[Matrix<T>]) -> Result<()> {
        if params.len() != self.first.len() || grads.len() != self.first.len() {
            return Err(Error::Dimension {
                op: "adam_step",
                left: (self.first.len(), 1),
                right: (params.len(), grads.len()),
            });
        }
        for ((p, g), m) in params.iter().zip(grads).zip(&self.first) {
            if p.shape() != m.shape() || g.shape() != m.shape() {
                return Err(Error::Dimension {
                    op: "adam_step",
                    left: p.shape(),
                    right: g.shape(),
                });
            }
        }
        self.step += 1;
        let c = self.config;
        let t = self.step as i32;
        let bias1 = 1.0 - libm::pow(c.beta1, t as f64);
        let bias2 = 1.0 - libm::pow(c.beta2, t as f64);
        let (b1, b2) = (T::of_f64(c.beta1), T::of_f64(c.beta2));
        let (one_b1, one_b2) = (T::of_f64(1.0 - c.beta1), T::of_f64(1.0 - c.beta2));
        let (inv_bias1, inv_bias2) = (T::of_f64(1.0 / bias1), T::of_f64(1.0 / bias2));
        let lr = T::of_f64(c.learning_rate);
        let eps = T::of_f64(c.epsilon);

        for (i, p) in params.iter_mut().enumerate() {
            let g = grads[i].as_slice();
            let m = self.first[i].as_mut_slice();
            let v = self.second[i].as_mut_slice();
            for (k, w) in p.as_mut_slice().iter_mut().enumerate() {
                let gk = g[k];
                m[k] = b1 * m[k] + one_b1 * gk;
                v[k] = b2 * v[k] + one_b2 * gk * gk;
                let m_hat = m[k] * inv_bias1;
                let v_hat = v[k] * inv_bias2;
                *w = *w - lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = Matrix::from_vec(1, 3, vec![1.0f64, -2.0, 0.5]).unwrap();
        let before = p.clone();
        let mut state = AdamState::new(AdamConfig::default(), [(1, 3)]);
        state.step(&mut [&mut p], &[Matrix::zeros(1, 3)]).unwrap();
        assert_eq!(p, before);
        assert_eq!(state.step_count(), 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // t=1: m = 0.1, v = 0.001, m̂ = 1, v̂ = 1 → p = 1 - 0.1 / (1 + 1e-8)
        let mut p = Matrix::from_vec(1, 1, vec![1.0f64]).unwrap();
        let mut state = AdamState::new(AdamConfig::with_learning_rate(0.1), [(1, 1)]);
        state
            .step(&mut [&mut p], &[Matrix::from_vec(1, 1, vec![1.0]).unwrap()])
            .unwrap();
        let expected = 1.0 - 0.1 / (1.0 + 1e-8);
        assert!((p[(0, 0)] - expected).abs() < 1e-12);
        assert!((p[(0, 0)] - 0.9).abs() < 1e-6);
    }

    #[test]
    fn identical_states_give_identical_results() {
        let grads = [Matrix::from_vec(2, 1, vec![0.3f32, -0.7]).unwrap()];
        let run = || {
            let mut p = Matrix::from_vec(2, 1, vec![0.1f32, 0.2]).unwrap();
            let mut s = AdamState::new(AdamConfig::default(), [(2, 1)]);
            for _ in 0..5 {
                s.step(&mut [&mut p], &grads).unwrap();
            }
            (p, s)
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn shape_mismatch() {
        let mut p = Matrix::<f64>::zeros(2, 2);
        let mut s = AdamState::new(AdamConfig::default(), [(2, 2)]);
        assert!(matches!(
            s.step(&mut [&mut p], &[Matrix::zeros(1, 2)]),
            Err(Error::Dimension { .. })
        ));
    }
}
