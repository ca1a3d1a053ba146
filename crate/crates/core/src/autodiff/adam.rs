use serde::{Deserialize, Serialize};

use super::{AutodiffError, Tensor};

/// Bias-corrected Adam.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub step: u64,
    first_moment: Vec<Tensor>,
    second_moment: Vec<Tensor>,
}

impl AdamState {
    pub fn new<'a>(learning_rate: f64, params: impl IntoIterator<Item = &'a Tensor>) -> Self {
        let first_moment: Vec<Tensor> = params.into_iter().map(Tensor::zeros_like).collect();
        let second_moment = first_moment.clone();
        Self { learning_rate, beta1: 0.9, beta2: 0.999, epsilon: 1e-8, step: 0, first_moment, second_moment }
    }

    /// Applies one update in place. Nothing is modified if any gradient is non-finite.
    pub fn step(&mut self, params: &mut [&mut Tensor], grads: &[Tensor]) -> Result<(), AutodiffError> {
        if params.len() != grads.len() || params.len() != self.first_moment.len() {
            return Err(AutodiffError::Shape(format!(
                "adam: {} params, {} grads, {} moment slots",
                params.len(),
                grads.len(),
                self.first_moment.len()
            )));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.shape() != g.shape() || p.shape() != self.first_moment[i].shape() {
                return Err(AutodiffError::Shape(format!(
                    "adam: param {i} has shape {:?}, gradient {:?}",
                    p.shape(),
                    g.shape()
                )));
            }
            if !g.all_finite() {
                return Err(AutodiffError::Numerical(format!("non-finite gradient for parameter {i}")));
            }
        }

        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.learning_rate, self.epsilon);
        for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let m = self.first_moment[i].data_mut();
            let v = self.second_moment[i].data_mut();
            for (((w, &gi), mi), vi) in p.data_mut().iter_mut().zip(g.data()).zip(m.iter_mut()).zip(v.iter_mut()) {
                *mi = b1 * *mi + (1.0 - b1) * gi;
                *vi = b2 * *vi + (1.0 - b2) * gi * gi;
                let m_hat = *mi / bc1;
                let v_hat = *vi / bc2;
                *w -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut w = Tensor::row(&[1.0, -2.0, 3.0]);
        let before = w.clone();
        let mut adam = AdamState::new(1e-3, [&w]);
        for _ in 0..3 {
            adam.step(&mut [&mut w], &[Tensor::row(&[0.0, 0.0, 0.0])]).unwrap();
        }
        assert_eq!(w, before);
    }

    #[test]
    fn first_step_moves_by_learning_rate_against_sign() {
        let mut w = Tensor::row(&[1.0, 1.0, 1.0]);
        let mut adam = AdamState::new(1e-3, [&w]);
        adam.step(&mut [&mut w], &[Tensor::row(&[0.5, -20.0, 3e-3])]).unwrap();
        // Step 1: m_hat = g, v_hat = g^2, so the update is lr * g / (|g| + eps).
        let expected = [1.0 - 1e-3 * 0.5 / (0.5 + 1e-8), 1.0 + 1e-3 * 20.0 / (20.0 + 1e-8), 1.0 - 1e-3 * 3e-3 / (3e-3 + 1e-8)];
        for (a, b) in w.data().iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
            assert!(((1.0 - a).abs() - 1e-3).abs() < 1e-8);
        }
    }

    #[test]
    fn identical_inputs_identical_outputs() {
        let run = || {
            let mut w = Tensor::row(&[0.3, -0.7]);
            let mut adam = AdamState::new(1e-2, [&w]);
            for k in 0..5 {
                let g = Tensor::row(&[0.1 * k as f64, -0.2]);
                adam.step(&mut [&mut w], &[g]).unwrap();
            }
            w
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn nan_gradient_is_numerical_error() {
        let mut w = Tensor::row(&[1.0]);
        let before = w.clone();
        let mut adam = AdamState::new(1e-3, [&w]);
        let err = adam.step(&mut [&mut w], &[Tensor::row(&[f64::NAN])]).unwrap_err();
        assert!(matches!(err, AutodiffError::Numerical(_)));
        assert_eq!(w, before);
        assert_eq!(adam.step, 0);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut w = Tensor::row(&[1.0, 2.0]);
        let mut adam = AdamState::new(1e-3, [&w]);
        assert!(matches!(adam.step(&mut [&mut w], &[Tensor::row(&[1.0])]), Err(AutodiffError::Shape(_))));
    }
}
