//! Adam optimizer with bias-corrected moment estimates.

use ndarray::Array2;

use super::ParamSet;

/// Adam state for one parameter set. Moment buffers are indexed in the
/// same order as the parameters they update.
pub struct Adam {
    step_count: u64,
    first_moment: Vec<Array2<f64>>,
    second_moment: Vec<Array2<f64>>,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
}

impl Adam {
    /// Fresh optimizer matching `params` in shape, with the conventional
    /// defaults β₁ = 0.9, β₂ = 0.999, ε = 1e-8.
    pub fn new(params: &ParamSet) -> Adam {
        let zeros: Vec<Array2<f64>> = params
            .entries()
            .map(|(_, value)| Array2::zeros(value.dim()))
            .collect();
        Adam {
            step_count: 0,
            first_moment: zeros.clone(),
            second_moment: zeros,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    /// Applies one update with learning rate `lr`. `grads` must align with
    /// `params` one-to-one in order and shape.
    pub fn step(&mut self, params: &mut ParamSet, grads: &[Array2<f64>], lr: f64) {
        assert_eq!(params.len(), grads.len(), "gradient count mismatch");
        self.step_count += 1;
        let t = self.step_count as i32;
        let bias1 = 1.0 - self.beta1.powi(t);
        let bias2 = 1.0 - self.beta2.powi(t);

        for (i, grad) in grads.iter().enumerate() {
            let m = &mut self.first_moment[i];
            let v = &mut self.second_moment[i];
            assert_eq!(m.dim(), grad.dim(), "gradient shape mismatch at {i}");
            m.zip_mut_with(grad, |m, &g| *m = self.beta1 * *m + (1.0 - self.beta1) * g);
            v.zip_mut_with(grad, |v, &g| {
                *v = self.beta2 * *v + (1.0 - self.beta2) * g * g
            });

            let value = params.value_mut(i);
            for ((p, &m), &v) in value.iter_mut().zip(m.iter()).zip(v.iter()) {
                let m_hat = m / bias1;
                let v_hat = v / bias2;
                *p -= lr * m_hat / (v_hat.sqrt() + self.epsilon);
            }
        }
    }
}
