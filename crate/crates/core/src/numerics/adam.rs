use alloc::format;
use alloc::string::String;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Adam hyperparameters. Defaults: `beta1 = 0.9`, `beta2 = 0.999`,
/// `epsilon = 1e-8`, `learning_rate = 1e-4`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamHyper {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Optimizer state for one parameter block.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    /// Name of the parameter block, reported in numeric errors.
    pub label: String,
    pub first_moment: Tensor,
    pub second_moment: Tensor,
    pub step_count: u64,
    pub hyper: AdamHyper,
}

impl AdamState {
    pub fn new(label: impl Into<String>, shape: &[usize], hyper: AdamHyper) -> Self {
        Self {
            label: label.into(),
            first_moment: Tensor::zeros(shape),
            second_moment: Tensor::zeros(shape),
            step_count: 0,
            hyper,
        }
    }

    /// Applies one bias-corrected Adam update to `params` in place.
    pub fn update(&mut self, params: &mut Tensor, grads: &Tensor) -> Result<()> {
        params.ensure_same_shape(grads, "adam_step")?;
        params.ensure_same_shape(&self.first_moment, "adam_step moments")?;
        if let Some(i) = grads.data().iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFinite(format!(
                "gradient of parameter block '{}' at index {i}",
                self.label
            )));
        }
        let AdamHyper {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.hyper;
        self.step_count += 1;
        let t = self.step_count as f64;
        let bc1 = 1.0 - libm::pow(beta1, t);
        let bc2 = 1.0 - libm::pow(beta2, t);
        let m = self.first_moment.data_mut();
        let v = self.second_moment.data_mut();
        for (((p, &g), m), v) in params
            .data_mut()
            .iter_mut()
            .zip(grads.data())
            .zip(m.iter_mut())
            .zip(v.iter_mut())
        {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= learning_rate * m_hat / (libm::sqrt(v_hat) + epsilon);
        }
        Ok(())
    }
}

/// Functional form of [`AdamState::update`].
pub fn adam_step(
    params: &Tensor,
    grads: &Tensor,
    state: &AdamState,
) -> Result<(Tensor, AdamState)> {
    let mut p = params.clone();
    let mut s = state.clone();
    s.update(&mut p, grads)?;
    Ok((p, s))
}
