//! Adam optimizer over the model's parameter blocks.

use crate::energy::{EnergyModel, ParamGradients};

use super::TrainError;

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

/// First and second moment estimates plus the step counter.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: ParamGradients,
    v: ParamGradients,
    step: u64,
}

impl AdamState {
    pub fn new(model: &EnergyModel) -> Self {
        AdamState {
            m: ParamGradients::zeros_like(model),
            v: ParamGradients::zeros_like(model),
            step: 0,
        }
    }

    /// One bias-corrected update of every parameter in place.
    pub fn apply(
        &mut self,
        model: &mut EnergyModel,
        grads: &ParamGradients,
        lr: f64,
    ) -> Result<(), TrainError> {
        self.step += 1;
        let bc1 = 1.0 - BETA1.powi(self.step as i32);
        let bc2 = 1.0 - BETA2.powi(self.step as i32);
        let params = model.param_slices_mut();
        let gs = grads.slices();
        let ms = self.m.slices_mut();
        let vs = self.v.slices_mut();
        if params.len() != gs.len() {
            return Err(TrainError::ShapeMismatch);
        }
        for (((p_block, g_block), m_block), v_block) in
            params.into_iter().zip(gs).zip(ms).zip(vs)
        {
            if p_block.len() != g_block.len() {
                return Err(TrainError::ShapeMismatch);
            }
            for (((p, &g), m), v) in
                p_block.iter_mut().zip(g_block.iter()).zip(m_block.iter_mut()).zip(v_block.iter_mut())
            {
                *m = BETA1 * *m + (1.0 - BETA1) * g;
                *v = BETA2 * *v + (1.0 - BETA2) * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *p -= lr * m_hat / (v_hat.sqrt() + EPS);
            }
        }
        Ok(())
    }
}
