use crate::error::{Error, Result};
use crate::numerics::{Matrix, ParamSet};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// First and second moment estimates for a [`ParamSet`].
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    first: Vec<Matrix>,
    second: Vec<Matrix>,
    step: u64,
}

impl AdamState {
    pub fn new(params: &ParamSet) -> Self {
        let zeros: Vec<Matrix> = params
            .tensors()
            .map(|m| Matrix::zeros(m.rows(), m.cols()))
            .collect();
        Self {
            first: zeros.clone(),
            second: zeros,
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One bias-corrected Adam update, applied in place.
pub fn adam_step(
    params: &mut ParamSet,
    grads: &ParamSet,
    state: &mut AdamState,
    lr: f64,
) -> Result<()> {
    if lr.is_nan() || lr <= 0.0 {
        return Err(Error::invalid(format!("learning rate must be > 0, got {lr}")));
    }
    params.check_same_layout(grads)?;
    if state.first.len() != params.len()
        || state
            .first
            .iter()
            .zip(params.tensors())
            .any(|(m, p)| m.shape() != p.shape())
    {
        return Err(Error::invalid("optimizer state does not match parameters"));
    }

    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - ADAM_BETA1.powi(t);
    let c2 = 1.0 - ADAM_BETA2.powi(t);

    for (((_, p), g), (m, v)) in params
        .iter_mut()
        .zip(grads.tensors())
        .zip(state.first.iter_mut().zip(state.second.iter_mut()))
    {
        let p = p.as_mut_slice();
        for (((x, &g), m), v) in p
            .iter_mut()
            .zip(g.as_slice())
            .zip(m.as_mut_slice())
            .zip(v.as_mut_slice())
        {
            *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
            *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *x -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
        }
    }
    Ok(())
}
