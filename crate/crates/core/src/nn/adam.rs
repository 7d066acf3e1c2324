use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::nn::{Real, Tensor};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamConfig {
    pub fn with_lr(learning_rate: f64) -> Self {
        AdamConfig {
            learning_rate,
            ..Default::default()
        }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 2.5e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Moment estimates for one parameter tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<T = f32> {
    pub step_count: u64,
    pub m: Vec<T>,
    pub v: Vec<T>,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl<T: Real> AdamState<T> {
    pub fn new(len: usize, cfg: AdamConfig) -> Self {
        AdamState {
            step_count: 0,
            m: vec![T::zero(); len],
            v: vec![T::zero(); len],
            learning_rate: cfg.learning_rate,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            epsilon: cfg.epsilon,
        }
    }
}

/// One bias-corrected Adam update.
///
/// A gradient that is zero everywhere leaves parameters and moments
/// untouched and only advances `step_count`, so frozen or unused tensors
/// never drift.
pub fn adam_step<T: Real>(params: &mut [T], grads: &[T], state: &mut AdamState<T>, name: &str) -> Result<()> {
    if params.len() != grads.len() || state.m.len() != params.len() || state.v.len() != params.len() {
        return Err(Error::dim("adam_step", params.len(), grads.len()));
    }
    if grads.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite {
            param: format!("{name} (gradient)"),
            step: state.step_count,
        });
    }
    state.step_count += 1;
    if grads.iter().all(|g| g.is_zero()) {
        return Ok(());
    }
    let t = state.step_count as i32;
    let (b1, b2) = (state.beta1, state.beta2);
    let bc1 = 1.0 - b1.powi(t);
    let bc2 = 1.0 - b2.powi(t);
    // Fold both bias corrections into the step size and epsilon.
    let step = T::of(state.learning_rate * bc2.sqrt() / bc1);
    let eps = T::of(state.epsilon * bc2.sqrt());
    let (b1t, b2t) = (T::of(b1), T::of(b2));
    let (c1, c2) = (T::one() - b1t, T::one() - b2t);
    for i in 0..params.len() {
        let g = grads[i];
        let m = b1t * state.m[i] + c1 * g;
        let v = b2t * state.v[i] + c2 * g * g;
        state.m[i] = m;
        state.v[i] = v;
        params[i] -= step * m / (v.sqrt() + eps);
    }
    if params.iter().any(|p| !p.is_finite()) {
        return Err(Error::NonFinite {
            param: name.to_string(),
            step: state.step_count,
        });
    }
    Ok(())
}

/// Adam over named tensors; moment state is keyed by parameter name.
#[derive(Clone, Debug)]
pub struct Adam<T = f32> {
    cfg: AdamConfig,
    states: HashMap<String, AdamState<T>>,
}

impl<T: Real> Adam<T> {
    pub fn new(cfg: AdamConfig) -> Self {
        Adam {
            cfg,
            states: HashMap::new(),
        }
    }

    pub fn config(&self) -> AdamConfig {
        self.cfg
    }

    /// Applies one step to every tensor using its grad slot, then zeroes the slot.
    pub fn step<'a>(&mut self, params: impl IntoIterator<Item = (String, &'a mut Tensor<T>)>) -> Result<()> {
        for (name, t) in params {
            let cfg = self.cfg;
            let state = self
                .states
                .entry(name.clone())
                .or_insert_with(|| AdamState::new(t.len(), cfg));
            let (data, grad) = t.data_and_grad_mut();
            adam_step(data, grad, state, &name)?;
            grad.iter_mut().for_each(|g| *g = T::zero());
        }
        Ok(())
    }
}
