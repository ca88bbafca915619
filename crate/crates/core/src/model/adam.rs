use super::params::ModelParams;
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Adam with bias correction; weight decay is an L2 term added to the
/// gradient before the moment updates.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub weight_decay: f64,
    pub t: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl OptimizerState {
    pub fn new(params: &ModelParams) -> Self {
        let moments: Vec<Tensor> = params
            .named_tensors()
            .into_iter()
            .map(|(_, t)| Tensor::zeros(t.shape()))
            .collect();
        OptimizerState {
            alpha: 0.005,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            weight_decay: 0.001,
            t: 0,
            m: moments.clone(),
            v: moments,
        }
    }
}

pub fn adam_update(params: &mut ModelParams, grads: &ModelParams, state: &mut OptimizerState) -> Result<()> {
    let grad_tensors = grads.named_tensors();
    if grad_tensors.len() != state.m.len() {
        return Err(Error::Shape("gradient set does not match optimizer state".into()));
    }
    for ((name, g), m) in grad_tensors.iter().zip(&state.m) {
        if g.shape() != m.shape() {
            return Err(Error::Shape(format!("gradient `{name}` has shape {:?}, expected {:?}", g.shape(), m.shape())));
        }
        if !g.is_finite() {
            return Err(Error::NonFiniteGradient(name.clone()));
        }
    }

    state.t += 1;
    let t = state.t as i32;
    let c1 = 1.0 - state.beta1.powi(t);
    let c2 = 1.0 - state.beta2.powi(t);
    let (b1, b2, eps, wd, lr) = (state.beta1, state.beta2, state.epsilon, state.weight_decay, state.alpha);
    let mut k = 0;
    params.for_each_mut(|_, p| {
        let g = grad_tensors[k].1.values();
        let m = state.m[k].values_mut();
        let v = state.v[k].values_mut();
        for (i, theta) in p.values_mut().iter_mut().enumerate() {
            let gi = g[i] + wd * *theta;
            m[i] = b1 * m[i] + (1.0 - b1) * gi;
            v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            *theta -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        k += 1;
    });
    Ok(())
}
