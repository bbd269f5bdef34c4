use genboot_tensor::Tensor;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::NetworkParams;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.5,
            beta2: 0.9,
            eps: 1e-8,
        }
    }
}

/// First/second moment accumulators for one network.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
    pub t: u64,
}

impl AdamState {
    pub fn new(params: &NetworkParams, config: AdamConfig) -> Self {
        let zeros = || {
            params
                .blocks()
                .iter()
                .map(|b| Tensor::zeros(b.value.shape()))
                .collect::<Vec<_>>()
        };
        AdamState {
            config,
            m: zeros(),
            v: zeros(),
            t: 0,
        }
    }
}

/// One bias-corrected Adam update of `params` in place.
///
/// All gradients are checked before anything is modified, so a rejected
/// step leaves both the parameters and the state untouched.
pub fn adam_step(params: &mut NetworkParams, grads: &[Tensor], state: &mut AdamState, lr: f64) -> Result<()> {
    if grads.len() != params.blocks().len() || state.m.len() != grads.len() {
        return Err(Error::Config(format!(
            "adam: {} parameter blocks, {} gradients, {} moment blocks",
            params.blocks().len(),
            grads.len(),
            state.m.len()
        )));
    }
    for (block, g) in params.blocks().iter().zip(grads) {
        if block.value.shape() != g.shape() {
            return Err(Error::Config(format!(
                "adam: gradient for `{}` has shape {:?}, expected {:?}",
                block.name,
                g.shape(),
                block.value.shape()
            )));
        }
        if !g.is_finite() {
            return Err(Error::NonFiniteGradient {
                block: block.name.clone(),
            });
        }
    }

    state.t += 1;
    let AdamConfig { beta1, beta2, eps } = state.config;
    let t = state.t as i32;
    let bc1 = 1.0 - beta1.powi(t);
    let bc2 = 1.0 - beta2.powi(t);
    for (((block, g), m), v) in params
        .blocks_mut()
        .iter_mut()
        .zip(grads)
        .zip(&mut state.m)
        .zip(&mut state.v)
    {
        let theta = block.value.data_mut();
        let (m, v) = (m.data_mut(), v.data_mut());
        for (i, &gi) in g.data().iter().enumerate() {
            m[i] = beta1 * m[i] + (1.0 - beta1) * gi;
            v[i] = beta2 * v[i] + (1.0 - beta2) * gi * gi;
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            theta[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}
