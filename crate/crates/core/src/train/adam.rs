use ndarray::{Array2, Array3, Dimension, Zip};
use serde::{Deserialize, Serialize};

use super::GradientSet;
use crate::error::{Error, Result};
use crate::network::Network;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 5e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Moment accumulators for every weight and bias of one network.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    step: u64,
    m_w: Vec<Array3<f64>>,
    v_w: Vec<Array3<f64>>,
    m_b: Vec<Array2<f64>>,
    v_b: Vec<Array2<f64>>,
}

impl AdamState {
    pub fn new(net: &Network, config: AdamConfig) -> Self {
        let w = || net.layers.iter().map(|l| Array3::zeros(l.weights.raw_dim())).collect();
        let b = || net.layers.iter().map(|l| Array2::zeros(l.biases.raw_dim())).collect();
        Self {
            config,
            step: 0,
            m_w: w(),
            v_w: w(),
            m_b: b(),
            v_b: b(),
        }
    }

    pub fn step(&self) -> u64 {
        self.step
    }
}

/// One bias-corrected Adam update of every parameter.
///
/// Gradients are validated before anything is touched, so a rejected step
/// leaves both the network and the state unchanged.
pub fn adam_step(net: &mut Network, grads: &GradientSet, state: &mut AdamState) -> Result<()> {
    if grads.d_weights.len() != net.layers.len() || state.m_w.len() != net.layers.len() {
        return Err(Error::InvalidArgument(
            "gradient/optimizer state does not match the network's layer count".into(),
        ));
    }
    for (l, layer) in net.layers.iter().enumerate() {
        if grads.d_weights[l].dim() != layer.weights.dim() || state.m_w[l].dim() != layer.weights.dim() {
            return Err(Error::shape("weight gradient", layer.weights.shape(), grads.d_weights[l].shape()));
        }
        if grads.d_biases[l].dim() != layer.biases.dim() || state.m_b[l].dim() != layer.biases.dim() {
            return Err(Error::shape("bias gradient", layer.biases.shape(), grads.d_biases[l].shape()));
        }
        if grads.d_weights[l].iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFiniteGradient { layer: l + 1, kind: "weight" });
        }
        if grads.d_biases[l].iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFiniteGradient { layer: l + 1, kind: "bias" });
        }
    }

    state.step += 1;
    let cfg = state.config;
    let t = state.step as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    for (l, layer) in net.layers.iter_mut().enumerate() {
        update(&mut layer.weights, &grads.d_weights[l], &mut state.m_w[l], &mut state.v_w[l], &cfg, c1, c2);
        update(&mut layer.biases, &grads.d_biases[l], &mut state.m_b[l], &mut state.v_b[l], &cfg, c1, c2);
    }
    Ok(())
}

fn update<D: Dimension>(
    param: &mut ndarray::Array<f64, D>,
    grad: &ndarray::Array<f64, D>,
    m: &mut ndarray::Array<f64, D>,
    v: &mut ndarray::Array<f64, D>,
    cfg: &AdamConfig,
    c1: f64,
    c2: f64,
) {
    Zip::from(param).and(grad).and(m).and(v).for_each(|p, &g, m, v| {
        *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
        *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
    });
}
