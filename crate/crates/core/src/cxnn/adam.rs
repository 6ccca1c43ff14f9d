//! Adam over the real-pair view of complex parameters: real and imaginary
//! parts carry independent moment estimates.

use super::param::{Parameter, Role};
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    // moments packed as (re, im) pairs
    first: Vec<Vec<C64>>,
    second: Vec<Vec<C64>>,
}

impl AdamState {
    pub fn new(config: AdamConfig, params: &[Parameter]) -> Self {
        let zeros = |p: &Parameter| vec![C64::new(0.0, 0.0); p.count()];
        Self {
            config,
            step: 0,
            first: params.iter().map(zeros).collect(),
            second: params.iter().map(zeros).collect(),
        }
    }
}

/// One Adam update from each parameter's `gradient`. Parameters whose role
/// equals `frozen` are left untouched, moments included.
pub fn adam_step(params: &mut [Parameter], state: &mut AdamState, frozen: Option<Role>) {
    assert_eq!(params.len(), state.first.len(), "optimizer state built for other parameters");
    state.step += 1;
    let AdamConfig { lr, beta1, beta2, eps } = state.config;
    let bc1 = 1.0 - beta1.powf(state.step as f64);
    let bc2 = 1.0 - beta2.powf(state.step as f64);
    for ((p, m), v) in params.iter_mut().zip(&mut state.first).zip(&mut state.second) {
        if Some(p.role) == frozen {
            continue;
        }
        let grads = p.gradient.data().to_vec();
        for (((w, g), m), v) in p.values.data_mut().iter_mut().zip(grads).zip(m.iter_mut()).zip(v.iter_mut()) {
            m.re = beta1 * m.re + (1.0 - beta1) * g.re;
            m.im = beta1 * m.im + (1.0 - beta1) * g.im;
            v.re = beta2 * v.re + (1.0 - beta2) * g.re * g.re;
            v.im = beta2 * v.im + (1.0 - beta2) * g.im * g.im;
            w.re -= lr * (m.re / bc1) / ((v.re / bc2).sqrt() + eps);
            w.im -= lr * (m.im / bc1) / ((v.im / bc2).sqrt() + eps);
        }
    }
}
