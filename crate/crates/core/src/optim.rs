//! Adaptive-moment optimizer with optional global gradient-norm clipping.

use alloc::vec::Vec;

use crate::error::Result;
use crate::nn::{GradSet, ParamSet};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Rescale the whole gradient set to at most this norm before the step.
    pub max_grad_norm: Option<f64>,
}

impl AdamConfig {
    pub fn new(lr: f64) -> Self {
        AdamConfig {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            max_grad_norm: None,
        }
    }

    pub fn with_clip(mut self, max_norm: f64) -> Self {
        self.max_grad_norm = Some(max_norm);
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    steps: u64,
}

impl Adam {
    pub fn new(config: AdamConfig, params: &ParamSet) -> Self {
        let zeros = || params.values().iter().map(|t| Tensor::zeros(t.shape())).collect();
        Adam {
            config,
            m: zeros(),
            v: zeros(),
            steps: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Apply one update. Returns the gradient norm before clipping.
    pub fn step(&mut self, params: &mut ParamSet, grads: &GradSet) -> Result<f64> {
        grads.check_matches(params)?;
        let norm = grads.global_norm();
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
            max_grad_norm,
        } = self.config;
        let clip = match max_grad_norm {
            Some(c) if norm > c => c / norm,
            _ => 1.0,
        };
        self.steps += 1;
        if lr == 0.0 {
            return Ok(norm);
        }
        let t = self.steps as i32;
        let c1 = 1.0 - libm::pow(beta1, t as f64);
        let c2 = 1.0 - libm::pow(beta2, t as f64);
        let ids: Vec<_> = params.ids().collect();
        for (i, id) in ids.into_iter().enumerate() {
            let g = grads.grads()[i].data();
            let (m, v) = (self.m[i].data_mut(), self.v[i].data_mut());
            let p = params.get_mut(id).data_mut();
            for j in 0..p.len() {
                let gj = g[j] * clip;
                m[j] = beta1 * m[j] + (1.0 - beta1) * gj;
                v[j] = beta2 * v[j] + (1.0 - beta2) * gj * gj;
                let mh = m[j] / c1;
                let vh = v[j] / c2;
                p[j] -= lr * mh / (libm::sqrt(vh) + eps);
            }
        }
        Ok(norm)
    }
}
