//! Spectral normalization by power iteration.
//!
//! A weight of shape `[out, ...]` is viewed as an `out × in` matrix. The
//! persistent vectors `u` (length `out`) and `v` (length `in`) track its top
//! singular pair; the normalized weight is `W / σ` with `σ = uᵀ W v`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::Result;
use crate::graph::{Graph, Var};
use crate::rng::{self, Rng64};
use crate::tensor::Tensor;

/// Below this estimate the weight is treated as zero and left unscaled.
pub const SIGMA_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct PowerIteration {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

fn dims(w: &Tensor) -> (usize, usize) {
    let out = w.shape().first().copied().unwrap_or(1);
    (out, w.numel() / out)
}

fn normalize(x: &mut [f64]) {
    let n = libm::sqrt(x.iter().map(|a| a * a).sum());
    if n > 0.0 {
        x.iter_mut().for_each(|a| *a /= n);
    }
}

fn mat_t_vec(w: &[f64], out: usize, inp: usize, u: &[f64]) -> Vec<f64> {
    let mut v = vec![0.0; inp];
    for (row, &ui) in w.chunks(inp).zip(u).take(out) {
        v.iter_mut().zip(row).for_each(|(a, &b)| *a += ui * b);
    }
    v
}

fn mat_vec(w: &[f64], inp: usize, v: &[f64]) -> Vec<f64> {
    w.chunks(inp)
        .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
        .collect()
}

impl PowerIteration {
    /// Random unit `u`; `v` follows from one half-step.
    pub fn new(w: &Tensor, rng: &mut Rng64) -> Self {
        let (out, _) = dims(w);
        let mut u: Vec<f64> = (0..out).map(|_| rng::normal(rng)).collect();
        normalize(&mut u);
        let mut p = PowerIteration { u, v: Vec::new() };
        p.refresh_v(w);
        p
    }

    fn refresh_v(&mut self, w: &Tensor) {
        let (out, inp) = dims(w);
        self.v = mat_t_vec(w.data(), out, inp, &self.u);
        normalize(&mut self.v);
    }

    /// One step: `v ← Wᵀu/‖·‖`, `u ← Wv/‖·‖`.
    pub fn step(&mut self, w: &Tensor) {
        let (_, inp) = dims(w);
        self.refresh_v(w);
        let mut u = mat_vec(w.data(), inp, &self.v);
        normalize(&mut u);
        if u.iter().any(|&x| x != 0.0) {
            self.u = u;
        }
    }

    /// Current estimate `uᵀ W v` of the top singular value.
    pub fn sigma(&self, w: &Tensor) -> f64 {
        let (_, inp) = dims(w);
        mat_vec(w.data(), inp, &self.v)
            .iter()
            .zip(&self.u)
            .map(|(a, b)| a * b)
            .sum()
    }

    /// `W / σ` on the graph, differentiable through `σ` with `u, v` fixed.
    pub fn apply(&self, g: &mut Graph, w: Var) -> Result<Var> {
        if libm::fabs(self.sigma(g.value(w))) < SIGMA_FLOOR {
            return Ok(w);
        }
        let (out, inp) = dims(g.value(w));
        let w2 = g.reshape(w, &[out, inp])?;
        let v = g.constant(Tensor::from_parts(vec![inp, 1], self.v.clone()));
        let u = g.constant(Tensor::from_parts(vec![out, 1], self.u.clone()));
        let wv = g.matmul(w2, v)?;
        let uwv = g.mul(wv, u)?;
        let sigma = g.sum(uwv);
        g.div(w, sigma)
    }
}

/// One power-iteration step on `u`, then `W / σ`. A zero matrix is
/// returned unchanged.
pub fn spectral_normalize(w: &Tensor, u: &mut Vec<f64>) -> Tensor {
    let mut p = PowerIteration {
        u: core::mem::take(u),
        v: Vec::new(),
    };
    p.step(w);
    let sigma = p.sigma(w);
    *u = p.u;
    if libm::fabs(sigma) < SIGMA_FLOOR {
        w.clone()
    } else {
        w.map(|x| x / sigma)
    }
}
