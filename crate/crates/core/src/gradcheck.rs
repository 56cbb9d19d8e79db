//! Central finite-difference verification of analytic gradients.

use alloc::vec::Vec;

use crate::error::Result;
use crate::graph::{Graph, Var};
use crate::tensor::Tensor;

/// Relative discrepancy used for every gradient comparison.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / f64::max(1e-8, analytic.abs() + numeric.abs())
}

/// Maximum relative error between the backward-pass gradient of the scalar
/// function `f` at `x` and central differences with the given `step`.
pub fn grad_check<F>(f: F, x: &Tensor, step: f64) -> Result<f64>
where
    F: Fn(&mut Graph, Var) -> Result<Var>,
{
    let analytic = {
        let mut g = Graph::new();
        let xv = g.param(x.clone());
        let y = f(&mut g, xv)?;
        g.gradients(y, &[xv])?.remove(0)
    };
    let numeric = numeric_gradient(|t| eval_scalar(&f, t), x, step)?;
    Ok(analytic
        .data()
        .iter()
        .zip(numeric.data())
        .map(|(&a, &n)| relative_error(a, n))
        .fold(0.0, f64::max))
}

/// Like [`grad_check`], but each coordinate is compared at several step
/// sizes and its best agreement is kept.
///
/// Piecewise-linear activations make a finite difference wrong whenever the
/// probe interval straddles a kink; a coarse step suffers this more often,
/// a fine step suffers round-off on tiny coordinates. A wrong analytic
/// gradient disagrees at every step.
pub fn grad_check_multi<F>(f: F, x: &Tensor, steps: &[f64]) -> Result<f64>
where
    F: Fn(&mut Graph, Var) -> Result<Var>,
{
    let analytic = {
        let mut g = Graph::new();
        let xv = g.param(x.clone());
        let y = f(&mut g, xv)?;
        g.gradients(y, &[xv])?.remove(0)
    };
    let mut best = alloc::vec![f64::INFINITY; x.numel()];
    for &h in steps {
        let numeric = numeric_gradient(|t| eval_scalar(&f, t), x, h)?;
        for ((b, &a), &n) in best.iter_mut().zip(analytic.data()).zip(numeric.data()) {
            *b = b.min(relative_error(a, n));
        }
    }
    Ok(best.into_iter().fold(0.0, f64::max))
}

/// Value of the scalar function `f` at `x`, evaluated on a fresh graph.
pub fn eval_scalar<F>(f: &F, x: &Tensor) -> Result<f64>
where
    F: Fn(&mut Graph, Var) -> Result<Var>,
{
    let mut g = Graph::new();
    let xv = g.constant(x.clone());
    let y = f(&mut g, xv)?;
    Ok(g.item(y))
}

/// Central-difference gradient of an arbitrary scalar function.
pub fn numeric_gradient<F>(mut f: F, x: &Tensor, step: f64) -> Result<Tensor>
where
    F: FnMut(&Tensor) -> Result<f64>,
{
    let mut probe = x.clone();
    let mut out = Vec::with_capacity(x.numel());
    for i in 0..x.numel() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + step;
        let hi = f(&probe)?;
        probe.data_mut()[i] = orig - step;
        let lo = f(&probe)?;
        probe.data_mut()[i] = orig;
        out.push((hi - lo) / (2.0 * step));
    }
    Tensor::new(x.shape(), out)
}
