//! Empirical survival function of episode returns and its area.

use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Survival function sampled at every distinct return and at zero.
#[derive(Clone, Debug, PartialEq)]
pub struct CcdfReport {
    /// Sorted, distinct.
    pub thresholds: Vec<f64>,
    /// Fraction of returns `≥` the matching threshold.
    pub survival: Vec<f64>,
    /// `∫₀^max S(t) dt`, integrating the step function exactly.
    pub area: f64,
    returns: Vec<f64>,
}

impl CcdfReport {
    /// Fraction of returns at or above `t`.
    pub fn survival_at(&self, t: f64) -> f64 {
        let n = self.returns.len();
        let below = self.returns.partition_point(|&r| r < t);
        (n - below) as f64 / n as f64
    }

    pub fn returns(&self) -> &[f64] {
        &self.returns
    }
}

pub fn ccdf(returns: &[f64]) -> Result<CcdfReport> {
    if returns.is_empty() {
        return Err(Error::invalid("ccdf", "no returns"));
    }
    if returns.iter().any(|r| !r.is_finite()) {
        return Err(Error::NonFinite("episode return".into()));
    }
    let mut sorted = returns.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut thresholds: Vec<f64> = sorted.iter().copied().chain(core::iter::once(0.0)).collect();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();
    let mut report = CcdfReport {
        thresholds,
        survival: Vec::new(),
        area: 0.0,
        returns: sorted,
    };
    report.survival = report.thresholds.iter().map(|&t| report.survival_at(t)).collect();
    // On (tᵢ, tᵢ₊₁] the survival equals its value at the right end.
    let mut area = 0.0;
    for w in report.thresholds.windows(2) {
        if w[0] >= 0.0 {
            area += (w[1] - w[0]) * report.survival_at(w[1]);
        }
    }
    report.area = area;
    Ok(report)
}

pub fn area_under_ccdf(report: &CcdfReport) -> f64 {
    report.area
}
