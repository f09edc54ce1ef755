//! Data-driven choice of the extremal delay.
//!
//! Two per-lag profiles are available: the cross-extremogram, i.e. the
//! empirical probability that `y[t+tau]` exceeds its high quantile given that
//! `x[t]` does, and an asymmetric partial cross-correlation that removes only
//! the linear influence of the effect's intermediate lags
//! `y[t+1..t+tau-1]`. The delay is the largest lag whose value reaches a
//! threshold.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{CtcError, Result};
use crate::linalg::{correlation, least_squares};
use crate::series::{kth_largest, Series};

/// Suggested selection threshold for the extremogram.
pub const EXTREMOGRAM_THRESHOLD: f64 = 0.1;
/// Suggested selection thresholds for the PCCF.
pub const PCCF_THRESHOLDS: [f64; 2] = [0.10, 0.15];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LagMethod {
    Extremogram,
    Pccf,
}

/// Per-lag statistics for `tau = 1..=max_lag`; `None` marks an undefined lag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagProfile {
    pub method: LagMethod,
    pub values: Vec<Option<f64>>,
    pub threshold: Option<f64>,
    pub selected_p: Option<usize>,
}

impl LagProfile {
    pub fn max_lag(&self) -> usize {
        self.values.len()
    }

    /// Value at lag `tau` (1-based).
    pub fn at(&self, tau: usize) -> Option<f64> {
        tau.checked_sub(1).and_then(|i| self.values.get(i).copied().flatten())
    }

    /// Records `threshold` and the lag it selects, if any.
    pub fn with_selection(mut self, threshold: f64) -> Self {
        self.selected_p = select_delay(&self, threshold).ok();
        self.threshold = Some(threshold);
        self
    }
}

fn check_lags(n: usize, max_lag: usize) -> Result<()> {
    if max_lag == 0 || max_lag >= n {
        return Err(CtcError::usage(format!(
            "max_lag must lie in 1..{n}, got {max_lag}"
        )));
    }
    Ok(())
}

/// Number of upper order statistics defining the empirical `q` quantile.
fn exceedance_rank(n: usize, q: f64) -> usize {
    let raw = (1.0 - q) * n as f64;
    // Guard against (1 - q) * n landing a hair above an integer.
    ((raw - 1e-9).ceil() as usize).clamp(1, n)
}

/// Cross-extremogram at lags `1..=max_lag`.
///
/// Quantiles are the `k`-th largest values with `k = ceil((1 - q) n)`, and
/// exceedance is strict. A lag with no conditioning exceedance is undefined.
pub fn cross_extremogram(x: &Series, y: &Series, max_lag: usize, q: f64) -> Result<LagProfile> {
    let n = x.len();
    if y.len() != n {
        return Err(CtcError::usage("series lengths differ"));
    }
    check_lags(n, max_lag)?;
    if !(q > 0.0 && q < 1.0) {
        return Err(CtcError::domain(format!("quantile level must lie in (0,1), got {q}")));
    }
    let k = exceedance_rank(n, q);
    let qx = kth_largest(x.values(), k)?;
    let qy = kth_largest(y.values(), k)?;
    let ex: Vec<bool> = x.values().iter().map(|&v| v > qx).collect();
    let ey: Vec<bool> = y.values().iter().map(|&v| v > qy).collect();

    let values = (1..=max_lag)
        .map(|tau| {
            let (mut cond, mut joint) = (0usize, 0usize);
            for t in 0..n - tau {
                if ex[t] {
                    cond += 1;
                    if ey[t + tau] {
                        joint += 1;
                    }
                }
            }
            (cond > 0).then(|| joint as f64 / cond as f64)
        })
        .collect();
    Ok(LagProfile {
        method: LagMethod::Extremogram,
        values,
        threshold: None,
        selected_p: None,
    })
}

/// Asymmetric partial cross-correlation at lags `1..=max_lag`.
///
/// `phi(tau)` correlates the residuals of `x[t]` and `y[t+tau]` after OLS on
/// an intercept and `y[t+1], ..., y[t+tau-1]`. At `tau = 1` this is the plain
/// lagged correlation.
pub fn pccf(x: &Series, y: &Series, max_lag: usize) -> Result<LagProfile> {
    let n = x.len();
    if y.len() != n {
        return Err(CtcError::usage("series lengths differ"));
    }
    check_lags(n, max_lag)?;
    if n - max_lag <= max_lag + 2 {
        return Err(CtcError::usage(format!(
            "series of length {n} is too short for a PCCF up to lag {max_lag}"
        )));
    }
    let (xs, ys) = (x.values(), y.values());
    let values = (1..=max_lag)
        .map(|tau| {
            let rows = n - tau;
            let design = DMatrix::from_fn(rows, tau, |t, j| if j == 0 { 1.0 } else { ys[t + j] });
            let cause = DVector::from_iterator(rows, xs[..rows].iter().copied());
            let effect = DVector::from_iterator(rows, (0..rows).map(|t| ys[t + tau]));
            let fit = least_squares(&design, &[cause, effect]);
            correlation(fit.residuals[0].as_slice(), fit.residuals[1].as_slice())
        })
        .collect();
    Ok(LagProfile {
        method: LagMethod::Pccf,
        values,
        threshold: None,
        selected_p: None,
    })
}

/// Largest lag whose defined value is at least `threshold`.
pub fn select_delay(profile: &LagProfile, threshold: f64) -> Result<usize> {
    if profile.values.iter().all(Option::is_none) {
        return Err(CtcError::usage("lag profile has no defined entries"));
    }
    profile
        .values
        .iter()
        .enumerate()
        .rev()
        .find(|(_, v)| v.is_some_and(|v| v >= threshold))
        .map(|(i, _)| i + 1)
        .ok_or(CtcError::NoDelay { threshold })
}
