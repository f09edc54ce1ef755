//! Weighted impact function for compound extremes.
//!
//! For lagged ECDF values `v ∈ [0,1]^p`, weights `w` on the simplex and a
//! shape `alpha > 0`, with `c = 1 - exp(-alpha)`:
//!
//! ```text
//! h(v; w, alpha) = [1 - prod_i (1 - v_i c)^{w_i}] / c
//! ```
//!
//! Small `alpha` approaches the weighted sum `sum_i w_i v_i`; large `alpha`
//! approaches `1 - prod_i (1 - v_i)^{w_i}`. For every valid input the
//! value lies between `sum_i w_i v_i` and `max_i v_i`.

use serde::{Deserialize, Serialize};

use crate::error::{CtcError, Result};

/// Absolute tolerance on the unit sum of a weight vector.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-12;

/// Above this shape the direct product form underflows; the log-domain path is used.
pub const LOG_DOMAIN_ALPHA: f64 = 30.0;

const LOG_DOMAIN_MARGIN: f64 = 1e-12;

/// Shape parameter and simplex weights of the impact function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpactParams {
    alpha: f64,
    weights: Vec<f64>,
}

impl ImpactParams {
    /// Validates `alpha > 0` and that `weights` is a non-empty probability vector.
    ///
    /// Weights are checked, never renormalized. Use [`normalize`] first when
    /// starting from unnormalized importances.
    pub fn new(alpha: f64, weights: Vec<f64>) -> Result<Self> {
        if !alpha.is_finite() || alpha <= 0.0 {
            return Err(CtcError::domain(format!(
                "shape parameter must be finite and positive, got {alpha}"
            )));
        }
        if weights.is_empty() {
            return Err(CtcError::usage("weight vector must have at least one entry"));
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(CtcError::domain(format!(
                "weights must be finite and non-negative, got {w}"
            )));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(CtcError::domain(format!(
                "weights must sum to 1 within {WEIGHT_SUM_TOLERANCE:e}, got {total}"
            )));
        }
        Ok(ImpactParams { alpha, weights })
    }

    /// Equal weights `1/p` on every coordinate.
    pub fn uniform(p: usize, alpha: f64) -> Result<Self> {
        if p == 0 {
            return Err(CtcError::usage("weight vector must have at least one entry"));
        }
        ImpactParams::new(alpha, vec![1.0 / p as f64; p])
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// The constant `c = 1 - exp(-alpha)`.
    pub fn c(&self) -> f64 {
        -(-self.alpha).exp_m1()
    }

    /// Canonical evaluation.
    ///
    /// Uses the literal product form, switching to [`Self::evaluate_log_domain`]
    /// when `alpha > 30` or some factor `1 - v_i c` falls below `1e-12`.
    pub fn evaluate(&self, v: &[f64]) -> Result<f64> {
        self.check(v)?;
        Ok(self.eval_checked(v))
    }

    /// The literal closed form with no regime switching.
    pub fn evaluate_direct(&self, v: &[f64]) -> Result<f64> {
        self.check(v)?;
        if let Some(one) = self.saturated(v) {
            return Ok(one);
        }
        Ok(self.direct(v))
    }

    /// `(1 - exp(sum_i w_i log(1 - v_i c))) / c` via `ln_1p`/`exp_m1`.
    ///
    /// A coordinate with `v_i = 1` contributes `log(1 - c) = -alpha` exactly.
    pub fn evaluate_log_domain(&self, v: &[f64]) -> Result<f64> {
        self.check(v)?;
        if let Some(one) = self.saturated(v) {
            return Ok(one);
        }
        Ok(self.log_domain(v))
    }

    /// Evaluation for inputs already known to be valid (ECDF values of the right length).
    pub(crate) fn eval_checked(&self, v: &[f64]) -> f64 {
        debug_assert_eq!(v.len(), self.weights.len());
        if let Some(one) = self.saturated(v) {
            return one;
        }
        if self.alpha > LOG_DOMAIN_ALPHA {
            return self.log_domain(v);
        }
        let c = self.c();
        if v.iter().any(|&vi| 1.0 - vi * c < LOG_DOMAIN_MARGIN) {
            return self.log_domain(v);
        }
        self.direct(v)
    }

    fn check(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.weights.len() {
            return Err(CtcError::usage(format!(
                "impact input has {} coordinates but {} weights",
                v.len(),
                self.weights.len()
            )));
        }
        if let Some(bad) = v.iter().find(|vi| !vi.is_finite()) {
            return Err(CtcError::domain(format!("impact input is not finite: {bad}")));
        }
        if let Some(bad) = v.iter().find(|vi| !(0.0..=1.0).contains(*vi)) {
            return Err(CtcError::domain(format!("impact input outside [0,1]: {bad}")));
        }
        Ok(())
    }

    /// Returns `Some(1.0)` when all weight sits on coordinates equal to one.
    fn saturated(&self, v: &[f64]) -> Option<f64> {
        let all_on_ones = v
            .iter()
            .zip(&self.weights)
            .all(|(&vi, &wi)| vi == 1.0 || wi == 0.0);
        all_on_ones.then_some(1.0)
    }

    fn direct(&self, v: &[f64]) -> f64 {
        let c = self.c();
        let prod: f64 = v
            .iter()
            .zip(&self.weights)
            .map(|(&vi, &wi)| (1.0 - vi * c).powf(wi))
            .product();
        ((1.0 - prod) / c).clamp(0.0, 1.0)
    }

    fn log_domain(&self, v: &[f64]) -> f64 {
        let c = self.c();
        let log_sum: f64 = v
            .iter()
            .zip(&self.weights)
            .filter(|(_, &wi)| wi > 0.0)
            .map(|(&vi, &wi)| {
                let term = if vi == 1.0 { -self.alpha } else { (-vi * c).ln_1p() };
                wi * term
            })
            .sum();
        (-log_sum.exp_m1() / c).clamp(0.0, 1.0)
    }
}

/// Scales non-negative importances to unit sum.
pub fn normalize(raw: &[f64]) -> Result<Vec<f64>> {
    if raw.is_empty() {
        return Err(CtcError::usage("cannot normalize an empty weight vector"));
    }
    if let Some(w) = raw.iter().find(|w| !w.is_finite() || **w < 0.0) {
        return Err(CtcError::domain(format!(
            "weights must be finite and non-negative, got {w}"
        )));
    }
    let total: f64 = raw.iter().sum();
    if total <= 0.0 {
        return Err(CtcError::domain("weights sum to zero"));
    }
    Ok(raw.iter().map(|w| w / total).collect())
}

/// Free-function form of [`ImpactParams::evaluate`].
pub fn evaluate(params: &ImpactParams, v: &[f64]) -> Result<f64> {
    params.evaluate(v)
}

/// Free-function form of [`ImpactParams::evaluate_log_domain`].
pub fn evaluate_log_domain(params: &ImpactParams, v: &[f64]) -> Result<f64> {
    params.evaluate_log_domain(v)
}
