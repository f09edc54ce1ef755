//! Comparator causal-discovery methods.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use crate::ctc::{check_shape, gpd_value_from_cdf, max_ctc, ExtremeCount, HybridCdf};
use crate::error::{CtcError, Result};
use crate::linalg::least_squares;
use crate::rng;
use crate::series::Series;

/// Threshold on the max-based coefficient used by the hard-threshold rule.
pub const HARD_THRESHOLD: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestDecision {
    pub statistic: f64,
    pub p_value: f64,
    pub reject: bool,
}

fn rss(design: &DMatrix<f64>, target: &DVector<f64>) -> f64 {
    let fit = least_squares(design, std::slice::from_ref(target));
    fit.residuals[0].norm_squared()
}

/// Granger F-test of `x` causing `y` with `p` lags.
///
/// Compares `y[t] ~ 1 + y[t-1..t-p]` against the model that adds
/// `x[t-1..t-p]`.
pub fn granger_test(x: &Series, y: &Series, p: usize, level: f64) -> Result<TestDecision> {
    let n = x.len();
    if y.len() != n {
        return Err(CtcError::usage("series lengths differ"));
    }
    if p == 0 {
        return Err(CtcError::usage("lag order must be positive"));
    }
    // Residual degrees of freedom of the larger model must be positive.
    if n <= 3 * p + 1 {
        return Err(CtcError::usage(format!(
            "series of length {n} is too short for a Granger test with {p} lags"
        )));
    }
    let (xs, ys) = (x.values(), y.values());
    let rows = n - p;
    let target = DVector::from_iterator(rows, ys[p..].iter().copied());
    let restricted = DMatrix::from_fn(rows, 1 + p, |r, j| {
        if j == 0 {
            1.0
        } else {
            ys[r + p - j]
        }
    });
    let full = DMatrix::from_fn(rows, 1 + 2 * p, |r, j| match j {
        0 => 1.0,
        j if j <= p => ys[r + p - j],
        j => xs[r + p - (j - p)],
    });
    let rss_r = rss(&restricted, &target);
    let rss_u = rss(&full, &target);
    let df1 = p as f64;
    let df2 = (rows - 1 - 2 * p) as f64;
    let (statistic, p_value) = if rss_u <= 1e-300 || rss_u <= 1e-14 * rss_r {
        (f64::INFINITY, 0.0)
    } else {
        let f = ((rss_r - rss_u).max(0.0) / df1) / (rss_u / df2);
        let dist = FisherSnedecor::new(df1, df2)
            .map_err(|e| CtcError::domain(format!("F distribution: {e}")))?;
        (f, (1.0 - dist.cdf(f)).clamp(0.0, 1.0))
    };
    Ok(TestDecision {
        statistic,
        p_value,
        reject: p_value < level,
    })
}

/// Declares `x -> y` when the max-based coefficient strictly exceeds 0.9.
pub fn hard_threshold_decision(
    x: &Series,
    y: &Series,
    p: usize,
    k: impl Into<ExtremeCount>,
) -> Result<bool> {
    Ok(max_ctc(x, y, p, k)?.value > HARD_THRESHOLD)
}

/// Permutation test on the asymmetry of GPD-based coefficients.
///
/// The statistic is `D = G(x -> y) - G(y -> x)`. Permuting `y` leaves its
/// fitted marginal unchanged, so the hybrid CDF values are computed once and
/// permuted directly.
pub fn gpd_permutation_test(
    x: &Series,
    y: &Series,
    p: usize,
    k: impl Into<ExtremeCount>,
    b: usize,
    seed: u64,
    level: f64,
) -> Result<TestDecision> {
    let n = x.len();
    let k = k.into().resolve(n)?;
    check_shape(n, &[y.len()], p)?;
    if b == 0 {
        return Err(CtcError::usage("permutation count must be positive"));
    }
    let hx = HybridCdf::fit(x.values(), k)?;
    let hy = HybridCdf::fit(y.values(), k)?;
    let cdf_x: Vec<f64> = x.values().iter().map(|&v| hx.eval(v)).collect();
    let mut cdf_y: Vec<f64> = y.values().iter().map(|&v| hy.eval(v)).collect();
    let asymmetry = |cx: &[f64], cy: &[f64]| -> Result<f64> {
        Ok(gpd_value_from_cdf(cx, cy, p, k)?.0 - gpd_value_from_cdf(cy, cx, p, k)?.0)
    };
    let observed = asymmetry(&cdf_x, &cdf_y)?;
    let mut rng = rng::stream(seed, 0);
    let mut exceed = 0usize;
    for _ in 0..b {
        cdf_y.shuffle(&mut rng);
        if asymmetry(&cdf_x, &cdf_y)? >= observed {
            exceed += 1;
        }
    }
    let p_value = exceed as f64 / b as f64;
    Ok(TestDecision {
        statistic: observed,
        p_value,
        reject: p_value < level,
    })
}
