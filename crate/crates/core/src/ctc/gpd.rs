//! Parametric comparator: generalized Pareto upper tails spliced onto the ECDF.

use serde::{Deserialize, Serialize};

use super::{check_shape, CtcEstimate, ExtremeCount, Variant};
use crate::error::{CtcError, Result};
use crate::optim::NelderMead;
use crate::series::{EcdfTable, Series};

const MIN_EXCEEDANCES: usize = 10;
const SHAPE_EPS: f64 = 1e-9;

/// Maximum-likelihood GPD fit to the exceedances over a threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpdFit {
    pub threshold: f64,
    pub scale: f64,
    pub shape: f64,
    pub exceedances: usize,
    pub log_likelihood: f64,
}

impl GpdFit {
    /// GPD distribution function of an excess `t >= 0`.
    pub fn excess_cdf(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let z = t / self.scale;
        if self.shape.abs() < SHAPE_EPS {
            return -(-z).exp_m1();
        }
        let arg = self.shape * z;
        if arg <= -1.0 {
            return 1.0;
        }
        (-(-arg.ln_1p() / self.shape).exp_m1()).clamp(0.0, 1.0)
    }
}

fn neg_log_likelihood(excesses: &[f64], scale: f64, shape: f64) -> f64 {
    let m = excesses.len() as f64;
    if !(scale > 0.0) || !scale.is_finite() || shape <= -1.0 {
        return f64::INFINITY;
    }
    if shape.abs() < SHAPE_EPS {
        return m * scale.ln() + excesses.iter().sum::<f64>() / scale;
    }
    let mut acc = 0.0;
    for &y in excesses {
        let arg = shape * y / scale;
        if arg <= -1.0 {
            return f64::INFINITY;
        }
        acc += arg.ln_1p();
    }
    m * scale.ln() + (1.0 + 1.0 / shape) * acc
}

fn moment_start(excesses: &[f64]) -> (f64, f64) {
    let m = excesses.len() as f64;
    let mean = excesses.iter().sum::<f64>() / m;
    let var = excesses.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (m - 1.0);
    let shape = (0.5 * (1.0 - mean * mean / var)).clamp(-0.45, 0.9);
    (mean * (1.0 - shape), shape)
}

fn pwm_start(excesses: &[f64]) -> (f64, f64) {
    let mut sorted = excesses.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len() as f64;
    let a0 = sorted.iter().sum::<f64>() / m;
    let a1 = sorted
        .iter()
        .enumerate()
        .map(|(j, y)| (1.0 - (j as f64 + 1.0 - 0.35) / m) * y)
        .sum::<f64>()
        / m;
    let denom = a0 - 2.0 * a1;
    if denom <= 0.0 {
        return (a0, 0.0);
    }
    let shape = (2.0 - a0 / denom).clamp(-0.45, 0.9);
    (2.0 * a0 * a1 / denom, shape)
}

/// Fits a GPD to the exceedances above `u = kth_largest(values, k)`.
///
/// Minimizes the negative log-likelihood with Nelder–Mead over
/// `(log scale, shape)`, trying moment, exponential and probability-weighted
/// moment starting points in turn. Shapes `<= -1` and infeasible supports
/// score as `+inf`. The accepted optimum is never worse than the exponential
/// sub-model.
pub fn gpd_fit(values: &[f64], k: usize) -> Result<GpdFit> {
    let threshold = crate::series::kth_largest(values, k)?;
    let excesses: Vec<f64> = values
        .iter()
        .filter(|&&v| v > threshold)
        .map(|&v| v - threshold)
        .collect();
    let m = excesses.len();
    let fail = |reason: &str, attempts: usize| CtcError::Fit {
        reason: reason.to_string(),
        exceedances: m,
        attempts,
    };
    if m < MIN_EXCEEDANCES {
        return Err(fail(
            &format!("need at least {MIN_EXCEEDANCES} exceedances above the threshold {threshold}"),
            0,
        ));
    }
    let mean = excesses.iter().sum::<f64>() / m as f64;
    let spread = excesses.iter().fold(0.0f64, |a, &y| a.max((y - mean).abs()));
    if spread <= f64::EPSILON * mean.abs().max(1.0) {
        return Err(fail("exceedances are constant", 0));
    }

    let exp_nll = neg_log_likelihood(&excesses, mean, 0.0);
    let objective = |v: &[f64]| neg_log_likelihood(&excesses, mean * v[0].exp(), v[1]);
    let optimizer = NelderMead::default();
    let starts = [moment_start(&excesses), (mean, 0.0), pwm_start(&excesses)];

    let mut best: Option<(f64, f64, f64)> = None;
    for &(scale0, shape0) in &starts {
        if !(scale0 > 0.0) || !scale0.is_finite() {
            continue;
        }
        let start = [(scale0 / mean).ln(), shape0];
        if !objective(&start).is_finite() {
            continue;
        }
        let r = optimizer.minimize(objective, &start, &[0.2, 0.1]);
        if !r.value.is_finite() {
            continue;
        }
        let candidate = (mean * r.point[0].exp(), r.point[1], r.value);
        if best.is_none_or(|b| candidate.2 < b.2) {
            best = Some(candidate);
        }
        if r.converged && r.value <= exp_nll + 1e-9 * exp_nll.abs().max(1.0) {
            return Ok(GpdFit {
                threshold,
                scale: candidate.0,
                shape: candidate.1,
                exceedances: m,
                log_likelihood: -candidate.2,
            });
        }
    }
    match best {
        Some((scale, shape, nll)) if nll <= exp_nll => Ok(GpdFit {
            threshold,
            scale,
            shape,
            exceedances: m,
            log_likelihood: -nll,
        }),
        _ => Err(fail("optimizer did not converge from any starting point", starts.len())),
    }
}

/// ECDF below the threshold, fitted GPD tail above it.
#[derive(Debug, Clone)]
pub struct HybridCdf {
    pub fit: GpdFit,
    pub table: EcdfTable,
}

impl HybridCdf {
    pub fn fit(values: &[f64], k: usize) -> Result<Self> {
        let fit = gpd_fit(values, k)?;
        let table = EcdfTable::build(values)?;
        Ok(HybridCdf { fit, table })
    }

    pub fn eval(&self, q: f64) -> f64 {
        gpd_hybrid_cdf(&self.fit, &self.table, q)
    }
}

/// `F(q)` for `q <= u`, else `F(u) + (1 - F(u)) G(q - u)`.
pub fn gpd_hybrid_cdf(fit: &GpdFit, table: &EcdfTable, q: f64) -> f64 {
    let at_threshold = table.eval(fit.threshold);
    if q <= fit.threshold {
        return table.eval(q);
    }
    (at_threshold + (1.0 - at_threshold) * fit.excess_cdf(q - fit.threshold)).clamp(0.0, 1.0)
}

/// Coefficient from precomputed hybrid CDF values of cause and effect.
///
/// Returns the value and `k_g = #{i : F_X(x_i) >= 1 - k/n}` over the whole sample.
pub(crate) fn gpd_value_from_cdf(
    cdf_x: &[f64],
    cdf_y: &[f64],
    p: usize,
    k: usize,
) -> Result<(f64, usize)> {
    let n = cdf_x.len();
    let level = (n - k) as f64 / n as f64;
    let k_g = cdf_x.iter().filter(|&&u| u >= level).count();
    if k_g == 0 {
        return Err(CtcError::Degenerate(
            "no cause value reaches the fitted extreme level".into(),
        ));
    }
    let mut total = 0.0;
    let mut used = 0usize;
    for i in 0..n - p {
        if cdf_x[i] >= level {
            total += cdf_y[i + 1..=i + p].iter().cloned().fold(0.0, f64::max);
            used += 1;
        }
    }
    if used == 0 {
        return Err(CtcError::Degenerate(format!(
            "no fitted cause extreme falls within the first n - p = {} positions",
            n - p
        )));
    }
    Ok(((total / k_g as f64).clamp(0.0, 1.0), k_g))
}

/// Max-aggregated coefficient with GPD-hybrid CDFs for both series.
pub fn gpd_ctc(x: &Series, y: &Series, p: usize, k: impl Into<ExtremeCount>) -> Result<CtcEstimate> {
    let n = x.len();
    let k = k.into().resolve(n)?;
    check_shape(n, &[y.len()], p)?;
    let hx = HybridCdf::fit(x.values(), k)?;
    let hy = HybridCdf::fit(y.values(), k)?;
    let cdf_x: Vec<f64> = x.values().iter().map(|&v| hx.eval(v)).collect();
    let cdf_y: Vec<f64> = y.values().iter().map(|&v| hy.eval(v)).collect();
    let (value, k_g) = gpd_value_from_cdf(&cdf_x, &cdf_y, p, k)?;
    Ok(CtcEstimate {
        value,
        cause: x.name().to_string(),
        effect: y.name().to_string(),
        p,
        k,
        variant: Variant::Gpd,
        effective_k: k_g,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn gpd_draws(n: usize, scale: f64, shape: f64, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let u: f64 = rng.random();
                scale * ((1.0 - u).powf(-shape) - 1.0) / shape
            })
            .collect()
    }

    /// Draws above a block of zeros, so that `u = 0` and every draw is an exceedance.
    fn padded(draws: Vec<f64>) -> (Vec<f64>, usize) {
        let k = draws.len() + 1;
        let mut v = draws;
        v.extend(std::iter::repeat_n(0.0, k));
        (v, k)
    }

    #[test]
    fn recovers_gpd_parameters() {
        let (values, k) = padded(gpd_draws(5000, 1.0, 0.25, 11));
        let fit = gpd_fit(&values, k).unwrap();
        assert_eq!(fit.threshold, 0.0);
        assert_eq!(fit.exceedances, 5000);
        assert!((0.9..=1.1).contains(&fit.scale), "{fit:?}");
        assert!((0.15..=0.35).contains(&fit.shape), "{fit:?}");
    }

    #[test]
    fn exponential_has_near_zero_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let draws: Vec<f64> = (0..5000).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
        let (values, k) = padded(draws);
        let fit = gpd_fit(&values, k).unwrap();
        assert!((-0.1..=0.1).contains(&fit.shape), "{fit:?}");
        let m = fit.exceedances as f64;
        let excess: Vec<f64> = values.iter().filter(|v| **v > 0.0).cloned().collect();
        let mean = excess.iter().sum::<f64>() / m;
        let exp_ll = -(m * mean.ln() + m);
        assert!(fit.log_likelihood >= exp_ll - 1e-9);
    }

    #[test]
    fn constant_exceedances_fail() {
        let mut values = vec![0.0; 50];
        values.extend(vec![2.0; 20]);
        values.extend(vec![5.0; 12]);
        // u = 2.0 (13th largest), twelve identical excesses of 3.0.
        let err = gpd_fit(&values, 13).unwrap_err();
        assert!(matches!(err, CtcError::Fit { .. }));
        assert!(matches!(gpd_fit(&[1.0; 100], 20), Err(CtcError::Fit { .. })));
    }

    #[test]
    fn hybrid_cdf_anchors() {
        let values: Vec<f64> = (1..=200).map(f64::from).collect();
        let table = EcdfTable::build(&values).unwrap();
        let fit = GpdFit {
            threshold: 180.0,
            scale: 4.0,
            shape: 0.0,
            exceedances: 20,
            log_likelihood: 0.0,
        };
        let fu = table.eval(180.0);
        assert_eq!(gpd_hybrid_cdf(&fit, &table, 180.0), fu);
        assert!((gpd_hybrid_cdf(&fit, &table, 180.0 + 1e-13) - fu).abs() < 1e-12);
        let expected = fu + (1.0 - fu) * (1.0 - (-1.0f64).exp());
        assert!((gpd_hybrid_cdf(&fit, &table, 184.0) - expected).abs() < 1e-12);
        assert_eq!(gpd_hybrid_cdf(&fit, &table, 1e300), 1.0);
        assert_eq!(gpd_hybrid_cdf(&fit, &table, 50.0), 0.25);
        let heavy = GpdFit { shape: 0.5, ..fit };
        assert!((gpd_hybrid_cdf(&heavy, &table, 1e300) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_effect_fails_to_fit() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let xv: Vec<f64> = (0..400).map(|_| 1.0 / (1.0 - rng.random::<f64>())).collect();
        let x = Series::new("x", xv).unwrap();
        let y = Series::new("y", vec![3.0; 400]).unwrap();
        assert!(matches!(gpd_ctc(&x, &y, 3, ExtremeCount::Auto), Err(CtcError::Fit { .. })));
    }
}
