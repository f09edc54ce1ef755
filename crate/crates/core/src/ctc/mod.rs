//! Causal tail coefficient estimators.
//!
//! All estimators share one shape: find the indices `i <= n - p` where the
//! cause is at or above its `k`-th largest value, look at the effect's ECDF
//! values over the window `i+1 ..= i+p`, aggregate each window to a single
//! number and average. They differ in the aggregation (impact function or
//! max), in the CDF (empirical or GPD hybrid), in extra conditioning, and in
//! the divisor.
//!
//! Indices in the last `p` positions never condition, even when extreme,
//! while the divisor stays `k`. Ties at the threshold may admit more than
//! `k` indices.

mod gpd;

pub use gpd::{gpd_ctc, gpd_fit, gpd_hybrid_cdf, GpdFit, HybridCdf};
pub(crate) use gpd::gpd_value_from_cdf;

use serde::{Deserialize, Serialize};

use crate::error::{CtcError, Result};
use crate::impact::ImpactParams;
use crate::series::{EcdfTable, Series};

/// Which estimator produced a coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    Compound,
    Max,
    Gpd,
    ConditionalCompound,
    MultivariateCompound,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Compound => "compound",
            Variant::Max => "max",
            Variant::Gpd => "gpd",
            Variant::ConditionalCompound => "conditional",
            Variant::MultivariateCompound => "multivariate",
        }
    }
}

/// Number of upper order statistics treated as extremes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExtremeCount {
    /// `floor(sqrt(n))`.
    Auto,
    Fixed(usize),
}

impl ExtremeCount {
    pub fn resolve(self, n: usize) -> Result<usize> {
        let k = match self {
            ExtremeCount::Auto => default_k(n),
            ExtremeCount::Fixed(k) => k,
        };
        if k == 0 || k > n {
            return Err(CtcError::usage(format!("k must lie in 1..={n}, got {k}")));
        }
        Ok(k)
    }
}

impl From<usize> for ExtremeCount {
    fn from(k: usize) -> Self {
        ExtremeCount::Fixed(k)
    }
}

/// `floor(sqrt(n))`, at least 1.
pub fn default_k(n: usize) -> usize {
    let mut k = (n as f64).sqrt() as usize;
    while k * k > n {
        k -= 1;
    }
    while (k + 1) * (k + 1) <= n {
        k += 1;
    }
    k.max(1)
}

/// A directional coefficient with its estimation context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CtcEstimate {
    pub value: f64,
    pub cause: String,
    pub effect: String,
    pub p: usize,
    pub k: usize,
    pub variant: Variant,
    /// `k` for the compound/max/multivariate estimators, `k_g` or `k_c` otherwise.
    pub effective_k: usize,
}

pub(crate) fn check_shape(n: usize, lens: &[usize], p: usize) -> Result<()> {
    if let Some(&bad) = lens.iter().find(|&&l| l != n) {
        return Err(CtcError::usage(format!(
            "series lengths differ: cause has {n} points, another series has {bad}"
        )));
    }
    if p == 0 || p >= n {
        return Err(CtcError::usage(format!(
            "extremal delay must lie in 1..={}, got {p}",
            n.saturating_sub(1)
        )));
    }
    Ok(())
}

/// Indices `i < n - p` (0-based) with `x[i] >= x_(n-k+1)`.
pub(crate) fn extreme_indices(x: &[f64], p: usize, k: usize) -> Result<Vec<usize>> {
    let n = x.len();
    let threshold = crate::series::kth_largest(x, k)?;
    let idx: Vec<usize> = (0..n - p).filter(|&i| x[i] >= threshold).collect();
    if idx.is_empty() {
        return Err(CtcError::Degenerate(format!(
            "none of the {k} largest cause values falls within the first n - p = {} positions",
            n - p
        )));
    }
    Ok(idx)
}

/// ECDF windows of one or more effect series at the cause's extreme indices.
///
/// Each row holds `F_{Y^1}(y^1_{i+1}), ..., F_{Y^1}(y^1_{i+p}), F_{Y^2}(...), ...`.
/// Rows are independent of the impact weights, so a weight search evaluates
/// many parameter vectors against a single table.
#[derive(Debug, Clone)]
pub struct ExtremeWindows {
    values: Vec<f64>,
    width: usize,
    k: usize,
}

impl ExtremeWindows {
    pub fn build(x: &[f64], effects: &[&[f64]], p: usize, k: usize) -> Result<Self> {
        let n = x.len();
        if effects.is_empty() {
            return Err(CtcError::usage("at least one effect series is required"));
        }
        let lens: Vec<usize> = effects.iter().map(|e| e.len()).collect();
        check_shape(n, &lens, p)?;
        if k == 0 || k > n {
            return Err(CtcError::usage(format!("k must lie in 1..={n}, got {k}")));
        }
        let idx = extreme_indices(x, p, k)?;
        let tables = effects
            .iter()
            .map(|e| EcdfTable::build(e))
            .collect::<Result<Vec<_>>>()?;
        let width = effects.len() * p;
        let mut values = Vec::with_capacity(idx.len() * width);
        for &i in &idx {
            for (table, e) in tables.iter().zip(effects) {
                values.extend(e[i + 1..=i + p].iter().map(|&y| table.eval(y)));
            }
        }
        Ok(ExtremeWindows { values, width, k })
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.width)
    }

    pub fn row_count(&self) -> usize {
        self.values.len() / self.width
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// `(1/k) sum_rows h(row)`.
    pub fn compound(&self, params: &ImpactParams) -> Result<f64> {
        if params.len() != self.width {
            return Err(CtcError::usage(format!(
                "impact function has {} weights but windows have {} coordinates",
                params.len(),
                self.width
            )));
        }
        let total: f64 = self.rows().map(|row| params.eval_checked(row)).sum();
        Ok((total / self.k as f64).clamp(0.0, 1.0))
    }

    /// `(1/k) sum_rows max(row)`.
    pub fn max(&self) -> f64 {
        let total: f64 = self
            .rows()
            .map(|row| row.iter().cloned().fold(0.0, f64::max))
            .sum();
        (total / self.k as f64).clamp(0.0, 1.0)
    }
}

/// Compound coefficient on raw slices; one or more effect series.
pub fn compound_value(
    x: &[f64],
    effects: &[&[f64]],
    p: usize,
    k: usize,
    params: &ImpactParams,
) -> Result<f64> {
    ExtremeWindows::build(x, effects, p, k)?.compound(params)
}

/// Max-based coefficient on raw slices.
pub fn max_value(x: &[f64], y: &[f64], p: usize, k: usize) -> Result<f64> {
    Ok(ExtremeWindows::build(x, &[y], p, k)?.max())
}

/// Compound causal tail coefficient of `x` on the lagged window of `y`.
pub fn compound_ctc(
    x: &Series,
    y: &Series,
    p: usize,
    k: impl Into<ExtremeCount>,
    params: &ImpactParams,
) -> Result<CtcEstimate> {
    let k = k.into().resolve(x.len())?;
    if params.len() != p {
        return Err(CtcError::usage(format!(
            "impact function has {} weights but the extremal delay is {p}",
            params.len()
        )));
    }
    let value = compound_value(x.values(), &[y.values()], p, k, params)?;
    Ok(CtcEstimate {
        value,
        cause: x.name().to_string(),
        effect: y.name().to_string(),
        p,
        k,
        variant: Variant::Compound,
        effective_k: k,
    })
}

/// Time-series causal tail coefficient with the max aggregator.
pub fn max_ctc(x: &Series, y: &Series, p: usize, k: impl Into<ExtremeCount>) -> Result<CtcEstimate> {
    let k = k.into().resolve(x.len())?;
    let value = max_value(x.values(), y.values(), p, k)?;
    Ok(CtcEstimate {
        value,
        cause: x.name().to_string(),
        effect: y.name().to_string(),
        p,
        k,
        variant: Variant::Max,
        effective_k: k,
    })
}

/// Compound coefficient restricted to extreme windows with a quiet confounder.
///
/// An extreme index `i` contributes only if `z[i-1], ..., z[i-min(p,i)]`
/// (0-based, so positions before the sample start are skipped) are all
/// strictly below the `k`-th largest `z`. The divisor is the number of such
/// indices, `k_c`.
pub fn conditional_compound_ctc(
    x: &Series,
    y: &Series,
    z: &Series,
    p: usize,
    k: impl Into<ExtremeCount>,
    params: &ImpactParams,
) -> Result<CtcEstimate> {
    let n = x.len();
    let k = k.into().resolve(n)?;
    check_shape(n, &[y.len(), z.len()], p)?;
    if params.len() != p {
        return Err(CtcError::usage(format!(
            "impact function has {} weights but the extremal delay is {p}",
            params.len()
        )));
    }
    let (xs, ys, zs) = (x.values(), y.values(), z.values());
    let x_threshold = crate::series::kth_largest(xs, k)?;
    let z_threshold = crate::series::kth_largest(zs, k)?;
    let table = EcdfTable::build(ys)?;

    let mut window = vec![0.0; p];
    let mut total = 0.0;
    let mut k_c = 0usize;
    for i in 0..n - p {
        if xs[i] < x_threshold {
            continue;
        }
        let quiet = (1..=p.min(i)).all(|j| zs[i - j] < z_threshold);
        if !quiet {
            continue;
        }
        for (slot, &yv) in window.iter_mut().zip(&ys[i + 1..=i + p]) {
            *slot = table.eval(yv);
        }
        total += params.eval_checked(&window);
        k_c += 1;
    }
    if k_c == 0 {
        return Err(CtcError::Degenerate(
            "no valid extreme windows: every extreme cause index is preceded by an extreme confounder value"
                .into(),
        ));
    }
    Ok(CtcEstimate {
        value: (total / k_c as f64).clamp(0.0, 1.0),
        cause: x.name().to_string(),
        effect: y.name().to_string(),
        p,
        k,
        variant: Variant::ConditionalCompound,
        effective_k: k_c,
    })
}

/// Compound coefficient over the concatenated windows of several effect series.
///
/// `params` carries `effects.len() * p` weights ordered series-major.
pub fn multivariate_compound_ctc(
    x: &Series,
    effects: &[Series],
    p: usize,
    k: impl Into<ExtremeCount>,
    params: &ImpactParams,
) -> Result<CtcEstimate> {
    let k = k.into().resolve(x.len())?;
    if effects.is_empty() {
        return Err(CtcError::usage("at least one effect series is required"));
    }
    if params.len() != effects.len() * p {
        return Err(CtcError::usage(format!(
            "impact function has {} weights but {} effect series with delay {p} need {}",
            params.len(),
            effects.len(),
            effects.len() * p
        )));
    }
    let slices: Vec<&[f64]> = effects.iter().map(|e| e.values()).collect();
    let value = compound_value(x.values(), &slices, p, k, params)?;
    let effect = effects
        .iter()
        .map(|e| e.name())
        .collect::<Vec<_>>()
        .join("+");
    Ok(CtcEstimate {
        value,
        cause: x.name().to_string(),
        effect,
        p,
        k,
        variant: Variant::MultivariateCompound,
        effective_k: k,
    })
}
