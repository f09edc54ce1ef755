//! Time-shifted moving block bootstrap test of "X does not cause Y in extremes".
//!
//! The hypothesized effect series is circularly shifted by `s` to break any
//! causal link within the extremal delay, then `(x, y')` is resampled jointly
//! in overlapping blocks. The one-sided p-value is the fraction of replicate
//! coefficients at least as large as the observed one.
//!
//! Asymptotic validity is established for a fixed threshold; like common
//! practice, this implementation uses the data-dependent `k` largest values.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ctc::{CtcEstimate, ExtremeCount, ExtremeWindows, Variant};
use crate::error::{CtcError, Result};
use crate::impact::ImpactParams;
use crate::rng::{self, StreamRng};
use crate::series::Series;

/// Redraws allowed for a replicate whose estimate is degenerate.
pub const MAX_REDRAWS: usize = 10;

/// Statistic re-estimated on every replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Statistic {
    /// Compound coefficient; one or more effect series.
    Compound(ImpactParams),
    /// Max-aggregated coefficient; exactly one effect series.
    Max,
}

impl Statistic {
    fn variant(&self, effects: usize) -> Variant {
        match self {
            Statistic::Compound(_) if effects > 1 => Variant::MultivariateCompound,
            Statistic::Compound(_) => Variant::Compound,
            Statistic::Max => Variant::Max,
        }
    }

    fn check(&self, effects: usize, p: usize) -> Result<()> {
        match self {
            Statistic::Compound(params) if params.len() != effects * p => {
                Err(CtcError::usage(format!(
                    "impact function has {} weights but {effects} effect series with delay {p} need {}",
                    params.len(),
                    effects * p
                )))
            }
            Statistic::Max if effects != 1 => {
                Err(CtcError::usage("the max statistic takes exactly one effect series"))
            }
            _ => Ok(()),
        }
    }

    fn evaluate(&self, x: &[f64], effects: &[&[f64]], p: usize, k: usize) -> Result<f64> {
        let windows = ExtremeWindows::build(x, effects, p, k)?;
        match self {
            Statistic::Compound(params) => windows.compound(params),
            Statistic::Max => Ok(windows.max()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub b: usize,
    /// `None` means `ceil(n^(1/3))`.
    pub block_len: Option<usize>,
    /// `None` means the extremal delay `p`.
    pub shift: Option<usize>,
    pub seed: u64,
    pub level: f64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            b: 100,
            block_len: None,
            shift: None,
            seed: 0,
            level: 0.05,
        }
    }
}

impl BootstrapConfig {
    pub fn with_seed(seed: u64) -> Self {
        BootstrapConfig {
            seed,
            ..Default::default()
        }
    }

    /// Resolves defaults and validates against series length `n` and delay `p`.
    pub fn resolve(&self, n: usize, p: usize) -> Result<ResolvedConfig> {
        let block_len = self.block_len.unwrap_or_else(|| default_block_len(n));
        let shift = self.shift.unwrap_or(p);
        if self.b == 0 {
            return Err(CtcError::usage("replicate count b must be positive"));
        }
        if block_len == 0 || block_len > n {
            return Err(CtcError::usage(format!(
                "block length must lie in 1..={n}, got {block_len}"
            )));
        }
        if shift > n {
            return Err(CtcError::usage(format!("shift must lie in 0..={n}, got {shift}")));
        }
        if block_len <= shift {
            return Err(CtcError::usage(format!(
                "block length {block_len} must exceed the shift {shift}"
            )));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(CtcError::usage(format!(
                "significance level must lie in (0,1), got {}",
                self.level
            )));
        }
        Ok(ResolvedConfig {
            b: self.b,
            block_len,
            shift,
            seed: self.seed,
            level: self.level,
        })
    }
}

/// Configuration with all defaults filled in, echoed in results.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolvedConfig {
    pub b: usize,
    pub block_len: usize,
    pub shift: usize,
    pub seed: u64,
    pub level: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    pub observed: CtcEstimate,
    pub replicates: Vec<f64>,
    pub p_value: f64,
    pub reject: bool,
    pub config: ResolvedConfig,
}

/// Smallest integer `l` with `l^3 >= n`.
pub fn default_block_len(n: usize) -> usize {
    let mut l = (n as f64).cbrt().round() as usize;
    while l.saturating_mul(l).saturating_mul(l) < n {
        l += 1;
    }
    while l > 1 && (l - 1) * (l - 1) * (l - 1) >= n {
        l -= 1;
    }
    l.max(1)
}

/// Circular shift: `out[t] = in[(t - shift) mod n]`.
pub fn time_shift(s: &Series, shift: usize) -> Series {
    let v = s.values();
    let n = v.len();
    let r = shift % n;
    let mut out = Vec::with_capacity(n);
    out.extend_from_slice(&v[n - r..]);
    out.extend_from_slice(&v[..n - r]);
    Series::new(s.name(), out).expect("shift preserves validity")
}

/// Resampled positions: `ceil(n / l)` uniform block starts in `0..=n-l`, truncated to `n`.
pub fn mbb_indices(n: usize, block_len: usize, rng: &mut StreamRng) -> Vec<usize> {
    let blocks = n.div_ceil(block_len);
    let mut idx = Vec::with_capacity(blocks * block_len);
    for _ in 0..blocks {
        let start = rng.random_range(0..=n - block_len);
        idx.extend(start..start + block_len);
    }
    idx.truncate(n);
    idx
}

/// Joint moving block resample of aligned series sharing one block layout.
pub fn mbb_resample_many(series: &[&Series], block_len: usize, rng: &mut StreamRng) -> Result<Vec<Series>> {
    let n = match series.first() {
        Some(s) => s.len(),
        None => return Ok(Vec::new()),
    };
    if series.iter().any(|s| s.len() != n) {
        return Err(CtcError::usage("series lengths differ"));
    }
    if block_len == 0 || block_len > n {
        return Err(CtcError::usage(format!(
            "block length must lie in 1..={n}, got {block_len}"
        )));
    }
    let idx = mbb_indices(n, block_len, rng);
    series
        .iter()
        .map(|s| Series::new(s.name(), idx.iter().map(|&i| s.values()[i]).collect()))
        .collect()
}

/// Joint moving block resample of a pair.
pub fn mbb_resample(
    x: &Series,
    y: &Series,
    block_len: usize,
    rng: &mut StreamRng,
) -> Result<(Series, Series)> {
    let mut out = mbb_resample_many(&[x, y], block_len, rng)?.into_iter();
    Ok((out.next().unwrap(), out.next().unwrap()))
}

/// Bootstrap test of `x` causing the effect series jointly.
///
/// Every effect series is shifted by `s`; replicate `j` draws from stream
/// `(seed, j)`. A degenerate replicate is redrawn from the same stream.
pub fn mbb_test_multi(
    x: &Series,
    effects: &[Series],
    p: usize,
    k: impl Into<ExtremeCount>,
    statistic: &Statistic,
    cfg: &BootstrapConfig,
) -> Result<BootstrapResult> {
    let n = x.len();
    if effects.is_empty() {
        return Err(CtcError::usage("at least one effect series is required"));
    }
    statistic.check(effects.len(), p)?;
    let k = k.into().resolve(n)?;
    let slices: Vec<&[f64]> = effects.iter().map(|e| e.values()).collect();
    let observed_value = statistic.evaluate(x.values(), &slices, p, k)?;
    let resolved = cfg.resolve(n, p)?;

    let shifted: Vec<Series> = effects.iter().map(|e| time_shift(e, resolved.shift)).collect();
    let replicates: Vec<f64> = (0..resolved.b)
        .into_par_iter()
        .map(|j| {
            let mut rng = rng::stream(resolved.seed, j as u64);
            let mut last = None;
            for _ in 0..=MAX_REDRAWS {
                let idx = mbb_indices(n, resolved.block_len, &mut rng);
                let xr: Vec<f64> = idx.iter().map(|&i| x.values()[i]).collect();
                let er: Vec<Vec<f64>> = shifted
                    .iter()
                    .map(|e| idx.iter().map(|&i| e.values()[i]).collect())
                    .collect();
                let er_slices: Vec<&[f64]> = er.iter().map(Vec::as_slice).collect();
                match statistic.evaluate(&xr, &er_slices, p, k) {
                    Ok(v) => return Ok(v),
                    Err(e @ CtcError::Degenerate(_)) => last = Some(e),
                    Err(e) => return Err(e),
                }
            }
            Err(CtcError::Degenerate(format!(
                "bootstrap replicate {j} stayed degenerate after {MAX_REDRAWS} redraws: {}",
                last.map(|e| e.to_string()).unwrap_or_default()
            )))
        })
        .collect::<Result<_>>()?;

    let exceed = replicates.iter().filter(|&&r| r >= observed_value).count();
    let p_value = exceed as f64 / resolved.b as f64;
    Ok(BootstrapResult {
        observed: CtcEstimate {
            value: observed_value,
            cause: x.name().to_string(),
            effect: effects.iter().map(|e| e.name()).collect::<Vec<_>>().join("+"),
            p,
            k,
            variant: statistic.variant(effects.len()),
            effective_k: k,
        },
        replicates,
        p_value,
        reject: p_value < resolved.level,
        config: resolved,
    })
}

/// Bootstrap test of `x` causing `y`.
pub fn mbb_test(
    x: &Series,
    y: &Series,
    p: usize,
    k: impl Into<ExtremeCount>,
    statistic: &Statistic,
    cfg: &BootstrapConfig,
) -> Result<BootstrapResult> {
    mbb_test_multi(x, std::slice::from_ref(y), p, k, statistic, cfg)
}

/// Tests `x -> y` and `y -> x` with the same settings.
pub fn test_both_directions(
    x: &Series,
    y: &Series,
    p: usize,
    k: impl Into<ExtremeCount>,
    statistic: &Statistic,
    cfg: &BootstrapConfig,
) -> Result<(BootstrapResult, BootstrapResult)> {
    let k = k.into();
    Ok((
        mbb_test(x, y, p, k, statistic, cfg)?,
        mbb_test(y, x, p, k, statistic, cfg)?,
    ))
}
