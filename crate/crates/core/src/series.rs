//! Validated series, empirical CDFs and order statistics.

use serde::{Deserialize, Serialize};

use crate::error::{CtcError, Result};

/// A named, finite, non-empty sequence of observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    name: String,
    values: Vec<f64>,
}

impl Series {
    pub fn new(name: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        let name = name.into();
        if values.is_empty() {
            return Err(CtcError::usage(format!("series '{name}' is empty")));
        }
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(CtcError::domain(format!(
                "series '{name}' has non-finite value {v} at position {i}"
            )));
        }
        Ok(Series { name, values })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// Always false; construction rejects empty series.
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Same values under a new name.
    pub fn renamed(&self, name: impl Into<String>) -> Series {
        Series {
            name: name.into(),
            values: self.values.clone(),
        }
    }

    /// Elementwise negation, for lower-tail analyses.
    pub fn negated(&self) -> Series {
        Series {
            name: self.name.clone(),
            values: self.values.iter().map(|v| -v).collect(),
        }
    }
}

/// Empirical CDF `F(q) = #{j : x_j <= q} / n` backed by a sorted copy of the sample.
#[derive(Debug, Clone, PartialEq)]
pub struct EcdfTable {
    sorted: Vec<f64>,
}

impl EcdfTable {
    pub fn build(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(CtcError::usage("cannot build an ECDF from an empty sample"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(CtcError::domain("ECDF sample contains non-finite values"));
        }
        let mut sorted = values.to_vec();
        sorted.sort_unstable_by(f64::total_cmp);
        Ok(EcdfTable { sorted })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }

    /// Number of sample points `<= q`.
    pub fn count_le(&self, q: f64) -> usize {
        self.sorted.partition_point(|&x| x <= q)
    }

    pub fn eval(&self, q: f64) -> f64 {
        self.count_le(q) as f64 / self.sorted.len() as f64
    }

    /// The `k`-th largest sample value.
    pub fn kth_largest(&self, k: usize) -> Result<f64> {
        let n = self.sorted.len();
        if k == 0 || k > n {
            return Err(CtcError::usage(format!("k must lie in 1..={n}, got {k}")));
        }
        Ok(self.sorted[n - k])
    }
}

pub fn ecdf_build(s: &Series) -> Result<EcdfTable> {
    EcdfTable::build(s.values())
}

/// The order statistic `x_(n-k+1)`, i.e. the `k`-th largest value (duplicates counted).
pub fn kth_largest(values: &[f64], k: usize) -> Result<f64> {
    let n = values.len();
    if k == 0 || k > n {
        return Err(CtcError::usage(format!("k must lie in 1..={n}, got {k}")));
    }
    let mut scratch = values.to_vec();
    let (_, nth, _) = scratch.select_nth_unstable_by(n - k, f64::total_cmp);
    Ok(*nth)
}

/// ECDF evaluated at every sample point: normalized max-ranks.
pub fn normalized_ranks(values: &[f64]) -> Result<Vec<f64>> {
    let table = EcdfTable::build(values)?;
    Ok(values.iter().map(|&v| table.eval(v)).collect())
}
