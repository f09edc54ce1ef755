//! Compound causal tail coefficients for stationary multivariate time series.
//!
//! The crate estimates whether extremes in a cause series are followed by
//! compound extremes in one or more effect series within an extremal delay
//! window, and tests that relationship with a time-shifted moving block
//! bootstrap.
//!
//! Module map:
//!
//! - [`impact`]: the weighted impact function aggregating lagged ECDF values.
//! - [`series`]: validated series, empirical CDFs and order statistics.
//! - [`ctc`]: compound, max-based, GPD-parametric, conditional and
//!   multivariate coefficient estimators.
//! - [`delay`]: cross-extremogram and asymmetric PCCF lag profiles.
//! - [`weights`]: softmax-parameterized differential evolution over the simplex.
//! - [`bootstrap`]: time shifting, moving block resampling and the one-sided test.
//! - [`simulate`]: benchmark model zoo, comparator methods and Monte Carlo tables.

pub mod bootstrap;
pub mod ctc;
pub mod delay;
mod error;
pub mod impact;
mod linalg;
mod optim;
pub mod rng;
pub mod series;
pub mod simulate;
pub mod weights;

pub use error::{CtcError, Result};
pub use impact::ImpactParams;
pub use series::{EcdfTable, Series};
