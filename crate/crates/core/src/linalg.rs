//! Ordinary least squares shared by the PCCF and the Granger test.

use nalgebra::{DMatrix, DVector};

const CONDITION_LIMIT: f64 = 1e12;
const RIDGE_SCALE: f64 = 1e-8;

pub(crate) struct LeastSquares {
    pub residuals: Vec<DVector<f64>>,
    /// True when the design was numerically singular and a ridge term was added.
    #[cfg_attr(not(test), allow(dead_code))]
    pub ridged: bool,
}

/// Fits every target against the same design and returns the residuals.
///
/// Solves by Householder QR. When the ratio of extreme `|R_ii|` exceeds
/// `1e12`, falls back to `(X'X + lambda I) b = X'y` with
/// `lambda = 1e-8 * trace(X'X) / d`.
pub(crate) fn least_squares(design: &DMatrix<f64>, targets: &[DVector<f64>]) -> LeastSquares {
    let d = design.ncols();
    let qr = design.clone().qr();
    let r = qr.r();
    let diag: Vec<f64> = (0..d).map(|i| r[(i, i)].abs()).collect();
    let max = diag.iter().cloned().fold(0.0, f64::max);
    let min = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    let singular = !(min > 0.0) || max / min > CONDITION_LIMIT;

    let coefficients: Vec<DVector<f64>> = if !singular {
        let q = qr.q();
        targets
            .iter()
            .map(|t| {
                let qty = q.transpose() * t;
                r.solve_upper_triangular(&qty)
                    .unwrap_or_else(|| DVector::zeros(d))
            })
            .collect()
    } else {
        let xtx = design.transpose() * design;
        let lambda = RIDGE_SCALE * xtx.trace().max(f64::MIN_POSITIVE) / d as f64;
        let ridged = &xtx + DMatrix::identity(d, d) * lambda;
        let chol = ridged.cholesky();
        targets
            .iter()
            .map(|t| {
                let xty = design.transpose() * t;
                match &chol {
                    Some(c) => c.solve(&xty),
                    None => DVector::zeros(d),
                }
            })
            .collect()
    };

    let residuals = targets
        .iter()
        .zip(&coefficients)
        .map(|(t, b)| t - design * b)
        .collect();
    LeastSquares {
        residuals,
        ridged: singular,
    }
}

/// Pearson correlation; `None` when either side has zero variance.
pub(crate) fn correlation(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa <= 0.0 || sbb <= 0.0 {
        return None;
    }
    Some((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}
