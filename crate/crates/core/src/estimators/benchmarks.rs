//! Competing estimators: James-Stein for `p < n`, the Baranchik-type and
//! positive-part James-Stein estimators for `p > n`, and the shrinkage
//! estimator towards the unit vector with its double sums over observations.
//!
//! `S~` is the centered scatter matrix `sum_k (y_k - y_bar)(y_k - y_bar)^T`,
//! i.e. `n S`.

use crate::error::{Error, Result};
use crate::linalg::{pseudo_inverse, spd_factor, symmetrize, DenseMatrix, DenseVector, DEFAULT_PINV_TOL};

fn check_shape(y_bar: &DenseVector, scatter: &DenseMatrix, p: usize) -> Result<()> {
    for got in [y_bar.len(), scatter.nrows(), scatter.ncols()] {
        if got != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                actual: got,
            });
        }
    }
    Ok(())
}

pub(crate) fn check_low_dim(p: usize, n: usize) -> Result<()> {
    if p < 3 || n < p + 4 {
        return Err(Error::InvalidDimensions(format!(
            "James-Stein needs p >= 3 and n >= p + 4, got p = {p}, n = {n}"
        )));
    }
    Ok(())
}

pub(crate) fn check_high_dim(p: usize, n: usize) -> Result<()> {
    if n < 3 || p <= n {
        return Err(Error::InvalidDimensions(format!(
            "needs p > n >= 3, got p = {p}, n = {n}"
        )));
    }
    Ok(())
}

/// Shrinkage factor `1 - ((p - 2) / (n - p - 3)) / form`, `form = y_bar' S~^{-1} y_bar`.
pub fn james_stein_factor(form: f64, p: usize, n: usize) -> f64 {
    1.0 - ((p as f64 - 2.0) / (n as f64 - p as f64 - 3.0)) / form
}

/// James-Stein estimator with an estimated covariance, `p < n`.
pub fn james_stein(y_bar: &DenseVector, scatter: &DenseMatrix, p: usize, n: usize) -> Result<DenseVector> {
    check_shape(y_bar, scatter, p)?;
    check_low_dim(p, n)?;
    let factor = spd_factor(scatter).map_err(|e| match e {
        Error::NotPositiveDefinite => Error::SingularSample,
        other => other,
    })?;
    let w = factor.whiten(y_bar);
    Ok(y_bar * james_stein_factor(w.dot(&w), p, n))
}

pub(crate) fn js_high_dim_core(
    y_bar: &DenseVector,
    projected: &DenseVector,
    form: f64,
    p: usize,
    n: usize,
) -> Result<DenseVector> {
    if !(form > 0.0) {
        return Err(Error::DegenerateDenominator("high-dimensional James-Stein"));
    }
    let a = 2.0 * (n as f64 - 2.0) / (p as f64 - n as f64 + 3.0);
    Ok(y_bar - projected * (a / form))
}

pub(crate) fn js_positive_core(
    y_bar: &DenseVector,
    projected: &DenseVector,
    form: f64,
    p: usize,
    n: usize,
    as_printed: bool,
) -> Result<DenseVector> {
    if !(form > 0.0) {
        return Err(Error::DegenerateDenominator("positive-part James-Stein"));
    }
    let b = 1.0 - ((n as f64 - 2.0) / (p as f64 - n as f64 + 3.0)) / form;
    let sign = if as_printed { 1.0 } else { -1.0 };
    Ok(y_bar + projected * (sign + b.max(0.0)))
}

/// `(S~ S~^+ y_bar, y_bar' S~^+ y_bar)` from an explicit scatter matrix.
fn pseudo_parts(y_bar: &DenseVector, scatter: &DenseMatrix) -> (DenseVector, f64) {
    let pinv = pseudo_inverse(scatter, DEFAULT_PINV_TOL).pinv;
    let a = &pinv * y_bar;
    (scatter * &a, y_bar.dot(&a))
}

/// `(I - a S~ S~^+ / (y_bar' S~^+ y_bar)) y_bar` with `a = 2(n - 2)/(p - n + 3)`.
pub fn js_high_dim(y_bar: &DenseVector, scatter: &DenseMatrix, p: usize, n: usize) -> Result<DenseVector> {
    check_shape(y_bar, scatter, p)?;
    check_high_dim(p, n)?;
    let (projected, form) = pseudo_parts(y_bar, scatter);
    js_high_dim_core(y_bar, &projected, form, p, n)
}

/// Positive-part James-Stein estimator for `p > n`.
///
/// With `P = S~ S~^+` and `b = 1 - ((n - 2)/(p - n + 3)) / (y_bar' S~^+ y_bar)`,
/// returns `(I + P) y_bar + max(b, 0) P y_bar` when `as_printed` and the
/// projector decomposition `(I - P) y_bar + max(b, 0) P y_bar` otherwise.
pub fn js_positive_part(
    y_bar: &DenseVector,
    scatter: &DenseMatrix,
    p: usize,
    n: usize,
    as_printed: bool,
) -> Result<DenseVector> {
    check_shape(y_bar, scatter, p)?;
    check_high_dim(p, n)?;
    let (projected, form) = pseudo_parts(y_bar, scatter);
    js_positive_core(y_bar, &projected, form, p, n, as_printed)
}

/// Shrinkage towards the unit vector with weights built from the double
/// sums `Z1..Z4` over observations.
///
/// The fast path evaluates every off-diagonal sum as a full sum minus its
/// diagonal; the naive path loops over all pairs `i != j`.
pub fn wang_estimator(y: &DenseMatrix, use_fast_path: bool) -> Result<DenseVector> {
    let (p, n) = y.shape();
    if n < 2 || p <= n {
        return Err(Error::InvalidDimensions(format!(
            "needs p > n >= 2, got p = {p}, n = {n}"
        )));
    }
    let y_bar = y.column_mean();
    let mut scatter = y * y.transpose();
    scatter.ger(-(n as f64), &y_bar, &y_bar, 1.0);
    symmetrize(&mut scatter);
    let pinv = pseudo_inverse(&scatter, DEFAULT_PINV_TOL).pinv;
    wang_core(y, &y_bar, &pinv, use_fast_path)
}

/// `Z1..Z4` for data `y` and the pseudo-inverse of its scatter matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WangSums {
    pub z1: f64,
    pub z2: f64,
    pub z3: f64,
    pub z4: f64,
}

pub fn wang_sums(y: &DenseMatrix, scatter_pinv: &DenseMatrix, use_fast_path: bool) -> WangSums {
    let (p, n) = y.shape();
    let (pf, nf) = (p as f64, n as f64);
    let ones = DenseVector::from_element(p, 1.0);
    let pinv_ones = scatter_pinv * &ones;
    let t = ones.dot(&pinv_ones);
    // a_k = 1' S~+ Y_k
    let a = y.tr_mul(&pinv_ones);
    let (diag, off, off_a) = if use_fast_path {
        let gram = y.tr_mul(&(scatter_pinv * y));
        let diag = gram.trace();
        let sum_a = a.sum();
        (diag, gram.sum() - diag, sum_a * sum_a - a.norm_squared())
    } else {
        let mut diag = 0.0;
        let mut off = 0.0;
        let mut off_a = 0.0;
        for i in 0..n {
            let yi = y.column(i);
            for j in 0..n {
                let yj = y.column(j);
                let mut form = 0.0;
                for r in 0..p {
                    let mut row = 0.0;
                    for c in 0..p {
                        row += scatter_pinv[(r, c)] * yj[c];
                    }
                    form += yi[r] * row;
                }
                if i == j {
                    diag += form;
                } else {
                    off += form;
                    let left = ones.dot(&(scatter_pinv * yi));
                    let right = (yj.transpose() * &pinv_ones)[0];
                    off_a += left * right;
                }
            }
        }
        (diag, off, off_a)
    };
    WangSums {
        z1: off / (pf * (nf - 1.0)),
        z2: (diag - off / (nf - 1.0)) / (nf * pf),
        z3: a.sum() / (nf * t),
        z4: off_a / (pf * (nf - 1.0) * t),
    }
}

pub(crate) fn wang_core(
    y: &DenseMatrix,
    y_bar: &DenseVector,
    scatter_pinv: &DenseMatrix,
    use_fast_path: bool,
) -> Result<DenseVector> {
    let z = wang_sums(y, scatter_pinv, use_fast_path);
    let denominator = z.z1 + z.z2 * z.z4;
    if !(denominator.abs() > 1e-12 * (z.z1.abs() + (z.z2 * z.z4).abs())) {
        return Err(Error::DegenerateDenominator("unit-target shrinkage"));
    }
    let weight_mean = (z.z1 - z.z4) / denominator;
    let weight_unit = z.z2 * z.z3 / denominator;
    Ok(y_bar * weight_mean + DenseVector::from_element(y.nrows(), weight_unit))
}
