//! Asymptotic variances of the oracle and bona fide intensities, z-scores,
//! and exact finite-sample moments of the residual quadratic form `s_hat`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{DenseVector, SpdFactor};
use crate::model::SampleStats;

/// `p^{-gamma}`-scaled quadratic forms of the population in the `Sigma^{-1}`
/// metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QForms {
    pub q00: f64,
    pub q0n: f64,
    pub qnn: f64,
    /// `q00 qnn - q0n^2`.
    pub d: f64,
    /// `p^{-gamma} c`.
    pub c_tilde: f64,
    pub gamma: f64,
    pub c: f64,
}

impl QForms {
    /// From unscaled forms `mu_i' Sigma^{-1} mu_j`.
    pub fn from_unscaled(q00: f64, q0n: f64, qnn: f64, p: usize, gamma: f64, c: f64) -> Self {
        let scale = (p as f64).powf(-gamma);
        let (q00, q0n, qnn) = (scale * q00, scale * q0n, scale * qnn);
        QForms {
            q00,
            q0n,
            qnn,
            d: q00 * qnn - q0n * q0n,
            c_tilde: scale * c,
            gamma,
            c,
        }
    }

    /// Limit of the oracle `alpha`, `d / (c~ q00 + d)`.
    pub fn limit_alpha(&self) -> f64 {
        self.d / (self.c_tilde * self.q00 + self.d)
    }

    /// Limit of the oracle `beta`, `(1 - alpha) q0n / q00`.
    pub fn limit_beta(&self) -> f64 {
        (1.0 - self.limit_alpha()) * self.q0n / self.q00
    }
}

pub fn compute_q_forms(
    sigma: &SpdFactor,
    mu_n: &DenseVector,
    mu_0: &DenseVector,
    gamma: f64,
    c: f64,
) -> Result<QForms> {
    let p = sigma.dim();
    for v in [mu_n, mu_0] {
        if v.len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                actual: v.len(),
            });
        }
    }
    let wn = sigma.whiten(mu_n);
    let w0 = sigma.whiten(mu_0);
    Ok(QForms::from_unscaled(
        w0.dot(&w0),
        w0.dot(&wn),
        wn.dot(&wn),
        p,
        gamma,
        c,
    ))
}

/// Which transcription of the oracle-weight variances to evaluate.
///
/// The chi-square fluctuation of `y_bar' Sigma^{-1} y_bar` has variance
/// `2 c~`, which contributes `2 c~ d^2 q00^2` to the numerator of the
/// `alpha` variance and `2 c~ d^2 q0n^2` to that of `beta`. `AsPrinted`
/// drops the factor 2 on these two terms; Monte Carlo agrees with
/// `Corrected`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum VarianceForm {
    #[default]
    Corrected,
    AsPrinted,
}

/// Asymptotic variances `(sigma2_alpha, sigma2_beta)` of the oracle
/// intensities at rate `sqrt(p^gamma n)`.
pub fn oracle_weight_variances(q: &QForms, form: VarianceForm) -> Result<(f64, f64)> {
    let QForms {
        q00,
        q0n,
        qnn,
        d,
        c_tilde: c,
        ..
    } = *q;
    let base = c * q00 + d;
    if !(base > 0.0) {
        return Err(Error::DegenerateDenominator("oracle weight variances"));
    }
    let chi_weight = match form {
        VarianceForm::Corrected => 2.0,
        VarianceForm::AsPrinted => 1.0,
    };
    let denom = base.powi(4);
    let sigma2_alpha =
        ((c * q00 - d).powi(2) * q00 * d + chi_weight * c * d * d * q00 * q00) / denom;
    let g = c * q0n * q0n - c * d - d * qnn;
    let h = d - c * q00;
    let sigma2_beta = (h * h * q0n * q0n * qnn
        + g * g * q00
        + chi_weight * c * d * d * q0n * q0n
        + 2.0 * g * h * q0n * q0n)
        / denom;
    Ok((sigma2_alpha, sigma2_beta))
}

/// Asymptotic covariance of `sqrt(n) (alpha_hat - alpha*, beta_hat - beta*)`
/// for `c < 1`, built from unscaled forms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BonaFideCovariance {
    /// `qnn - q0n^2 / q00`.
    pub s: f64,
    /// `q0n / q00`.
    pub r: f64,
    /// `2 (c + 2 s) + 2 (c + s)^2 / (1 - c)`.
    pub sigma2_s: f64,
    pub omega: [[f64; 2]; 2],
    pub c: f64,
}

impl BonaFideCovariance {
    pub fn from_forms(q00: f64, q0n: f64, qnn: f64, c: f64) -> Result<Self> {
        if !(c > 0.0 && c < 1.0) {
            return Err(Error::UnsupportedConcentration(c));
        }
        if !(q00 > 0.0) {
            return Err(Error::DegenerateTarget);
        }
        let s = (qnn - q0n * q0n / q00).max(0.0);
        let r = q0n / q00;
        let sigma2_s = 2.0 * (c + 2.0 * s) + 2.0 * (c + s).powi(2) / (1.0 - c);
        let o00 = c * c * sigma2_s / (c + s).powi(4);
        let o01 = o00 * r;
        let o11 = o00 * r * r + c * c / (c + s).powi(2) * (1.0 + (s + c) / (1.0 - c)) / q00;
        Ok(BonaFideCovariance {
            s,
            r,
            sigma2_s,
            omega: [[o00, o01], [o01, o11]],
            c,
        })
    }
}

pub fn bona_fide_covariance(
    sigma: &SpdFactor,
    mu_n: &DenseVector,
    mu_0: &DenseVector,
    c: f64,
) -> Result<BonaFideCovariance> {
    let q = compute_q_forms(sigma, mu_n, mu_0, 0.0, c)?;
    BonaFideCovariance::from_forms(q.q00, q.q0n, q.qnn, c)
}

/// All asymptotic moments of one population at one concentration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AsymptoticMoments {
    pub q: QForms,
    pub sigma2_alpha: f64,
    pub sigma2_beta: f64,
    /// Present only for `c < 1`.
    pub bona_fide: Option<BonaFideCovariance>,
}

pub fn asymptotic_moments(
    sigma: &SpdFactor,
    mu_n: &DenseVector,
    mu_0: &DenseVector,
    gamma: f64,
    c: f64,
    form: VarianceForm,
) -> Result<AsymptoticMoments> {
    let q = compute_q_forms(sigma, mu_n, mu_0, gamma, c)?;
    let (sigma2_alpha, sigma2_beta) = oracle_weight_variances(&q, form)?;
    let bona_fide = if c < 1.0 {
        let unscaled = compute_q_forms(sigma, mu_n, mu_0, 0.0, c)?;
        Some(BonaFideCovariance::from_forms(
            unscaled.q00,
            unscaled.q0n,
            unscaled.qnn,
            c,
        )?)
    } else {
        None
    };
    Ok(AsymptoticMoments {
        q,
        sigma2_alpha,
        sigma2_beta,
        bona_fide,
    })
}

/// `rate * (v - center) / sqrt(variance)` for every value.
pub fn standardize(values: &[f64], center: f64, variance: f64, rate: f64) -> Vec<f64> {
    let scale = rate / variance.sqrt();
    values.iter().map(|v| scale * (v - center)).collect()
}

/// Inverse of [`standardize`].
pub fn unstandardize(z: &[f64], center: f64, variance: f64, rate: f64) -> Vec<f64> {
    let scale = variance.sqrt() / rate;
    z.iter().map(|v| center + scale * v).collect()
}

/// Mean and variance of the noncentral F law with `d1`, `d2` degrees of
/// freedom and noncentrality `lambda`.
pub fn noncentral_f_moments(d1: usize, d2: usize, lambda: f64) -> Result<(f64, f64)> {
    if d2 <= 4 {
        return Err(Error::MomentsDoNotExist(d2));
    }
    if d1 == 0 || !(lambda >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "noncentral F needs d1 >= 1 and lambda >= 0, got d1 = {d1}, lambda = {lambda}"
        )));
    }
    let (a, b) = (d1 as f64, d2 as f64);
    let mean = b * (a + lambda) / (a * (b - 2.0));
    let variance = 2.0 * (b / a).powi(2) * ((a + lambda).powi(2) + (a + 2.0 * lambda) * (b - 2.0))
        / ((b - 2.0).powi(2) * (b - 4.0));
    Ok((mean, variance))
}

/// Finite-sample law of `s_hat` under normal data with `n > p`.
///
/// `n (n - p + 1) / ((n - 1)(p - 1)) * s_hat` is noncentral F with `p - 1`
/// and `n - p + 1` degrees of freedom and noncentrality `n s`, where `s_hat`
/// is built from the unbiased covariance `n S / (n - 1)` (see
/// [`residual_form_statistics`]).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SHatLaw {
    pub p: usize,
    pub n: usize,
    pub s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SHatMoments {
    /// Moments of the scaled statistic (the F variable).
    pub scaled_mean: f64,
    pub scaled_variance: f64,
    /// Moments of `s_hat` itself.
    pub mean: f64,
    pub variance: f64,
}

impl SHatLaw {
    pub fn new(p: usize, n: usize, s: f64) -> Result<Self> {
        if p < 2 || n <= p {
            return Err(Error::InvalidDimensions(format!(
                "needs n > p >= 2, got p = {p}, n = {n}"
            )));
        }
        if !(s >= 0.0) {
            return Err(Error::InvalidArgument(format!("s must be nonnegative, got {s}")));
        }
        Ok(SHatLaw { p, n, s })
    }

    pub fn scale(&self) -> f64 {
        let (p, n) = (self.p as f64, self.n as f64);
        n * (n - p + 1.0) / ((n - 1.0) * (p - 1.0))
    }

    pub fn moments(&self) -> Result<SHatMoments> {
        let (mean, variance) =
            noncentral_f_moments(self.p - 1, self.n - self.p + 1, self.n as f64 * self.s)?;
        let k = self.scale();
        Ok(SHatMoments {
            scaled_mean: mean,
            scaled_variance: variance,
            mean: mean / k,
            variance: variance / (k * k),
        })
    }
}

/// `(s_hat, R_hat)` of one sample: with `A = S_u^{-1}` and
/// `S_u = n S / (n - 1)`,
/// `s_hat = y' A y - (mu_0' A y)^2 / (mu_0' A mu_0)` and
/// `R_hat = (mu_0' A y) / (mu_0' A mu_0)`.
pub fn residual_form_statistics(stats: &SampleStats, mu_0: &DenseVector) -> Result<(f64, f64)> {
    if stats.p >= stats.n {
        return Err(Error::InvalidDimensions(format!(
            "needs n > p, got p = {}, n = {}",
            stats.p, stats.n
        )));
    }
    let (yy, y0, m00) = stats.inverse()?.forms(&stats.y_bar, mu_0);
    if !(m00 > 0.0) {
        return Err(Error::DegenerateTarget);
    }
    let unbiased = (stats.n as f64 - 1.0) / stats.n as f64;
    Ok((unbiased * (yy - y0 * y0 / m00), y0 / m00))
}

/// Conditional variance of `R_hat` given `s_hat = y`:
/// `(1 + n y / (n - 1)) / (n mu_0' Sigma^{-1} mu_0)`.
pub fn r_hat_conditional_variance(n: usize, q00: f64, y: f64) -> f64 {
    let n = n as f64;
    (1.0 + n * y / (n - 1.0)) / (n * q00)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{spd_factor, DenseMatrix};
    use approx::assert_abs_diff_eq;

    fn v(xs: &[f64]) -> DenseVector {
        DenseVector::from_column_slice(xs)
    }

    #[test]
    fn q_forms_examples() {
        let eye = spd_factor(&DenseMatrix::identity(2, 2)).unwrap();
        let q = compute_q_forms(&eye, &v(&[1.0, 0.0]), &v(&[0.0, 1.0]), 0.0, 1.0).unwrap();
        assert_eq!((q.q00, q.qnn, q.q0n, q.d), (1.0, 1.0, 0.0, 1.0));
        let mu = v(&[0.4, -2.0]);
        let q = compute_q_forms(&eye, &mu, &mu, 0.0, 1.0).unwrap();
        assert_abs_diff_eq!(q.d, 0.0, epsilon = 1e-14);
        let q = compute_q_forms(&eye, &mu, &mu, 1.0, 1.0).unwrap();
        assert_abs_diff_eq!(q.c_tilde, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(q.q00, mu.norm_squared() / 2.0, epsilon = 1e-15);
    }

    #[test]
    fn variance_plug_in_values() {
        let q = QForms::from_unscaled(1.0, 0.0, 1.0, 10, 0.0, 1.0);
        let (a, _) = oracle_weight_variances(&q, VarianceForm::AsPrinted).unwrap();
        assert_abs_diff_eq!(a, 1.0 / 16.0, epsilon = 1e-15);
        let (a, _) = oracle_weight_variances(&q, VarianceForm::Corrected).unwrap();
        assert_abs_diff_eq!(a, 1.0 / 8.0, epsilon = 1e-15);

        let q = QForms::from_unscaled(0.7, 0.7, 0.7, 10, 0.0, 0.5);
        for form in [VarianceForm::Corrected, VarianceForm::AsPrinted] {
            let (a, b) = oracle_weight_variances(&q, form).unwrap();
            assert_abs_diff_eq!(a, 0.0, epsilon = 1e-15);
            assert_abs_diff_eq!(b, 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn bona_fide_covariance_structure() {
        let b = BonaFideCovariance::from_forms(2.0, 3.0, 4.5, 0.5).unwrap();
        assert_abs_diff_eq!(b.s, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(b.r, 1.5, epsilon = 1e-15);
        assert_abs_diff_eq!(b.sigma2_s, 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(b.omega[0][0], 0.25 * 2.0 / 0.0625, epsilon = 1e-12);
        assert_eq!(b.omega[0][1], b.omega[0][0] * b.r);
        assert_eq!(b.omega[0][1], b.omega[1][0]);
        assert_eq!(
            BonaFideCovariance::from_forms(2.0, 3.0, 4.5, 1.0).unwrap_err(),
            Error::UnsupportedConcentration(1.0)
        );
    }

    #[test]
    fn standardize_round_trip() {
        assert_eq!(standardize(&[3.0], 3.0, 2.0, 5.0), vec![0.0]);
        assert_eq!(standardize(&[5.0], 3.0, 4.0, 1.0), vec![1.0]);
        let x = [0.1, -2.0, 7.5];
        let back = unstandardize(&standardize(&x, 0.3, 2.5, 11.0), 0.3, 2.5, 11.0);
        for (a, b) in x.iter().zip(back) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn central_f_mean() {
        let law = SHatLaw::new(5, 50, 0.0).unwrap();
        let m = law.moments().unwrap();
        assert_abs_diff_eq!(m.scaled_mean, 46.0 / 44.0, epsilon = 1e-14);
        assert_eq!(
            noncentral_f_moments(3, 4, 0.0).unwrap_err(),
            Error::MomentsDoNotExist(4)
        );
        assert!(SHatLaw::new(5, 5, 0.0).is_err());
    }
}
