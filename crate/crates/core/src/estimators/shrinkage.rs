//! Linear shrinkage `alpha * y_bar + beta * mu_0` and its three sets of
//! intensities: oracle (true parameters), limiting and bona fide.

use crate::error::{Error, Result};
use crate::linalg::{pseudo_inverse, sym_sqrt, DenseMatrix, DenseVector, SpdFactor, DEFAULT_PINV_TOL};
use crate::model::{PopulationSpec, SampleStats};

const DEGENERACY_TOL: f64 = 1e-12;

/// Which formula produced a pair of intensities.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightKind {
    Oracle,
    Limit,
    BonaFide,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShrinkageWeights {
    pub alpha: f64,
    pub beta: f64,
    pub kind: WeightKind,
}

impl ShrinkageWeights {
    /// `alpha * y_bar + beta * mu_0`.
    pub fn apply(&self, y_bar: &DenseVector, mu_0: &DenseVector) -> DenseVector {
        y_bar * self.alpha + mu_0 * self.beta
    }
}

fn check_len(expected: usize, v: &DenseVector) -> Result<()> {
    if v.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            actual: v.len(),
        });
    }
    Ok(())
}

/// `(1 - alpha) * cross / target` together with `alpha`.
fn linked(alpha: f64, cross: f64, target: f64, kind: WeightKind) -> ShrinkageWeights {
    ShrinkageWeights {
        alpha,
        beta: (1.0 - alpha) * cross / target,
        kind,
    }
}

/// True-parameter quantities reused across replications: the whitened
/// `mu_n`, `mu_0` and their `Sigma^{-1}` forms.
#[derive(Debug, Clone)]
pub struct OracleContext {
    factor: SpdFactor,
    white_n: DenseVector,
    white_0: DenseVector,
    /// `mu_n' Sigma^{-1} mu_n`.
    pub q_nn: f64,
    /// `mu_n' Sigma^{-1} mu_0`.
    pub q_0n: f64,
    /// `mu_0' Sigma^{-1} mu_0`.
    pub q_00: f64,
}

impl OracleContext {
    pub fn new(factor: SpdFactor, mu_n: &DenseVector, mu_0: &DenseVector) -> Result<Self> {
        check_len(factor.dim(), mu_n)?;
        check_len(factor.dim(), mu_0)?;
        let white_n = factor.whiten(mu_n);
        let white_0 = factor.whiten(mu_0);
        Ok(OracleContext {
            q_nn: white_n.dot(&white_n),
            q_0n: white_n.dot(&white_0),
            q_00: white_0.dot(&white_0),
            factor,
            white_n,
            white_0,
        })
    }

    pub fn from_population(pop: &PopulationSpec) -> Result<Self> {
        OracleContext::new(pop.sigma_factor().clone(), &pop.mu_n, &pop.mu_0)
    }

    pub fn factor(&self) -> &SpdFactor {
        &self.factor
    }

    /// Minimizers of the quadratic loss over `(alpha, beta)` for this `y_bar`.
    pub fn intensities(&self, y_bar: &DenseVector) -> Result<ShrinkageWeights> {
        check_len(self.factor.dim(), y_bar)?;
        let w = self.factor.whiten(y_bar);
        let a = w.dot(&self.white_n);
        let b = w.dot(&self.white_0);
        let c = w.dot(&w);
        let det = c * self.q_00 - b * b;
        if !(det > DEGENERACY_TOL * c * self.q_00) {
            return Err(Error::DegenerateHessian);
        }
        Ok(ShrinkageWeights {
            alpha: (a * self.q_00 - b * self.q_0n) / det,
            beta: (c * self.q_0n - b * a) / det,
            kind: WeightKind::Oracle,
        })
    }

    /// Deterministic limits of the oracle intensities at concentration `c`.
    pub fn limit(&self, c: f64) -> Result<ShrinkageWeights> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "concentration must be positive, got {c}"
            )));
        }
        if !(self.q_00 > DEGENERACY_TOL * (self.q_00 + self.q_nn)) {
            return Err(Error::DegenerateTarget);
        }
        let d = self.q_nn * self.q_00 - self.q_0n * self.q_0n;
        let alpha = d / ((c + self.q_nn) * self.q_00 - self.q_0n * self.q_0n);
        Ok(linked(alpha, self.q_0n, self.q_00, WeightKind::Limit))
    }

    /// Quadratic loss `(m - mu_n)' Sigma^{-1} (m - mu_n)`.
    pub fn loss(&self, mu_hat: &DenseVector) -> Result<f64> {
        check_len(self.factor.dim(), mu_hat)?;
        let diff = self.factor.whiten(mu_hat) - &self.white_n;
        Ok(diff.norm_squared())
    }
}

/// Oracle intensities for a single sample mean.
pub fn oracle_intensities(
    y_bar: &DenseVector,
    sigma: &SpdFactor,
    mu_n: &DenseVector,
    mu_0: &DenseVector,
) -> Result<ShrinkageWeights> {
    OracleContext::new(sigma.clone(), mu_n, mu_0)?.intensities(y_bar)
}

/// Limits of the oracle intensities when `p / n -> c`.
pub fn limit_intensities(
    sigma: &SpdFactor,
    mu_n: &DenseVector,
    mu_0: &DenseVector,
    c: f64,
) -> Result<ShrinkageWeights> {
    OracleContext::new(sigma.clone(), mu_n, mu_0)?.limit(c)
}

/// Options of the bona fide estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BonaFideOptions {
    /// Clamp `alpha` to `[0, 1]` and recompute `beta` from the clamped value.
    pub clamp: bool,
}

/// Consistent estimators of the limiting intensities from data alone.
///
/// Uses `S^{-1}` with correction `p / (n - p)` when `p < n` and the
/// Moore-Penrose `S^+` with correction `n / (p - n)` when `p > n`.
pub fn bona_fide_intensities(stats: &SampleStats, mu_0: &DenseVector) -> Result<ShrinkageWeights> {
    bona_fide_intensities_with(stats, mu_0, BonaFideOptions::default())
}

pub fn bona_fide_intensities_with(
    stats: &SampleStats,
    mu_0: &DenseVector,
    options: BonaFideOptions,
) -> Result<ShrinkageWeights> {
    check_len(stats.p, mu_0)?;
    let inverse = stats.inverse()?;
    let (yy, y0, m00) = inverse.forms(&stats.y_bar, mu_0);
    let (p, n) = (stats.p as f64, stats.n as f64);
    let correction = if inverse.is_pseudo() {
        1.0 / (p / n - 1.0)
    } else {
        p / (n - p)
    };
    if !(m00 > 0.0) {
        return Err(Error::DegenerateTarget);
    }
    let denominator = yy * m00 - y0 * y0;
    if !(denominator > DEGENERACY_TOL * yy * m00) {
        return Err(Error::DegenerateHessian);
    }
    let mut alpha = ((yy - correction) * m00 - y0 * y0) / denominator;
    if options.clamp {
        alpha = alpha.clamp(0.0, 1.0);
    }
    Ok(linked(alpha, y0, m00, WeightKind::BonaFide))
}

/// Optimal linear shrinkage estimator `alpha_hat * y_bar + beta_hat * mu_0`.
pub fn olse(stats: &SampleStats, mu_0: &DenseVector) -> Result<DenseVector> {
    Ok(bona_fide_intensities(stats, mu_0)?.apply(&stats.y_bar, mu_0))
}

/// `Sigma^{-1/2} (X X^T / n - x_bar x_bar^T)^+ Sigma^{-1/2}` with
/// `X = Sigma^{-1/2} Y` the whitened data. Needs the true covariance.
pub fn generalized_inverse_s(sigma: &DenseMatrix, y: &DenseMatrix) -> Result<DenseMatrix> {
    if sigma.nrows() != y.nrows() {
        return Err(Error::DimensionMismatch {
            expected: sigma.nrows(),
            actual: y.nrows(),
        });
    }
    let root = sym_sqrt(sigma)?;
    let root_inv = crate::linalg::spd_factor(&root)?.inverse();
    let x = &root_inv * y;
    let n = x.ncols() as f64;
    let x_bar = x.column_mean();
    let mut sx = (&x * x.transpose()) / n;
    sx.ger(-1.0, &x_bar, &x_bar, 1.0);
    crate::linalg::symmetrize(&mut sx);
    let pinv = pseudo_inverse(&sx, DEFAULT_PINV_TOL).pinv;
    Ok(&root_inv * pinv * &root_inv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::spd_factor;
    use crate::model::sample_stats;
    use approx::assert_abs_diff_eq;

    fn v(xs: &[f64]) -> DenseVector {
        DenseVector::from_column_slice(xs)
    }

    #[test]
    fn oracle_two_dimensional_example() {
        let eye = spd_factor(&DenseMatrix::identity(2, 2)).unwrap();
        let w = oracle_intensities(&v(&[2.0, 0.0]), &eye, &v(&[1.0, 0.0]), &v(&[0.0, 1.0])).unwrap();
        assert_abs_diff_eq!(w.alpha, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(w.beta, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn oracle_with_exact_target() {
        let eye = spd_factor(&DenseMatrix::identity(3, 3)).unwrap();
        let mu = v(&[1.0, 2.0, -1.0]);
        let w = oracle_intensities(&v(&[0.3, 1.0, 2.0]), &eye, &mu, &mu).unwrap();
        assert_abs_diff_eq!(w.alpha, 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(w.beta, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn oracle_rejects_collinear_mean_and_target() {
        let eye = spd_factor(&DenseMatrix::identity(2, 2)).unwrap();
        let err = oracle_intensities(&v(&[2.0, 2.0]), &eye, &v(&[1.0, 0.0]), &v(&[1.0, 1.0]));
        assert_eq!(err.unwrap_err(), Error::DegenerateHessian);
    }

    #[test]
    fn limit_examples() {
        let eye = spd_factor(&DenseMatrix::identity(2, 2)).unwrap();
        let w = limit_intensities(&eye, &v(&[1.0, 0.0]), &v(&[0.0, 1.0]), 1.0).unwrap();
        assert_abs_diff_eq!(w.alpha, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(w.beta, 0.0, epsilon = 1e-15);
        let mu = v(&[1.0, 2.0]);
        let w = limit_intensities(&eye, &mu, &mu, 0.7).unwrap();
        assert_abs_diff_eq!(w.alpha, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(w.beta, 1.0, epsilon = 1e-15);
        assert_eq!(
            limit_intensities(&eye, &mu, &v(&[0.0, 0.0]), 0.7).unwrap_err(),
            Error::DegenerateTarget
        );
    }

    #[test]
    fn bona_fide_hand_example() {
        let stats =
            SampleStats::from_parts(v(&[2.0, 0.0]), DenseMatrix::identity(2, 2), 4).unwrap();
        let w = bona_fide_intensities(&stats, &v(&[0.0, 1.0])).unwrap();
        assert_abs_diff_eq!(w.alpha, 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(w.beta, 0.0, epsilon = 1e-15);
        let mu_hat = olse(&stats, &v(&[0.0, 1.0])).unwrap();
        assert_abs_diff_eq!(mu_hat[0], 1.5, epsilon = 1e-15);
        assert_abs_diff_eq!(mu_hat[1], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn clamp_bounds_alpha_and_keeps_link() {
        let stats =
            SampleStats::from_parts(v(&[0.5, 0.1]), DenseMatrix::identity(2, 2), 4).unwrap();
        let mu_0 = v(&[0.3, 1.0]);
        let raw = bona_fide_intensities(&stats, &mu_0).unwrap();
        assert!(raw.alpha < 0.0);
        let w = bona_fide_intensities_with(&stats, &mu_0, BonaFideOptions { clamp: true }).unwrap();
        assert_eq!(w.alpha, 0.0);
        let link = stats.y_bar.dot(&mu_0) / mu_0.dot(&mu_0);
        assert_abs_diff_eq!(w.beta, link, epsilon = 1e-14);
    }

    #[test]
    fn generalized_inverse_reduces_to_known_inverses() {
        let mut rng = crate::seeding::substream(11, 0);
        let y = crate::linalg::standard_normal_matrix(5, 3, &mut rng);
        let eye = DenseMatrix::identity(5, 5);
        let stats = sample_stats(&y).unwrap();
        let s_minus = generalized_inverse_s(&eye, &y).unwrap();
        let pinv = pseudo_inverse(&stats.s, DEFAULT_PINV_TOL).pinv;
        assert!((s_minus - pinv).amax() < 1e-8);

        let y = crate::linalg::standard_normal_matrix(3, 9, &mut rng);
        let sigma = DenseMatrix::from_row_slice(3, 3, &[2.0, 0.5, 0.0, 0.5, 1.0, 0.2, 0.0, 0.2, 3.0]);
        let stats = sample_stats(&y).unwrap();
        let s_minus = generalized_inverse_s(&sigma, &y).unwrap();
        assert!((s_minus - stats.inverse().unwrap().matrix()).amax() < 1e-8);
    }
}
