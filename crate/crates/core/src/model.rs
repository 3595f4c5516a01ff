//! Simulation populations and observation matrices.
//!
//! A [`PopulationSpec`] holds the fixed triple `(Sigma, mu_n, mu_0)` of a
//! study together with the factorizations every replication needs. Samples
//! are `Y = Sigma^{1/2} X + mu_n 1^T` with i.i.d. standardized entries in `X`.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use nalgebra::SymmetricEigen;
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    haar_orthogonal, outer_product_pseudo_inverse, spd_factor, symmetrize, DenseMatrix,
    DenseVector, PseudoInverseResult, SpdFactor, DEFAULT_PINV_TOL,
};
use crate::seeding::substream;

/// Smallest admissible population eigenvalue.
pub const LAMBDA_FLOOR: f64 = 1e-8;

/// Spectrum of the population covariance as groups of equal eigenvalues.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenRecipe {
    /// `(fraction, eigenvalue)` pairs; fractions sum to one.
    pub proportions: Vec<(f64, f64)>,
    /// Replaces the single largest eigenvalue when set.
    pub override_lambda_max: Option<f64>,
}

impl EigenRecipe {
    /// 20% of the eigenvalues equal to 1, 40% equal to 3 and 40% equal to 10.
    pub fn standard() -> Self {
        EigenRecipe {
            proportions: vec![(0.2, 1.0), (0.4, 3.0), (0.4, 10.0)],
            override_lambda_max: None,
        }
    }

    pub fn isotropic() -> Self {
        EigenRecipe {
            proportions: vec![(1.0, 1.0)],
            override_lambda_max: None,
        }
    }

    pub fn with_lambda_max(mut self, lambda_max: f64) -> Self {
        self.override_lambda_max = Some(lambda_max);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.proportions.is_empty() {
            return Err(Error::InvalidRecipe("no eigenvalue groups".into()));
        }
        let total: f64 = self.proportions.iter().map(|(f, _)| f).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidRecipe(format!(
                "fractions sum to {total}, not 1"
            )));
        }
        for &(fraction, value) in &self.proportions {
            if !(fraction >= 0.0) {
                return Err(Error::InvalidRecipe(format!("negative fraction {fraction}")));
            }
            if !(value >= LAMBDA_FLOOR) || !value.is_finite() {
                return Err(Error::InvalidRecipe(format!(
                    "eigenvalue {value} is not positive"
                )));
            }
        }
        if let Some(top) = self.override_lambda_max {
            if !(top >= LAMBDA_FLOOR) || !top.is_finite() {
                return Err(Error::InvalidRecipe(format!(
                    "override eigenvalue {top} is not positive"
                )));
            }
        }
        Ok(())
    }

    /// Eigenvalues for dimension `p`, in group order. Each group gets
    /// `floor(fraction * p)` entries and the last group absorbs the remainder.
    pub fn eigenvalues(&self, p: usize) -> Result<Vec<f64>> {
        self.validate()?;
        let mut values = Vec::with_capacity(p);
        let groups = self.proportions.len();
        for (g, &(fraction, value)) in self.proportions.iter().enumerate() {
            let count = if g + 1 == groups {
                p - values.len()
            } else {
                ((fraction * p as f64 + 1e-9).floor() as usize).min(p - values.len())
            };
            values.extend(std::iter::repeat_n(value, count));
        }
        if let Some(top) = self.override_lambda_max {
            let (arg, _) = values
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |(ia, a), (i, &v)| {
                    if v > a {
                        (i, v)
                    } else {
                        (ia, a)
                    }
                });
            values[arg] = top;
        }
        Ok(values)
    }
}

impl Default for EigenRecipe {
    fn default() -> Self {
        EigenRecipe::standard()
    }
}

/// `Q diag(lambda) Q^T` with a Haar-distributed orthogonal `Q`.
pub fn build_covariance<R: Rng + ?Sized>(
    recipe: &EigenRecipe,
    p: usize,
    rng: &mut R,
) -> Result<DenseMatrix> {
    if p < 2 {
        return Err(Error::InvalidDimensions(format!(
            "covariance needs p >= 2, got {p}"
        )));
    }
    let lambda = DenseVector::from_vec(recipe.eigenvalues(p)?);
    let q = haar_orthogonal(p, rng);
    let mut sigma = &q * DenseMatrix::from_diagonal(&lambda) * q.transpose();
    symmetrize(&mut sigma);
    Ok(sigma)
}

/// How the `+-1` entries of `mu_n` are laid out when `gamma = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignPattern {
    /// I.i.d. uniform signs.
    #[default]
    Random,
    /// `1, -1, 1, -1, ...`
    Alternating,
}

/// Draws `(mu_n, mu_0)` for the two simulated growth regimes.
///
/// `gamma = 0`: both vectors i.i.d. uniform on `[-p^{-1/2}, p^{-1/2}]`.
/// `gamma = 1`: `mu_n` has `+-1` entries and `mu_0` is the all-ones vector.
pub fn draw_mean_vectors<R: Rng + ?Sized>(
    gamma: f64,
    p: usize,
    rng: &mut R,
) -> Result<(DenseVector, DenseVector)> {
    draw_mean_vectors_with(gamma, p, SignPattern::Random, rng)
}

pub fn draw_mean_vectors_with<R: Rng + ?Sized>(
    gamma: f64,
    p: usize,
    pattern: SignPattern,
    rng: &mut R,
) -> Result<(DenseVector, DenseVector)> {
    if gamma == 0.0 {
        let h = 1.0 / (p as f64).sqrt();
        let mu_n = DenseVector::from_fn(p, |_, _| rng.random_range(-h..=h));
        let mu_0 = DenseVector::from_fn(p, |_, _| rng.random_range(-h..=h));
        Ok((mu_n, mu_0))
    } else if gamma == 1.0 {
        let mu_n = match pattern {
            SignPattern::Random => {
                DenseVector::from_fn(p, |_, _| if rng.random::<bool>() { 1.0 } else { -1.0 })
            }
            SignPattern::Alternating => {
                DenseVector::from_fn(p, |i, _| if i % 2 == 0 { 1.0 } else { -1.0 })
            }
        };
        Ok((mu_n, DenseVector::from_element(p, 1.0)))
    } else {
        Err(Error::UnsupportedGamma(gamma))
    }
}

/// Law of the standardized innovations.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum InnovationLaw {
    #[default]
    StandardNormal,
    /// Student t with `df > 4`, scaled to unit variance.
    ScaledT { df: f64 },
    /// `Exp(1) - 1`.
    ShiftedExponential,
}

impl InnovationLaw {
    pub fn validate(&self) -> Result<()> {
        match *self {
            InnovationLaw::ScaledT { df } if !(df > 4.0) || !df.is_finite() => Err(
                Error::InvalidLaw(format!("t law needs finite df > 4, got {df}")),
            ),
            _ => Ok(()),
        }
    }

    /// Fills a `rows x cols` matrix column by column.
    pub fn sample_matrix<R: Rng + ?Sized>(
        &self,
        rows: usize,
        cols: usize,
        rng: &mut R,
    ) -> Result<DenseMatrix> {
        self.validate()?;
        let mut x = DenseMatrix::zeros(rows, cols);
        match *self {
            InnovationLaw::StandardNormal => {
                for v in x.iter_mut() {
                    *v = rng.sample(StandardNormal);
                }
            }
            InnovationLaw::ScaledT { df } => {
                let t = StudentT::new(df).map_err(|e| Error::InvalidLaw(e.to_string()))?;
                let scale = ((df - 2.0) / df).sqrt();
                for v in x.iter_mut() {
                    *v = scale * t.sample(rng);
                }
            }
            InnovationLaw::ShiftedExponential => {
                for v in x.iter_mut() {
                    let e: f64 = rng.sample(Exp1);
                    *v = e - 1.0;
                }
            }
        }
        Ok(x)
    }
}

impl fmt::Display for InnovationLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InnovationLaw::StandardNormal => write!(f, "normal"),
            InnovationLaw::ScaledT { df } => write!(f, "t:{df}"),
            InnovationLaw::ShiftedExponential => write!(f, "exponential"),
        }
    }
}

impl FromStr for InnovationLaw {
    type Err = Error;

    /// Accepts `normal`, `t:<df>` and `exponential`.
    fn from_str(s: &str) -> Result<Self> {
        let law = match s.trim() {
            "normal" | "standard-normal" => InnovationLaw::StandardNormal,
            "exponential" | "shifted-exponential" => InnovationLaw::ShiftedExponential,
            other => match other.strip_prefix("t:") {
                Some(df) => InnovationLaw::ScaledT {
                    df: df
                        .parse()
                        .map_err(|_| Error::InvalidLaw(format!("bad degrees of freedom {df:?}")))?,
                },
                None => return Err(Error::InvalidLaw(format!("unknown law {other:?}"))),
            },
        };
        law.validate()?;
        Ok(law)
    }
}

impl TryFrom<String> for InnovationLaw {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<InnovationLaw> for String {
    fn from(law: InnovationLaw) -> String {
        law.to_string()
    }
}

/// Growth-condition diagnostics of a population.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// `p^{-gamma} ||mu_n||^2`.
    pub m_lower: f64,
    /// `p^{-gamma} ||mu_0||^2`.
    pub m_target: f64,
    /// Largest of the two scaled norms.
    pub m_upper: f64,
}

impl ValidationReport {
    pub fn eigenvalues_bounded_below(&self) -> bool {
        self.lambda_min >= LAMBDA_FLOOR
    }

    pub fn norms_finite_and_positive(&self) -> bool {
        [self.m_lower, self.m_target]
            .iter()
            .all(|m| m.is_finite() && *m > 0.0)
    }
}

/// Fixed population of a simulation study.
#[derive(Debug, Clone)]
pub struct PopulationSpec {
    pub p: usize,
    pub gamma: f64,
    pub mu_n: DenseVector,
    pub mu_0: DenseVector,
    pub sigma: DenseMatrix,
    sigma_sqrt: DenseMatrix,
    sigma_factor: SpdFactor,
    report: ValidationReport,
}

impl PopulationSpec {
    pub fn new(
        gamma: f64,
        mu_n: DenseVector,
        mu_0: DenseVector,
        sigma: DenseMatrix,
    ) -> Result<Self> {
        let p = sigma.nrows();
        if !sigma.is_square() {
            return Err(Error::DimensionMismatch {
                expected: p,
                actual: sigma.ncols(),
            });
        }
        for v in [&mu_n, &mu_0] {
            if v.len() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    actual: v.len(),
                });
            }
        }
        if !(gamma >= 0.0) {
            return Err(Error::UnsupportedGamma(gamma));
        }
        let sigma_factor = spd_factor(&sigma)?;
        let eig = SymmetricEigen::new(sigma.clone());
        let lambda_min = eig.eigenvalues.min();
        let lambda_max = eig.eigenvalues.max();
        if lambda_min < LAMBDA_FLOOR {
            return Err(Error::NotPositiveDefinite);
        }
        let roots = eig.eigenvalues.map(f64::sqrt);
        let mut sigma_sqrt =
            &eig.eigenvectors * DenseMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose();
        symmetrize(&mut sigma_sqrt);
        let scale = (p as f64).powf(-gamma);
        let m_lower = scale * mu_n.norm_squared();
        let m_target = scale * mu_0.norm_squared();
        let report = ValidationReport {
            lambda_min,
            lambda_max,
            m_lower,
            m_target,
            m_upper: m_lower.max(m_target),
        };
        Ok(PopulationSpec {
            p,
            gamma,
            mu_n,
            mu_0,
            sigma,
            sigma_sqrt,
            sigma_factor,
            report,
        })
    }

    /// Draws a population from a recipe: covariance first, then the means.
    pub fn draw<R: Rng + ?Sized>(
        p: usize,
        gamma: f64,
        recipe: &EigenRecipe,
        pattern: SignPattern,
        rng: &mut R,
    ) -> Result<Self> {
        let sigma = build_covariance(recipe, p, rng)?;
        let (mu_n, mu_0) = draw_mean_vectors_with(gamma, p, pattern, rng)?;
        PopulationSpec::new(gamma, mu_n, mu_0, sigma)
    }

    pub fn from_config(config: &PopulationConfig) -> Result<Self> {
        let mut rng = substream(config.seed, 0);
        PopulationSpec::draw(
            config.p,
            config.gamma,
            &config.recipe(),
            config.sign_pattern,
            &mut rng,
        )
    }

    /// Same population with a different target vector.
    pub fn with_target(&self, mu_0: DenseVector) -> Result<Self> {
        if mu_0.len() != self.p {
            return Err(Error::DimensionMismatch {
                expected: self.p,
                actual: mu_0.len(),
            });
        }
        let mut out = self.clone();
        let scale = (self.p as f64).powf(-self.gamma);
        out.report.m_target = scale * mu_0.norm_squared();
        out.report.m_upper = out.report.m_lower.max(out.report.m_target);
        out.mu_0 = mu_0;
        Ok(out)
    }

    pub fn validation(&self) -> &ValidationReport {
        &self.report
    }

    pub fn sigma_sqrt(&self) -> &DenseMatrix {
        &self.sigma_sqrt
    }

    pub fn sigma_factor(&self) -> &SpdFactor {
        &self.sigma_factor
    }
}

/// `Y = Sigma^{1/2} X + mu_n 1^T` for `n` observations.
pub fn generate_sample<R: Rng + ?Sized>(
    pop: &PopulationSpec,
    n: usize,
    law: InnovationLaw,
    rng: &mut R,
) -> Result<DenseMatrix> {
    if n < 2 {
        return Err(Error::InvalidDimensions(format!(
            "need at least two observations, got {n}"
        )));
    }
    let x = law.sample_matrix(pop.p, n, rng)?;
    let mut y = pop.sigma_sqrt() * x;
    for mut col in y.column_iter_mut() {
        col += &pop.mu_n;
    }
    Ok(y)
}

/// Inverse or pseudo-inverse of the sample covariance matrix.
#[derive(Debug, Clone)]
pub enum SampleInverse {
    /// `p < n`: Cholesky factor of `S`.
    Inverse(SpdFactor),
    /// `p > n`: Moore-Penrose pseudo-inverse of `S`.
    Pseudo(PseudoInverseResult),
}

impl SampleInverse {
    pub fn is_pseudo(&self) -> bool {
        matches!(self, SampleInverse::Pseudo(_))
    }

    /// `S^{-1} v` or `S^+ v`.
    pub fn apply(&self, v: &DenseVector) -> DenseVector {
        match self {
            SampleInverse::Inverse(f) => f.solve_vec(v),
            SampleInverse::Pseudo(r) => &r.pinv * v,
        }
    }

    /// The three forms `(u' S u, u' S v, v' S v)` with `S` replaced by the
    /// (pseudo-)inverse.
    pub fn forms(&self, u: &DenseVector, v: &DenseVector) -> (f64, f64, f64) {
        match self {
            SampleInverse::Inverse(f) => {
                let wu = f.whiten(u);
                let wv = f.whiten(v);
                (wu.dot(&wu), wu.dot(&wv), wv.dot(&wv))
            }
            SampleInverse::Pseudo(r) => {
                let au = &r.pinv * u;
                let av = &r.pinv * v;
                (u.dot(&au), v.dot(&au), v.dot(&av))
            }
        }
    }

    /// Dense (pseudo-)inverse.
    pub fn matrix(&self) -> DenseMatrix {
        match self {
            SampleInverse::Inverse(f) => f.inverse(),
            SampleInverse::Pseudo(r) => r.pinv.clone(),
        }
    }
}

/// Sample mean and covariance of one data set, with a lazily computed
/// (pseudo-)inverse shared by all estimators evaluated on it.
#[derive(Debug, Clone)]
pub struct SampleStats {
    pub y_bar: DenseVector,
    /// `n^{-1} Y Y^T - y_bar y_bar^T`.
    pub s: DenseMatrix,
    pub p: usize,
    pub n: usize,
    /// Centered data `Y - y_bar 1^T`, kept only when `p >= n`.
    centered: Option<DenseMatrix>,
    inverse: OnceLock<Result<SampleInverse>>,
}

impl SampleStats {
    pub fn from_parts(y_bar: DenseVector, s: DenseMatrix, n: usize) -> Result<Self> {
        let p = y_bar.len();
        if s.nrows() != p || s.ncols() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                actual: s.nrows(),
            });
        }
        if n < 2 {
            return Err(Error::InvalidDimensions(format!(
                "need at least two observations, got {n}"
            )));
        }
        Ok(SampleStats {
            y_bar,
            s,
            p,
            n,
            centered: None,
            inverse: OnceLock::new(),
        })
    }

    /// `p / n`.
    pub fn c_hat(&self) -> f64 {
        self.p as f64 / self.n as f64
    }

    /// Centered scatter matrix `n S = sum_k (y_k - y_bar)(y_k - y_bar)^T`.
    pub fn scatter(&self) -> DenseMatrix {
        &self.s * self.n as f64
    }

    /// `S^{-1}` when `p < n`, `S^+` when `p > n`.
    pub fn inverse(&self) -> Result<&SampleInverse> {
        self.inverse
            .get_or_init(|| self.compute_inverse())
            .as_ref()
            .map_err(Clone::clone)
    }

    fn compute_inverse(&self) -> Result<SampleInverse> {
        use std::cmp::Ordering;
        match self.p.cmp(&self.n) {
            Ordering::Less => spd_factor(&self.s)
                .map(SampleInverse::Inverse)
                .map_err(|e| match e {
                    Error::NotPositiveDefinite => Error::SingularSample,
                    other => other,
                }),
            Ordering::Equal => Err(Error::EqualDimensions(self.p)),
            Ordering::Greater => {
                let r = match &self.centered {
                    Some(b) => outer_product_pseudo_inverse(b, 1.0 / self.n as f64, DEFAULT_PINV_TOL),
                    None => crate::linalg::pseudo_inverse(&self.s, DEFAULT_PINV_TOL),
                };
                Ok(SampleInverse::Pseudo(r))
            }
        }
    }
}

/// Row means and divisor-`n` covariance of a `p x n` data matrix.
pub fn sample_stats(y: &DenseMatrix) -> Result<SampleStats> {
    let (p, n) = y.shape();
    if n < 2 {
        return Err(Error::InvalidDimensions(format!(
            "need at least two observations, got {n}"
        )));
    }
    let y_bar = y.column_mean();
    let mut s = (y * y.transpose()) / n as f64;
    s.ger(-1.0, &y_bar, &y_bar, 1.0);
    symmetrize(&mut s);
    let mut stats = SampleStats::from_parts(y_bar, s, n)?;
    if p >= n {
        let mut b = y.clone();
        for mut col in b.column_iter_mut() {
            col -= &stats.y_bar;
        }
        stats.centered = Some(b);
    }
    Ok(stats)
}

fn default_gamma() -> f64 {
    0.0
}

/// Population section of a configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationConfig {
    pub p: usize,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    /// `(fraction, eigenvalue)` pairs.
    #[serde(default = "default_proportions")]
    pub eigen_recipe: Vec<(f64, f64)>,
    #[serde(default)]
    pub lambda_max: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub law: InnovationLaw,
    #[serde(default)]
    pub sign_pattern: SignPattern,
}

fn default_proportions() -> Vec<(f64, f64)> {
    EigenRecipe::standard().proportions
}

impl PopulationConfig {
    pub fn recipe(&self) -> EigenRecipe {
        EigenRecipe {
            proportions: self.eigen_recipe.clone(),
            override_lambda_max: self.lambda_max,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding::substream;
    use approx::assert_abs_diff_eq;

    fn sorted_eigenvalues(a: &DenseMatrix) -> Vec<f64> {
        let mut v: Vec<f64> = SymmetricEigen::new(a.clone()).eigenvalues.iter().copied().collect();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v
    }

    #[test]
    fn standard_recipe_counts_for_p10() {
        let mut rng = substream(1, 0);
        let sigma = build_covariance(&EigenRecipe::standard(), 10, &mut rng).unwrap();
        let got = sorted_eigenvalues(&sigma);
        let want = [1.0, 1.0, 3.0, 3.0, 3.0, 3.0, 10.0, 10.0, 10.0, 10.0];
        for (g, w) in got.iter().zip(want) {
            assert_abs_diff_eq!(*g, w, epsilon = 1e-8);
        }
        assert_eq!(sigma, sigma.transpose());
    }

    #[test]
    fn remainder_goes_to_last_group() {
        let v = EigenRecipe::standard().eigenvalues(7).unwrap();
        assert_eq!(v, vec![1.0, 3.0, 3.0, 10.0, 10.0, 10.0, 10.0]);
    }

    #[test]
    fn isotropic_recipe_gives_identity() {
        let mut rng = substream(2, 0);
        let sigma = build_covariance(&EigenRecipe::isotropic(), 12, &mut rng).unwrap();
        assert!((sigma - DenseMatrix::identity(12, 12)).amax() < 1e-12);
    }

    #[test]
    fn override_replaces_largest_eigenvalue() {
        let mut rng = substream(3, 0);
        let recipe = EigenRecipe::standard().with_lambda_max(50.0);
        let sigma = build_covariance(&recipe, 50, &mut rng).unwrap();
        let ev = sorted_eigenvalues(&sigma);
        assert_abs_diff_eq!(ev[49], 50.0, epsilon = 1e-8);
        assert_abs_diff_eq!(ev[48], 10.0, epsilon = 1e-8);
    }

    #[test]
    fn bad_recipes_are_rejected() {
        let bad = EigenRecipe {
            proportions: vec![(0.5, 1.0), (0.4, 2.0)],
            override_lambda_max: None,
        };
        let mut rng = substream(4, 0);
        assert!(matches!(
            build_covariance(&bad, 10, &mut rng),
            Err(Error::InvalidRecipe(_))
        ));
        let negative = EigenRecipe {
            proportions: vec![(1.0, -1.0)],
            override_lambda_max: None,
        };
        assert!(matches!(negative.validate(), Err(Error::InvalidRecipe(_))));
    }

    #[test]
    fn mean_vectors_respect_supports() {
        let mut rng = substream(5, 0);
        let (mu_n, mu_0) = draw_mean_vectors(0.0, 100, &mut rng).unwrap();
        assert!(mu_n.amax() <= 0.1 && mu_0.amax() <= 0.1);
        assert!(mu_n.norm_squared() <= 1.0);
        let (mu_n, mu_0) = draw_mean_vectors(1.0, 8, &mut rng).unwrap();
        assert!(mu_0.iter().all(|&v| v == 1.0));
        assert!(mu_n.iter().all(|&v| v == 1.0 || v == -1.0));
        let (alt, _) = draw_mean_vectors_with(1.0, 4, SignPattern::Alternating, &mut rng).unwrap();
        assert_eq!(alt.as_slice(), &[1.0, -1.0, 1.0, -1.0]);
        assert_eq!(
            draw_mean_vectors(0.5, 8, &mut rng).unwrap_err(),
            Error::UnsupportedGamma(0.5)
        );
    }

    #[test]
    fn constant_columns_have_zero_covariance() {
        let mu = DenseVector::from_vec(vec![1.0, -2.0, 3.0]);
        let y = DenseMatrix::from_fn(3, 6, |i, _| mu[i]);
        let st = sample_stats(&y).unwrap();
        assert!((&st.y_bar - &mu).amax() < 1e-15);
        assert!(st.s.amax() < 1e-14);
    }

    #[test]
    fn two_point_sample() {
        let y = DenseMatrix::from_row_slice(1, 2, &[1.0, -1.0]);
        let st = sample_stats(&y).unwrap();
        assert_eq!(st.y_bar[0], 0.0);
        assert_eq!(st.s[(0, 0)], 1.0);
    }

    #[test]
    fn covariance_matches_two_pass_formula() {
        let mut rng = substream(6, 0);
        let y = InnovationLaw::StandardNormal
            .sample_matrix(4, 50, &mut rng)
            .unwrap()
            .map(|v| 3.0 * v + 1.5);
        let st = sample_stats(&y).unwrap();
        let mean = y.column_mean();
        let mut two_pass = DenseMatrix::zeros(4, 4);
        for k in 0..50 {
            let d = y.column(k) - &mean;
            two_pass += &d * d.transpose();
        }
        two_pass /= 50.0;
        assert!((&st.s - two_pass).amax() < 1e-10);
    }

    #[test]
    fn sample_inverse_branches() {
        let mut rng = substream(7, 0);
        let y = InnovationLaw::StandardNormal.sample_matrix(5, 20, &mut rng).unwrap();
        let st = sample_stats(&y).unwrap();
        let inv = st.inverse().unwrap();
        assert!(!inv.is_pseudo());
        assert!((&st.s * inv.matrix() - DenseMatrix::identity(5, 5)).amax() < 1e-10);

        let wide = InnovationLaw::StandardNormal.sample_matrix(12, 6, &mut rng).unwrap();
        let st = sample_stats(&wide).unwrap();
        let inv = st.inverse().unwrap();
        assert!(inv.is_pseudo());
        let direct = crate::linalg::pseudo_inverse(&st.s, DEFAULT_PINV_TOL).pinv;
        assert!((inv.matrix() - direct).amax() < 1e-8);

        let square = InnovationLaw::StandardNormal.sample_matrix(4, 4, &mut rng).unwrap();
        let st = sample_stats(&square).unwrap();
        assert_eq!(st.inverse().unwrap_err(), Error::EqualDimensions(4));
    }

    #[test]
    fn scaled_t_and_exponential_are_standardized() {
        let mut rng = substream(8, 0);
        for law in [
            InnovationLaw::ScaledT { df: 8.0 },
            InnovationLaw::ShiftedExponential,
        ] {
            let x = law.sample_matrix(1, 200_000, &mut rng).unwrap();
            let mean = x.mean();
            let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / x.len() as f64;
            assert!(mean.abs() < 0.02, "{law}: mean {mean}");
            assert!((var - 1.0).abs() < 0.05, "{law}: var {var}");
        }
        assert!(InnovationLaw::ScaledT { df: 4.0 }.validate().is_err());
    }

    #[test]
    fn law_strings_round_trip() {
        for law in [
            InnovationLaw::StandardNormal,
            InnovationLaw::ScaledT { df: 6.0 },
            InnovationLaw::ShiftedExponential,
        ] {
            assert_eq!(law.to_string().parse::<InnovationLaw>().unwrap(), law);
        }
        assert!("cauchy".parse::<InnovationLaw>().is_err());
    }

    #[test]
    fn population_config_from_toml() {
        let cfg = PopulationConfig::from_toml(
            "p = 10\ngamma = 1.0\nseed = 9\nlaw = \"t:6\"\neigen_recipe = [[0.5, 1.0], [0.5, 2.0]]\n",
        )
        .unwrap();
        assert_eq!(cfg.law, InnovationLaw::ScaledT { df: 6.0 });
        let pop = PopulationSpec::from_config(&cfg).unwrap();
        assert_eq!(pop.p, 10);
        assert!(pop.validation().eigenvalues_bounded_below());
        assert_abs_diff_eq!(pop.validation().m_lower, 1.0, epsilon = 1e-12);
        assert!(PopulationConfig::from_toml("p = 10\nbogus = 1\n").is_err());
    }
}
