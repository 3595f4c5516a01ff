//! Dense symmetric linear algebra.
//!
//! Cholesky factorization and solves, the symmetric square root, the
//! Moore-Penrose pseudo-inverse (general, symmetric and low-rank Gram
//! routes) and Haar-distributed orthogonal matrices. Heavy lifting is
//! delegated to `nalgebra`; this module owns the tolerances and error
//! contracts.

use nalgebra::{DMatrix, DVector, SymmetricEigen, QR};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type DenseMatrix = DMatrix<f64>;
pub type DenseVector = DVector<f64>;

/// Relative singular-value cutoff used when no tolerance is given.
pub const DEFAULT_PINV_TOL: f64 = 1e-10;

const SYMMETRY_TOL: f64 = 1e-12;

/// Largest absolute asymmetry `max |a_ij - a_ji|`.
pub fn asymmetry(a: &DenseMatrix) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0f64;
    for j in 0..n {
        for i in (j + 1)..n {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    worst
}

fn max_abs(a: &DenseMatrix) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

fn check_symmetric(a: &DenseMatrix) -> Result<()> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            actual: a.ncols(),
        });
    }
    let asym = asymmetry(a);
    if asym > SYMMETRY_TOL * max_abs(a).max(1.0) {
        return Err(Error::NotSymmetric(asym));
    }
    Ok(())
}

/// Replace `a` by `(a + a^T) / 2` so that it is exactly symmetric.
pub fn symmetrize(a: &mut DenseMatrix) {
    let n = a.nrows();
    for j in 0..n {
        for i in (j + 1)..n {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
}

/// Lower-triangular Cholesky factor `L` with `L L^T = A`.
#[derive(Debug, Clone)]
pub struct SpdFactor {
    lower: DenseMatrix,
}

impl SpdFactor {
    pub fn dim(&self) -> usize {
        self.lower.nrows()
    }

    pub fn lower(&self) -> &DenseMatrix {
        &self.lower
    }

    /// `L L^T`.
    pub fn reconstruct(&self) -> DenseMatrix {
        &self.lower * self.lower.transpose()
    }

    /// `L^{-1} v`. Inner products of whitened vectors are `A^{-1}` forms.
    pub fn whiten(&self, v: &DenseVector) -> DenseVector {
        self.lower
            .solve_lower_triangular(v)
            .expect("Cholesky factor has a positive diagonal")
    }

    /// `u^T A^{-1} v`.
    pub fn inverse_form(&self, u: &DenseVector, v: &DenseVector) -> f64 {
        self.whiten(u).dot(&self.whiten(v))
    }

    /// `A^{-1} v`.
    pub fn solve_vec(&self, v: &DenseVector) -> DenseVector {
        let y = self.whiten(v);
        self.lower
            .tr_solve_lower_triangular(&y)
            .expect("Cholesky factor has a positive diagonal")
    }

    /// Explicit `A^{-1}`.
    pub fn inverse(&self) -> DenseMatrix {
        let eye = DenseMatrix::identity(self.dim(), self.dim());
        let mut inv = spd_solve(self, &eye).expect("dimensions agree");
        symmetrize(&mut inv);
        inv
    }
}

/// Cholesky factorization of a symmetric positive definite matrix.
///
/// Fails with [`Error::NotPositiveDefinite`] when any pivot is at or below
/// `dim * eps * max_diag`.
pub fn spd_factor(a: &DenseMatrix) -> Result<SpdFactor> {
    check_symmetric(a)?;
    let dim = a.nrows();
    let max_diag = a.diagonal().iter().fold(0.0f64, |m, v| m.max(*v));
    if dim == 0 || max_diag <= 0.0 || !a.iter().all(|v| v.is_finite()) {
        return Err(Error::NotPositiveDefinite);
    }
    let chol = nalgebra::Cholesky::new(a.clone()).ok_or(Error::NotPositiveDefinite)?;
    let lower = chol.unpack();
    let threshold = dim as f64 * f64::EPSILON * max_diag;
    if lower.diagonal().iter().any(|l| l * l <= threshold) {
        return Err(Error::NotPositiveDefinite);
    }
    Ok(SpdFactor { lower })
}

/// Solve `A X = B` given the factor of `A`.
pub fn spd_solve(f: &SpdFactor, b: &DenseMatrix) -> Result<DenseMatrix> {
    if b.nrows() != f.dim() {
        return Err(Error::DimensionMismatch {
            expected: f.dim(),
            actual: b.nrows(),
        });
    }
    let y = f
        .lower
        .solve_lower_triangular(b)
        .expect("Cholesky factor has a positive diagonal");
    Ok(f
        .lower
        .tr_solve_lower_triangular(&y)
        .expect("Cholesky factor has a positive diagonal"))
}

/// Unique symmetric positive definite square root, via eigendecomposition.
pub fn sym_sqrt(a: &DenseMatrix) -> Result<DenseMatrix> {
    check_symmetric(a)?;
    let dim = a.nrows();
    let eig = SymmetricEigen::new(a.clone());
    let max = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(*v));
    let min = eig.eigenvalues.iter().fold(f64::INFINITY, |m, v| m.min(*v));
    if !(max > 0.0) || min <= dim as f64 * f64::EPSILON * max {
        return Err(Error::NotPositiveDefinite);
    }
    let roots = eig.eigenvalues.map(f64::sqrt);
    let scaled = &eig.eigenvectors * DenseMatrix::from_diagonal(&roots);
    let mut b = scaled * eig.eigenvectors.transpose();
    symmetrize(&mut b);
    Ok(b)
}

/// Output of [`pseudo_inverse`].
#[derive(Debug, Clone)]
pub struct PseudoInverseResult {
    pub pinv: DenseMatrix,
    pub rank: usize,
    /// Absolute cutoff actually applied (`rel_tol * sigma_max`).
    pub tolerance: f64,
}

/// Moore-Penrose pseudo-inverse.
///
/// Singular values below `rel_tol * sigma_max` are treated as zero. Symmetric
/// input goes through a symmetric eigendecomposition, anything else through
/// the eigendecomposition of its symmetric augmentation. A zero matrix yields
/// a zero pseudo-inverse of rank 0.
pub fn pseudo_inverse(a: &DenseMatrix, rel_tol: f64) -> PseudoInverseResult {
    assert!(
        rel_tol > 0.0 && rel_tol < 1.0,
        "relative tolerance must lie in (0, 1)"
    );
    let symmetric =
        a.is_square() && asymmetry(a) <= SYMMETRY_TOL * max_abs(a).max(f64::MIN_POSITIVE);
    if symmetric {
        symmetric_pseudo_inverse(a, rel_tol)
    } else {
        augmented_pseudo_inverse(a, rel_tol)
    }
}

fn symmetric_pseudo_inverse(a: &DenseMatrix, rel_tol: f64) -> PseudoInverseResult {
    let n = a.nrows();
    let eig = SymmetricEigen::new(a.clone());
    let sigma_max = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tolerance = rel_tol * sigma_max;
    let mut pinv = DenseMatrix::zeros(n, n);
    let mut rank = 0;
    if sigma_max > 0.0 {
        for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
            if lambda.abs() > tolerance {
                rank += 1;
                let v = eig.eigenvectors.column(k);
                pinv.ger(1.0 / lambda, &v, &v, 1.0);
            }
        }
    }
    symmetrize(&mut pinv);
    PseudoInverseResult {
        pinv,
        rank,
        tolerance,
    }
}

/// General pseudo-inverse from the symmetric eigendecomposition of
/// `H = [[0, A], [A^T, 0]]`, whose eigenvalues are `+-sigma_k` with
/// eigenvectors `(u_k, +-v_k) / sqrt(2)`. This avoids the bidiagonal SVD,
/// which misbehaves on some rank-deficient inputs.
fn augmented_pseudo_inverse(a: &DenseMatrix, rel_tol: f64) -> PseudoInverseResult {
    let (m, n) = a.shape();
    let mut h = DenseMatrix::zeros(m + n, m + n);
    h.view_mut((0, m), (m, n)).copy_from(a);
    h.view_mut((m, 0), (n, m)).copy_from(&a.transpose());
    let eig = SymmetricEigen::new(h);
    let sigma_max = eig.eigenvalues.iter().fold(0.0f64, |mx, v| mx.max(v.abs()));
    let tolerance = rel_tol * sigma_max;
    let mut pinv = DenseMatrix::zeros(n, m);
    let mut rank = 0;
    if sigma_max > 0.0 {
        for (k, &sigma) in eig.eigenvalues.iter().enumerate() {
            if sigma > tolerance {
                rank += 1;
                let w = eig.eigenvectors.column(k);
                pinv.ger(2.0 / sigma, &w.rows(m, n), &w.rows(0, m), 1.0);
            }
        }
    }
    PseudoInverseResult {
        pinv,
        rank,
        tolerance,
    }
}

/// Pseudo-inverse of `scale * B B^T` for a tall-and-thin or short `B`
/// (p x n), computed from the n x n Gram matrix `B^T B`.
///
/// With `B^T B = V L V^T`, `(B B^T)^+ = B V L^{-2} V^T B^T`, so the cost is
/// O(p n^2 + p^2 r) instead of an O(p^3) eigendecomposition. The cutoff is
/// relative to the largest eigenvalue, matching [`pseudo_inverse`] applied to
/// the p x p product.
pub fn outer_product_pseudo_inverse(
    b: &DenseMatrix,
    scale: f64,
    rel_tol: f64,
) -> PseudoInverseResult {
    assert!(scale > 0.0, "scale must be positive");
    let p = b.nrows();
    let mut gram = b.transpose() * b;
    symmetrize(&mut gram);
    let eig = SymmetricEigen::new(gram);
    let lambda_max = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(*v));
    let cutoff = rel_tol * lambda_max;
    let kept: Vec<usize> = if lambda_max > 0.0 {
        (0..eig.eigenvalues.len())
            .filter(|&k| eig.eigenvalues[k] > cutoff)
            .collect()
    } else {
        Vec::new()
    };
    let rank = kept.len();
    let mut w = DenseMatrix::zeros(p, rank);
    for (col, &k) in kept.iter().enumerate() {
        let v = eig.eigenvectors.column(k);
        let mut target = w.column_mut(col);
        target.gemv(1.0 / eig.eigenvalues[k], b, &v, 0.0);
    }
    let mut pinv = (&w * w.transpose()) / scale;
    symmetrize(&mut pinv);
    PseudoInverseResult {
        pinv,
        rank,
        tolerance: scale * cutoff,
    }
}

/// Frobenius residuals of the four Penrose conditions, in the order
/// `A A+ A = A`, `A+ A A+ = A+`, `(A A+)^T = A A+`, `(A+ A)^T = A+ A`.
pub fn penrose_residuals(a: &DenseMatrix, pinv: &DenseMatrix) -> [f64; 4] {
    let a_ap = a * pinv;
    let ap_a = pinv * a;
    [
        (&a_ap * a - a).norm(),
        (&ap_a * pinv - pinv).norm(),
        (a_ap.transpose() - &a_ap).norm(),
        (ap_a.transpose() - &ap_a).norm(),
    ]
}

/// p x p matrix of i.i.d. standard normal draws, filled column by column.
pub fn standard_normal_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DenseMatrix {
    DenseMatrix::from_iterator(
        rows,
        cols,
        (0..rows * cols).map(|_| rng.sample::<f64, _>(StandardNormal)),
    )
}

/// Haar-distributed orthogonal matrix from the QR decomposition of a
/// standard Gaussian matrix, with the columns of Q flipped so that R has a
/// positive diagonal.
pub fn haar_orthogonal<R: Rng + ?Sized>(p: usize, rng: &mut R) -> DenseMatrix {
    assert!(p >= 1, "dimension must be positive");
    let g = standard_normal_matrix(p, p, rng);
    let qr = QR::new(g);
    let r_diag = qr.r().diagonal();
    let mut q = qr.q();
    for (j, r) in r_diag.iter().enumerate() {
        if *r < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_spd(n: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
        let g = standard_normal_matrix(n, n, rng);
        let mut a = &g * g.transpose() + DenseMatrix::identity(n, n) * (n as f64) * 0.1;
        symmetrize(&mut a);
        a
    }

    fn random_low_rank_psd(n: usize, rank: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
        let g = standard_normal_matrix(n, rank, rng);
        let mut a = &g * g.transpose();
        symmetrize(&mut a);
        a
    }

    #[test]
    fn factor_of_identity_is_identity() {
        let f = spd_factor(&DenseMatrix::identity(3, 3)).unwrap();
        assert_eq!(f.lower(), &DenseMatrix::identity(3, 3));
    }

    #[test]
    fn factor_of_diagonal() {
        let a = DenseMatrix::from_diagonal(&DenseVector::from_vec(vec![4.0, 9.0]));
        let f = spd_factor(&a).unwrap();
        assert_relative_eq!(f.lower()[(0, 0)], 2.0);
        assert_relative_eq!(f.lower()[(1, 1)], 3.0);
        assert_eq!(f.lower()[(1, 0)], 0.0);
    }

    #[test]
    fn factor_reconstructs_two_by_two() {
        let a = DenseMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let f = spd_factor(&a).unwrap();
        assert!((f.reconstruct() - &a).norm() < 1e-12);
        assert!(f.lower().diagonal().iter().all(|v| *v > 0.0));
    }

    #[test]
    fn factor_rejects_indefinite_and_singular() {
        let indefinite = DenseMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert_eq!(spd_factor(&indefinite).unwrap_err(), Error::NotPositiveDefinite);
        let singular = DenseMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert_eq!(spd_factor(&singular).unwrap_err(), Error::NotPositiveDefinite);
        let asym = DenseMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.0, 2.0]);
        assert!(matches!(spd_factor(&asym), Err(Error::NotSymmetric(_))));
    }

    #[test]
    fn solve_trivial_systems() {
        let f = spd_factor(&DenseMatrix::identity(2, 2)).unwrap();
        let b = DenseMatrix::from_row_slice(2, 1, &[3.0, -1.0]);
        assert_eq!(spd_solve(&f, &b).unwrap(), b);

        let f = spd_factor(&(DenseMatrix::identity(2, 2) * 2.0)).unwrap();
        let b = DenseMatrix::from_row_slice(2, 1, &[2.0, 4.0]);
        let x = spd_solve(&f, &b).unwrap();
        assert_relative_eq!(x[(0, 0)], 1.0, epsilon = 1e-15);
        assert_relative_eq!(x[(1, 0)], 2.0, epsilon = 1e-15);

        let wrong = DenseMatrix::zeros(3, 1);
        assert_eq!(
            spd_solve(&f, &wrong).unwrap_err(),
            Error::DimensionMismatch {
                expected: 2,
                actual: 3
            }
        );
    }

    #[test]
    fn solve_random_six_by_six_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let a = random_spd(6, &mut rng);
        let b = standard_normal_matrix(6, 2, &mut rng);
        let x = spd_solve(&spd_factor(&a).unwrap(), &b).unwrap();
        assert!((&a * &x - &b).norm() / b.norm() < 1e-9);
    }

    #[test]
    fn sqrt_examples() {
        assert!((sym_sqrt(&DenseMatrix::identity(4, 4)).unwrap() - DenseMatrix::identity(4, 4)).norm() < 1e-14);
        let a = DenseMatrix::from_diagonal(&DenseVector::from_vec(vec![4.0, 16.0]));
        let b = sym_sqrt(&a).unwrap();
        assert_relative_eq!(b[(0, 0)], 2.0, epsilon = 1e-14);
        assert_relative_eq!(b[(1, 1)], 4.0, epsilon = 1e-14);

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_spd(5, &mut rng);
        let b = sym_sqrt(&a).unwrap();
        assert_eq!(asymmetry(&b), 0.0);
        assert!((&b * &b - &a).norm() / a.norm() < 1e-10);
        let eig = SymmetricEigen::new(b);
        assert!(eig.eigenvalues.iter().all(|v| *v >= -1e-10));
    }

    #[test]
    fn pinv_examples() {
        let r = pseudo_inverse(&DenseMatrix::identity(3, 3), DEFAULT_PINV_TOL);
        assert_eq!(r.rank, 3);
        assert!((r.pinv - DenseMatrix::identity(3, 3)).norm() < 1e-14);

        let a = DenseMatrix::from_diagonal(&DenseVector::from_vec(vec![2.0, 0.0]));
        let r = pseudo_inverse(&a, DEFAULT_PINV_TOL);
        assert_eq!(r.rank, 1);
        assert_relative_eq!(r.pinv[(0, 0)], 0.5, epsilon = 1e-15);
        assert_eq!(r.pinv[(1, 1)], 0.0);

        let zero = pseudo_inverse(&DenseMatrix::zeros(3, 2), DEFAULT_PINV_TOL);
        assert_eq!(zero.rank, 0);
        assert_eq!(zero.pinv.shape(), (2, 3));
        assert_eq!(zero.pinv.norm(), 0.0);
    }

    #[test]
    fn pinv_penrose_on_rank_two_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let a = random_low_rank_psd(4, 2, &mut rng);
        let r = pseudo_inverse(&a, DEFAULT_PINV_TOL);
        assert_eq!(r.rank, 2);
        for res in penrose_residuals(&a, &r.pinv) {
            assert!(res <= 1e-8, "residual {res}");
        }
    }

    #[test]
    fn pinv_of_rectangular_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let a = standard_normal_matrix(5, 3, &mut rng);
        let r = pseudo_inverse(&a, DEFAULT_PINV_TOL);
        assert_eq!(r.pinv.shape(), (3, 5));
        assert_eq!(r.rank, 3);
        for res in penrose_residuals(&a, &r.pinv) {
            assert!(res <= 1e-8, "residual {res}");
        }
    }

    #[test]
    fn gram_route_matches_direct_pinv() {
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let b = standard_normal_matrix(12, 5, &mut rng);
        let direct = pseudo_inverse(&((&b * b.transpose()) / 5.0), DEFAULT_PINV_TOL);
        let gram = outer_product_pseudo_inverse(&b, 1.0 / 5.0, DEFAULT_PINV_TOL);
        assert_eq!(gram.rank, 5);
        assert_eq!(direct.rank, 5);
        assert!((&gram.pinv - &direct.pinv).norm() / direct.pinv.norm() < 1e-9);
    }

    #[test]
    fn haar_examples() {
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let q = haar_orthogonal(1, &mut rng);
            assert_relative_eq!(q[(0, 0)].abs(), 1.0, epsilon = 1e-15);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let q = haar_orthogonal(4, &mut rng);
        assert!((q.transpose() * &q - DenseMatrix::identity(4, 4)).norm() < 1e-10);
    }

    #[test]
    fn haar_is_deterministic_per_seed() {
        let a = haar_orthogonal(5, &mut ChaCha8Rng::seed_from_u64(9));
        let b = haar_orthogonal(5, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
    }

    #[test]
    fn haar_first_coordinate_has_zero_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let draws = 10_000;
        let p = 3;
        let mean = (0..draws)
            .map(|_| haar_orthogonal(p, &mut rng)[(0, 0)])
            .sum::<f64>()
            / draws as f64;
        // Var of a single coordinate of a uniform unit vector is 1/p.
        assert!(mean.abs() < 3.0 / (draws as f64).sqrt(), "mean {mean}");
    }

    #[test]
    fn haar_invariant_under_fixed_rotation() {
        // Q and R0 Q share the law, so E[(R0 Q)_{00}^2] = E[Q_{00}^2] = 1/p.
        let p = 3;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let r0 = haar_orthogonal(p, &mut ChaCha8Rng::seed_from_u64(999));
        let draws = 10_000;
        let (mut plain, mut rotated) = (0.0, 0.0);
        for _ in 0..draws {
            let q = haar_orthogonal(p, &mut rng);
            plain += q[(0, 0)].powi(2);
            rotated += (&r0 * &q)[(0, 0)].powi(2);
        }
        let target = 1.0 / p as f64;
        // sd of x^2 for one coordinate is below 0.3 for p = 3
        let band = 4.0 * 0.3 / (draws as f64).sqrt();
        assert!((plain / draws as f64 - target).abs() < band);
        assert!((rotated / draws as f64 - target).abs() < band);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]

            #[test]
            fn solve_recovers_x(seed in any::<u64>(), n in 1usize..9) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let a = random_spd(n, &mut rng);
                let x = standard_normal_matrix(n, 1, &mut rng);
                let f = spd_factor(&a).unwrap();
                let got = spd_solve(&f, &(&a * &x)).unwrap();
                prop_assert!((got - &x).norm() / x.norm().max(1e-300) < 1e-9);
            }

            #[test]
            fn pinv_of_nonsingular_is_inverse(seed in any::<u64>(), n in 1usize..8) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let a = standard_normal_matrix(n, n, &mut rng) + DenseMatrix::identity(n, n) * 3.0;
                let inv = a.clone().try_inverse().unwrap();
                let r = pseudo_inverse(&a, DEFAULT_PINV_TOL);
                prop_assert!((r.pinv - inv).norm() < 1e-8);
            }

            #[test]
            fn haar_determinant_is_unit(seed in any::<u64>(), n in 1usize..9) {
                let q = haar_orthogonal(n, &mut ChaCha8Rng::seed_from_u64(seed));
                prop_assert!((q.determinant().abs() - 1.0).abs() < 1e-8);
            }

            #[test]
            fn sqrt_is_symmetric_psd(seed in any::<u64>(), n in 1usize..8) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let a = random_spd(n, &mut rng);
                let b = sym_sqrt(&a).unwrap();
                prop_assert_eq!(asymmetry(&b), 0.0);
                let eig = SymmetricEigen::new(b);
                prop_assert!(eig.eigenvalues.iter().all(|v| *v >= -1e-10));
            }
        }
    }
}
