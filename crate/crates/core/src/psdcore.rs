//! Positive semi-definite matrix foundations.
//!
//! Everything downstream leans on four facts about symmetric matrices:
//! the Loewner order can be tested through the spectrum of a difference,
//! log-determinants of SPD matrices are cheap and stable through Cholesky,
//! a pair (E ≻ 0, Δ ⪰ 0) can be simultaneously diagonalized by a congruence,
//! and the determinant-ratio function
//! `r(t) = ½·(log|A+B+tΔ| − log|A+tΔ|)` is continuous and monotonically
//! non-increasing on `[0,1]`, so targets in `[r(1), r(0)]` can be bracketed by
//! bisection.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Numerical tolerances shared across the crate.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Tolerance {
    /// Relative eigenvalue slack for PSD membership and Loewner tests.
    pub psd_tol: f64,
    /// Bound on matrix-equation residual norms.
    pub residual_tol: f64,
    /// Bracket width for scalar root finding.
    pub root_tol: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            psd_tol: 1e-9,
            residual_tol: 1e-8,
            root_tol: 1e-10,
        }
    }
}

impl Tolerance {
    pub fn validate(&self) -> Result<()> {
        if self.psd_tol > 0.0 && self.residual_tol > 0.0 && self.root_tol > 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidTolerance)
        }
    }
}

/// Symmetrize: `(M + Mᵀ)/2`.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    0.5 * (m + m.transpose())
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn sym_eigenvalues(m: &DMatrix<f64>) -> DVector<f64> {
    let mut ev = SymmetricEigen::new(symmetrize(m)).eigenvalues;
    ev.as_mut_slice().sort_by(|a, b| a.total_cmp(b));
    ev
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    sym_eigenvalues(m)[0]
}

/// Largest eigenvalue of a symmetric matrix.
pub fn max_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let ev = sym_eigenvalues(m);
    ev[ev.len() - 1]
}

/// Project a symmetric matrix onto the PSD cone by clamping negative
/// eigenvalues to zero. Returns the projection and the Frobenius distance.
pub fn psd_project(m: &DMatrix<f64>) -> (DMatrix<f64>, f64) {
    let eig = SymmetricEigen::new(symmetrize(m));
    let mut clipped = eig.eigenvalues.clone();
    let mut dist_sq = 0.0;
    for v in clipped.iter_mut() {
        if *v < 0.0 {
            dist_sq += *v * *v;
            *v = 0.0;
        }
    }
    let q = &eig.eigenvectors;
    let proj = q * DMatrix::from_diagonal(&clipped) * q.transpose();
    (symmetrize(&proj), dist_sq.sqrt())
}

/// Inverse of a symmetric positive definite matrix via Cholesky.
pub fn spd_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let sym = symmetrize(m);
    match Cholesky::new(sym.clone()) {
        Some(ch) => Ok(symmetrize(&ch.inverse())),
        None => Err(Error::Singular {
            min_eig: min_eigenvalue(&sym),
        }),
    }
}

/// Symmetric positive semi-definite matrix with tolerance-aware checks.
///
/// Construction symmetrizes the input; asymmetry above 1e-12 relative
/// deviation is an error, below is silently repaired. PSD membership uses a
/// relative eigenvalue threshold rather than Cholesky success so boundary
/// matrices (`K = 0`) validate cleanly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsdMatrix {
    mat: DMatrix<f64>,
}

const SYMMETRY_TOL: f64 = 1e-12;

impl PsdMatrix {
    /// Validate and wrap a matrix. Fails if the matrix is not square, has
    /// asymmetry above 1e-12 relative deviation, or has an eigenvalue below
    /// `-psd_tol·(1 + max eigenvalue)`.
    pub fn new(mat: DMatrix<f64>, tol: &Tolerance) -> Result<Self> {
        tol.validate()?;
        if mat.nrows() != mat.ncols() || mat.nrows() == 0 {
            return Err(Error::DimensionMismatch {
                expected: mat.nrows().max(1),
                found: mat.ncols(),
            });
        }
        let scale = mat.amax().max(1.0);
        let asym = (&mat - mat.transpose()).amax() / scale;
        if asym > SYMMETRY_TOL * 2.0 {
            return Err(Error::NotSymmetric { deviation: asym });
        }
        let sym = symmetrize(&mat);
        let ev = sym_eigenvalues(&sym);
        let (min_eig, max_eig) = (ev[0], ev[ev.len() - 1]);
        let slack = tol.psd_tol * (1.0 + max_eig.max(0.0));
        if min_eig < -slack {
            return Err(Error::NotPsd { min_eig, slack });
        }
        Ok(Self { mat: sym })
    }

    /// Wrap without eigenvalue checks; still symmetrizes. For matrices that
    /// are PSD by construction (e.g. `B Bᵀ`, projections).
    pub fn new_unchecked(mat: DMatrix<f64>) -> Self {
        Self {
            mat: symmetrize(&mat),
        }
    }

    /// Zero matrix of the given dimension.
    pub fn zeros(dim: usize) -> Self {
        Self {
            mat: DMatrix::zeros(dim, dim),
        }
    }

    /// Identity matrix of the given dimension.
    pub fn identity(dim: usize) -> Self {
        Self {
            mat: DMatrix::identity(dim, dim),
        }
    }

    /// `c·I`.
    pub fn scaled_identity(dim: usize, c: f64) -> Self {
        Self {
            mat: DMatrix::identity(dim, dim) * c,
        }
    }

    /// 1×1 matrix holding a scalar.
    pub fn from_scalar(v: f64) -> Self {
        Self {
            mat: DMatrix::from_element(1, 1, v),
        }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.mat
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.mat
    }

    /// Smallest eigenvalue.
    pub fn min_eigenvalue(&self) -> f64 {
        min_eigenvalue(&self.mat)
    }

    /// Whether the matrix is strictly positive definite to tolerance:
    /// min eigenvalue > psd_tol·(1 + max eigenvalue).
    pub fn is_strictly_positive(&self, tol: &Tolerance) -> bool {
        let ev = sym_eigenvalues(&self.mat);
        ev[0] > tol.psd_tol * (1.0 + ev[ev.len() - 1].max(0.0))
    }
}

impl std::ops::Add<&PsdMatrix> for &PsdMatrix {
    type Output = PsdMatrix;
    fn add(self, rhs: &PsdMatrix) -> PsdMatrix {
        PsdMatrix::new_unchecked(&self.mat + &rhs.mat)
    }
}

/// Loewner order test: `A ⪯ B` iff the minimum eigenvalue of the
/// symmetrized difference `B − A` is at least `-psd_tol·(1 + max eig)`.
pub fn loewner_leq(a: &PsdMatrix, b: &PsdMatrix, tol: &Tolerance) -> Result<bool> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    let diff = symmetrize(&(b.as_matrix() - a.as_matrix()));
    let ev = sym_eigenvalues(&diff);
    let scale = 1.0 + ev[ev.len() - 1].max(0.0);
    Ok(ev[0] >= -tol.psd_tol * scale)
}

/// Loewner margin: the minimum eigenvalue of `B − A`. Non-negative (to
/// tolerance) exactly when `A ⪯ B`.
pub fn loewner_margin(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    min_eigenvalue(&(b - a))
}

/// Natural-log determinant of a symmetric positive definite matrix via
/// Cholesky. Errors on singular-to-tolerance input.
pub fn logdet(a: &PsdMatrix) -> Result<f64> {
    logdet_mat(a.as_matrix())
}

/// `logdet` on a raw symmetric matrix.
pub fn logdet_mat(a: &DMatrix<f64>) -> Result<f64> {
    let sym = symmetrize(a);
    match Cholesky::new(sym.clone()) {
        Some(ch) => {
            let mut acc = 0.0;
            let l = ch.l_dirty();
            for i in 0..sym.nrows() {
                let d = l[(i, i)];
                if d <= 0.0 || !d.is_finite() {
                    return Err(Error::Singular {
                        min_eig: min_eigenvalue(&sym),
                    });
                }
                acc += d.ln();
            }
            Ok(2.0 * acc)
        }
        None => Err(Error::Singular {
            min_eig: min_eigenvalue(&sym),
        }),
    }
}

/// Self-test of the monotone determinant-ratio inequality
/// `|B|/|A+B| ≤ |B+Δ|/|A+B+Δ|` for `A,B,Δ ⪰ 0` and `A+B ≻ 0`.
/// Always true for valid inputs; exposed as a checkable predicate.
pub fn ratio_monotone_check(
    a: &PsdMatrix,
    b: &PsdMatrix,
    delta: &PsdMatrix,
    tol: &Tolerance,
) -> Result<bool> {
    let n = a.dim();
    if b.dim() != n || delta.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: b.dim().max(delta.dim()),
        });
    }
    let a_plus_b = a + b;
    if !a_plus_b.is_strictly_positive(tol) {
        return Err(Error::NotPsd {
            min_eig: a_plus_b.min_eigenvalue(),
            slack: tol.psd_tol,
        });
    }
    // Determinants of possibly singular PSD matrices: eigenvalue products
    // with negatives (numerical noise) clamped to zero.
    let det_psd = |m: &PsdMatrix| -> f64 {
        sym_eigenvalues(m.as_matrix())
            .iter()
            .map(|v| v.max(0.0))
            .product()
    };
    let lhs = det_psd(b) / det_psd(&a_plus_b);
    let rhs = det_psd(&(b + delta)) / det_psd(&(&a_plus_b + delta));
    Ok(lhs <= rhs + tol.residual_tol * (1.0 + lhs.abs() + rhs.abs()))
}

/// Simultaneous diagonalization of `E ≻ 0` and `Δ ⪰ 0` by congruence:
/// returns a non-singular `C` with `CᵀEC = diag(d_e)` and `CᵀΔC = diag(d_δ)`.
///
/// With `E = LLᵀ` and the symmetric eigendecomposition
/// `L⁻¹ Δ L⁻ᵀ = Q Λ Qᵀ`, the congruence `C = L⁻ᵀ Q` gives `CᵀEC = I` and
/// `CᵀΔC = Λ`, so `|E + tΔ| = |C|⁻²·∏(d_e,i + t·d_δ,i)`.
pub fn simultaneous_diagonalize(
    e: &PsdMatrix,
    delta: &PsdMatrix,
) -> Result<(DMatrix<f64>, DVector<f64>, DVector<f64>)> {
    let n = e.dim();
    if delta.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: delta.dim(),
        });
    }
    let chol = Cholesky::new(e.as_matrix().clone()).ok_or(Error::Singular {
        min_eig: e.min_eigenvalue(),
    })?;
    let l = chol.l();
    let l_inv = l
        .clone()
        .try_inverse()
        .ok_or(Error::Singular { min_eig: 0.0 })?;
    let mid = symmetrize(&(&l_inv * delta.as_matrix() * l_inv.transpose()));
    let eig = SymmetricEigen::new(mid);
    let c = l_inv.transpose() * &eig.eigenvectors;
    let d_e = DVector::from_element(n, 1.0);
    Ok((c, d_e, eig.eigenvalues))
}

/// The determinant-ratio function
/// `r(t) = ½·(log|A+B+tΔ| − log|A+tΔ|)` for `A ≻ 0`, `B ⪰ 0`, `Δ ⪰ 0`,
/// continuous and monotonically non-increasing on `t ∈ [0,1]`.
pub fn r_function(a: &PsdMatrix, b: &PsdMatrix, delta: &PsdMatrix, t: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::OutOfRange {
            name: "t",
            value: t,
            lo: 0.0,
            hi: 1.0,
        });
    }
    let num = a.as_matrix() + b.as_matrix() + t * delta.as_matrix();
    let den = a.as_matrix() + t * delta.as_matrix();
    Ok(0.5 * (logdet_mat(&num)? - logdet_mat(&den)?))
}

/// Solve `r(t) = target` on `[0,1]` by bisection.
///
/// Requires `r(1) ≤ target ≤ r(0)` up to `residual_tol`; monotonicity makes
/// the root unique up to flat segments, and the smallest bracketed `t` is
/// returned. The result satisfies `|r(t*) − target| ≤ residual_tol` with a
/// final bracket width of at most `root_tol`.
pub fn solve_r_equals(
    a: &PsdMatrix,
    b: &PsdMatrix,
    delta: &PsdMatrix,
    target: f64,
    tol: &Tolerance,
) -> Result<f64> {
    let r0 = r_function(a, b, delta, 0.0)?;
    let r1 = r_function(a, b, delta, 1.0)?;
    if target > r0 + tol.residual_tol || target < r1 - tol.residual_tol {
        return Err(Error::TargetOutOfBracket {
            target,
            lo: r1,
            hi: r0,
        });
    }
    // Clamp targets that sit within tolerance just outside [r(1), r(0)].
    let target = target.min(r0).max(r1);
    if r0 - target <= 0.0 {
        return Ok(0.0);
    }
    if target - r1 <= 0.0 && r0 - r1 > 0.0 {
        // target == r(1) exactly and the function is non-constant: the
        // smallest root may still be interior on a flat tail, found below.
    }
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    while hi - lo > tol.root_tol {
        let mid = 0.5 * (lo + hi);
        // r decreasing: keep the invariant r(lo) > target ≥ r(hi), driving
        // hi toward the leftmost point where r falls to the target.
        if r_function(a, b, delta, mid)? > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t_star = hi;
    let achieved = r_function(a, b, delta, t_star)?;
    if (achieved - target).abs() > tol.residual_tol {
        return Err(Error::TargetOutOfBracket {
            target,
            lo: r1,
            hi: r0,
        });
    }
    Ok(t_star)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{rand_psd, rand_spd};
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    #[test]
    fn loewner_identity_orderings() {
        let t = tol();
        let i = PsdMatrix::identity(3);
        let two_i = PsdMatrix::scaled_identity(3, 2.0);
        assert!(loewner_leq(&i, &two_i, &t).unwrap());
        assert!(!loewner_leq(&two_i, &i, &t).unwrap());
    }

    #[test]
    fn loewner_reflexive_on_random_psd() {
        let t = tol();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let a = rand_psd(&mut rng, 3);
            assert!(loewner_leq(&a, &a, &t).unwrap());
        }
    }

    #[test]
    fn loewner_dimension_mismatch() {
        let t = tol();
        let a = PsdMatrix::identity(2);
        let b = PsdMatrix::identity(3);
        assert!(loewner_leq(&a, &b, &t).is_err());
    }

    #[test]
    fn psd_construction_rejects_asymmetric() {
        let t = tol();
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.1, 1.0]);
        assert!(matches!(
            PsdMatrix::new(m, &t),
            Err(Error::NotSymmetric { .. })
        ));
    }

    #[test]
    fn psd_construction_accepts_boundary_zero() {
        let t = tol();
        assert!(PsdMatrix::new(DMatrix::zeros(2, 2), &t).is_ok());
    }

    #[test]
    fn psd_construction_rejects_negative() {
        let t = tol();
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -0.1]);
        assert!(matches!(PsdMatrix::new(m, &t), Err(Error::NotPsd { .. })));
    }

    #[test]
    fn logdet_identity_is_zero() {
        assert_abs_diff_eq!(logdet(&PsdMatrix::identity(3)).unwrap(), 0.0);
    }

    #[test]
    fn logdet_diagonal() {
        let d = PsdMatrix::scaled_identity(2, 2.0);
        assert_abs_diff_eq!(logdet(&d).unwrap(), 2.0 * 2.0_f64.ln(), epsilon = 1e-14);
    }

    #[test]
    fn logdet_matches_eigenvalue_sum_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..25 {
            let a = rand_spd(&mut rng, 4);
            let by_chol = logdet(&a).unwrap();
            let by_eig: f64 = sym_eigenvalues(a.as_matrix()).iter().map(|v| v.ln()).sum();
            assert_abs_diff_eq!(by_chol, by_eig, epsilon = 1e-10);
        }
    }

    #[test]
    fn logdet_rejects_singular() {
        let t = tol();
        let m = PsdMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]), &t).unwrap();
        assert!(logdet(&m).is_err());
    }

    #[test]
    fn ratio_monotone_equality_cases() {
        let t = tol();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = rand_psd(&mut rng, 3);
        let b = rand_spd(&mut rng, 3);
        let zero = PsdMatrix::zeros(3);
        // Δ = 0 → equality.
        assert!(ratio_monotone_check(&a, &b, &zero, &t).unwrap());
        // A = 0 → both sides 1.
        let d = rand_psd(&mut rng, 3);
        assert!(ratio_monotone_check(&zero, &b, &d, &t).unwrap());
    }

    #[test]
    fn ratio_monotone_random_triples() {
        let t = tol();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for dim in 1..=4 {
            for _ in 0..50 {
                let a = rand_psd(&mut rng, dim);
                let b = rand_spd(&mut rng, dim);
                let d = rand_psd(&mut rng, dim);
                assert!(ratio_monotone_check(&a, &b, &d, &t).unwrap());
            }
        }
    }

    #[test]
    fn simdiag_identity_pair() {
        let e = PsdMatrix::identity(3);
        let d = PsdMatrix::identity(3);
        let (c, d_e, d_d) = simultaneous_diagonalize(&e, &d).unwrap();
        for i in 0..3 {
            assert_abs_diff_eq!(d_e[i], 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(d_d[i], 1.0, epsilon = 1e-12);
        }
        // CᵀC = I since E = I.
        let gram = c.transpose() * &c;
        assert!((gram - DMatrix::identity(3, 3)).amax() < 1e-10);
    }

    #[test]
    fn simdiag_zero_delta() {
        let t = tol();
        let e = PsdMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 4.0]), &t).unwrap();
        let (_, _, d_d) = simultaneous_diagonalize(&e, &PsdMatrix::zeros(2)).unwrap();
        assert!(d_d.amax() < 1e-14);
    }

    #[test]
    fn simdiag_reconstruction_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..30 {
            let e = rand_spd(&mut rng, 3);
            let d = rand_psd(&mut rng, 3);
            let (c, d_e, d_d) = simultaneous_diagonalize(&e, &d).unwrap();
            let ce = c.transpose() * e.as_matrix() * &c;
            let cd = c.transpose() * d.as_matrix() * &c;
            let mut off = 0.0_f64;
            for i in 0..3 {
                for j in 0..3 {
                    if i != j {
                        off = off.max(ce[(i, j)].abs()).max(cd[(i, j)].abs());
                    }
                }
            }
            assert!(off < 1e-9, "off-diagonal residual {off}");
            // |E + tΔ| = |C|⁻²·∏(d_e + t·d_δ) across t.
            let det_c = c.determinant();
            for &t in &[0.0, 0.3, 1.0] {
                let direct = (e.as_matrix() + t * d.as_matrix()).determinant();
                let via: f64 = (0..3).map(|i| d_e[i] + t * d_d[i]).product::<f64>() / det_c.powi(2);
                assert_abs_diff_eq!(direct, via, epsilon = 1e-8 * (1.0 + direct.abs()));
            }
        }
    }

    #[test]
    fn r_function_zero_b_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let a = rand_spd(&mut rng, 3);
        let d = rand_psd(&mut rng, 3);
        for &t in &[0.0, 0.5, 1.0] {
            assert_abs_diff_eq!(
                r_function(&a, &PsdMatrix::zeros(3), &d, t).unwrap(),
                0.0,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn r_function_constant_when_delta_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let a = rand_spd(&mut rng, 3);
        let b = rand_psd(&mut rng, 3);
        let z = PsdMatrix::zeros(3);
        let v0 = r_function(&a, &b, &z, 0.0).unwrap();
        let v1 = r_function(&a, &b, &z, 1.0).unwrap();
        assert_abs_diff_eq!(v0, v1, epsilon = 1e-12);
    }

    #[test]
    fn r_function_endpoint_monotonicity() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..50 {
            let a = rand_spd(&mut rng, 3);
            let b = rand_psd(&mut rng, 3);
            let d = rand_psd(&mut rng, 3);
            let r0 = r_function(&a, &b, &d, 0.0).unwrap();
            let r1 = r_function(&a, &b, &d, 1.0).unwrap();
            assert!(r0 >= r1 - 1e-10);
        }
    }

    #[test]
    fn r_function_rejects_t_outside_unit_interval() {
        let a = PsdMatrix::identity(2);
        let b = PsdMatrix::identity(2);
        let d = PsdMatrix::identity(2);
        assert!(r_function(&a, &b, &d, -0.1).is_err());
        assert!(r_function(&a, &b, &d, 1.1).is_err());
    }

    #[test]
    fn solve_r_at_endpoints() {
        let t = tol();
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let a = rand_spd(&mut rng, 2);
        let b = rand_spd(&mut rng, 2);
        let d = rand_spd(&mut rng, 2);
        let r0 = r_function(&a, &b, &d, 0.0).unwrap();
        let r1 = r_function(&a, &b, &d, 1.0).unwrap();
        assert_abs_diff_eq!(solve_r_equals(&a, &b, &d, r0, &t).unwrap(), 0.0);
        let t1 = solve_r_equals(&a, &b, &d, r1, &t).unwrap();
        assert_abs_diff_eq!(r_function(&a, &b, &d, t1).unwrap(), r1, epsilon = 1e-8);
    }

    #[test]
    fn solve_r_midpoint_matches_grid_oracle() {
        let t = tol();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..20 {
            let a = rand_spd(&mut rng, 3);
            let b = rand_spd(&mut rng, 3);
            let d = rand_spd(&mut rng, 3);
            let r0 = r_function(&a, &b, &d, 0.0).unwrap();
            let r1 = r_function(&a, &b, &d, 1.0).unwrap();
            let target = 0.5 * (r0 + r1);
            let t_star = solve_r_equals(&a, &b, &d, target, &t).unwrap();
            assert!((r_function(&a, &b, &d, t_star).unwrap() - target).abs() <= 1e-8);
            // Dense grid scan: the returned root should be a minimizer of
            // |r(t) − target| up to grid resolution.
            let mut best = f64::INFINITY;
            for i in 0..=1000 {
                let ti = i as f64 / 1000.0;
                best = best.min((r_function(&a, &b, &d, ti).unwrap() - target).abs());
            }
            assert!((r_function(&a, &b, &d, t_star).unwrap() - target).abs() <= best + 1e-8);
        }
    }

    #[test]
    fn ratio_monotone_rejects_singular_sum() {
        let t = tol();
        let zero = PsdMatrix::zeros(2);
        let d = PsdMatrix::identity(2);
        // A = B = 0 violates A + B ≻ 0.
        assert!(ratio_monotone_check(&zero, &zero, &d, &t).is_err());
    }

    #[test]
    fn simdiag_rejects_singular_e() {
        let t = tol();
        let e = PsdMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]), &t).unwrap();
        assert!(simultaneous_diagonalize(&e, &PsdMatrix::identity(2)).is_err());
    }

    #[test]
    fn solve_r_rejects_target_outside_range() {
        let t = tol();
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let a = rand_spd(&mut rng, 2);
        let b = rand_spd(&mut rng, 2);
        let d = rand_spd(&mut rng, 2);
        let r0 = r_function(&a, &b, &d, 0.0).unwrap();
        assert!(solve_r_equals(&a, &b, &d, r0 + 1.0, &t).is_err());
    }
}
