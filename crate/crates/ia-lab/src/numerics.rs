//! Small dense complex-matrix kernels shared by all modules.
//!
//! Everything here operates on heap-allocated `DMatrix<Complex<f64>>`
//! values; the matrices in this problem domain are tiny (antenna counts,
//! so 1..=10 per side) and clarity wins over blocking or allocation
//! tricks. All logarithms are natural.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};

pub type Cx = Complex<f64>;
pub type CMatrix = DMatrix<Cx>;
pub type CVector = DVector<Cx>;

/// Relative asymmetry tolerated before a matrix is rejected as
/// non-Hermitian. Iterates accumulate asymmetry from floating-point
/// arithmetic, so the eigendecomposition symmetrizes inputs below this
/// threshold instead of failing.
pub const HERM_TOL: f64 = 1e-9;

pub fn cx(re: f64, im: f64) -> Cx {
    Cx::new(re, im)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn is_finite_mat(a: &CMatrix) -> bool {
    a.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Hermitian part `(A + A^H) / 2`.
pub fn herm_part(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()).scale(0.5)
}

/// Frobenius distance from `a` to its Hermitian part.
pub fn asymmetry(a: &CMatrix) -> f64 {
    (a - a.adjoint()).norm() * 0.5
}

/// Real part of the trace. The imaginary part of traces of Hermitian
/// products is numerical noise and is dropped.
pub fn re_trace(a: &CMatrix) -> f64 {
    a.trace().re
}

fn check_square_finite(a: &CMatrix) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::NotSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    if !is_finite_mat(a) {
        return Err(Error::NonFinite);
    }
    Ok(())
}

fn check_hermitian(a: &CMatrix) -> Result<()> {
    check_square_finite(a)?;
    let tol = HERM_TOL * a.norm().max(1.0);
    let asym = asymmetry(a);
    if asym > tol {
        return Err(Error::NotHermitian { asym, tol });
    }
    Ok(())
}

/// Eigendecomposition of a Hermitian matrix.
///
/// Eigenvalues are real and sorted ascending; `vectors` holds the matching
/// eigenvectors as columns and is unitary, so `A = V diag(values) V^H`.
#[derive(Debug, Clone)]
pub struct HermEig {
    pub values: DVector<f64>,
    pub vectors: CMatrix,
}

impl HermEig {
    /// Rebuild the matrix `V diag(values) V^H`.
    pub fn reconstruct(&self) -> CMatrix {
        let d = CMatrix::from_diagonal(&self.values.map(|x| cx(x, 0.0)));
        &self.vectors * d * self.vectors.adjoint()
    }
}

/// Hermitian eigendecomposition with eigenvalues sorted ascending.
///
/// The input is symmetrized internally; asymmetry beyond [`HERM_TOL`]
/// (relative) is an error.
pub fn herm_eig(a: &CMatrix) -> Result<HermEig> {
    check_hermitian(a)?;
    let h = herm_part(a);
    let se = h.symmetric_eigen();
    let n = se.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| se.eigenvalues[i].total_cmp(&se.eigenvalues[j]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| se.eigenvalues[i]));
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &se.eigenvectors.column(src));
    }
    Ok(HermEig { values, vectors })
}

/// Euclidean projection of a vector onto the set `{x >= 0, sum(x) <= cap}`.
fn project_nonneg_capped(d: &[f64], cap: f64) -> Vec<f64> {
    let clamped: Vec<f64> = d.iter().map(|&x| x.max(0.0)).collect();
    let total: f64 = clamped.iter().sum();
    if total <= cap {
        return clamped;
    }
    // Water-line search: x_i = max(d_i - tau, 0) with tau > 0 chosen so the
    // positive parts sum to cap.
    let mut sorted: Vec<f64> = d.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut prefix = 0.0;
    let mut tau = 0.0;
    for (j, &dj) in sorted.iter().enumerate() {
        prefix += dj;
        let t = (prefix - cap) / (j + 1) as f64;
        if j + 1 == sorted.len() || sorted[j + 1] <= t {
            tau = t;
            break;
        }
    }
    d.iter().map(|&x| (x - tau).max(0.0)).collect()
}

/// Frobenius-nearest matrix to `a` in the spectrahedron
/// `{Q : Q PSD, tr(Q) <= cap}`.
///
/// Eigenvalues are clamped to zero and then projected onto the capped
/// simplex; the eigenbasis is untouched.
pub fn project_psd_trace(a: &CMatrix, cap: f64) -> Result<CMatrix> {
    if !(cap > 0.0) || !cap.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "trace cap must be positive and finite, got {cap}"
        )));
    }
    let eig = herm_eig(a)?;
    let lam = project_nonneg_capped(eig.values.as_slice(), cap);
    let d = CMatrix::from_diagonal(&DVector::from_iterator(
        lam.len(),
        lam.iter().map(|&x| cx(x, 0.0)),
    ));
    let p = &eig.vectors * d * eig.vectors.adjoint();
    Ok(herm_part(&p))
}

// nalgebra's complex Cholesky happily takes the complex square root of a
// negative pivot, so definiteness must be checked on the factor's diagonal.
fn cholesky_pd(h: &CMatrix) -> Result<nalgebra::linalg::Cholesky<Cx, nalgebra::Dyn>> {
    let chol = h.clone().cholesky().ok_or(Error::NotPositiveDefinite)?;
    let l = chol.l_dirty();
    for i in 0..h.nrows() {
        let d = l[(i, i)];
        if !(d.re > 0.0) || d.im.abs() > 1e-10 * (1.0 + d.re.abs()) {
            return Err(Error::NotPositiveDefinite);
        }
    }
    Ok(chol)
}

/// Natural-log determinant of a Hermitian positive definite matrix.
///
/// Failure of the Cholesky factorization is reported as
/// [`Error::NotPositiveDefinite`], distinct from non-finite input.
pub fn logdet_psd(a: &CMatrix) -> Result<f64> {
    check_hermitian(a)?;
    let h = herm_part(a);
    let chol = cholesky_pd(&h)?;
    let l = chol.l_dirty();
    Ok(2.0 * (0..l.nrows()).map(|i| l[(i, i)].re.ln()).sum::<f64>())
}

/// Solve `A X = B` for Hermitian positive definite `A`.
pub fn solve_pd(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    check_hermitian(a)?;
    if a.nrows() != b.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "solve_pd: lhs is {}x{}, rhs has {} rows",
            a.nrows(),
            a.ncols(),
            b.nrows()
        )));
    }
    let h = herm_part(a);
    let chol = cholesky_pd(&h)?;
    Ok(chol.solve(b))
}

/// Inverse of a Hermitian positive definite matrix.
pub fn inv_pd(a: &CMatrix) -> Result<CMatrix> {
    solve_pd(a, &identity(a.nrows()))
}

/// Smallest and largest singular values of an arbitrary matrix.
pub fn singular_extremes(a: &CMatrix) -> (f64, f64) {
    let sv = a.clone().singular_values();
    let mut min = f64::INFINITY;
    let mut max = 0.0f64;
    for s in sv.iter() {
        min = min.min(*s);
        max = max.max(*s);
    }
    if !min.is_finite() {
        min = 0.0;
    }
    (min, max)
}

/// Rotate a vector's global phase so its first entry of significant
/// modulus is real and positive. Leaves the zero vector untouched.
pub fn canonicalize_phase(v: &mut CVector) {
    let lead = v.iter().find(|z| z.norm() > 1e-12).copied();
    if let Some(z) = lead {
        let phase = z / cx(z.norm(), 0.0);
        let adj = phase.conj();
        for e in v.iter_mut() {
            *e *= adj;
        }
    }
}

/// Eigenvalues of a general (not necessarily Hermitian) complex matrix,
/// via the Schur form.
pub fn complex_eigenvalues(a: &CMatrix) -> Result<Vec<Cx>> {
    check_square_finite(a)?;
    let schur = nalgebra::linalg::Schur::try_new(a.clone(), 1e-12, 100_000)
        .ok_or(Error::InvalidArgument("Schur iteration failed".into()))?;
    let t = schur.unpack().1;
    Ok((0..t.nrows()).map(|i| t[(i, i)]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_cmatrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> CMatrix {
        CMatrix::from_fn(r, c, |_, _| cx(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
    }

    fn random_hermitian(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
        let a = random_cmatrix(rng, n, n);
        herm_part(&a)
    }

    #[test]
    fn herm_eig_identity() {
        let eig = herm_eig(&identity(2)).unwrap();
        assert!((eig.values[0] - 1.0).abs() < 1e-12);
        assert!((eig.values[1] - 1.0).abs() < 1e-12);
        let orth = eig.vectors.adjoint() * &eig.vectors;
        assert!((orth - identity(2)).norm() < 1e-10);
    }

    #[test]
    fn herm_eig_diagonal_sorted_ascending() {
        let a = CMatrix::from_diagonal(&CVector::from_vec(vec![cx(3.0, 0.0), cx(1.0, 0.0)]));
        let eig = herm_eig(&a).unwrap();
        assert!((eig.values[0] - 1.0).abs() < 1e-12);
        assert!((eig.values[1] - 3.0).abs() < 1e-12);
        // eigenvector of the smaller eigenvalue is e2, of the larger e1
        assert!(eig.vectors[(1, 0)].norm() > 0.999);
        assert!(eig.vectors[(0, 1)].norm() > 0.999);
    }

    #[test]
    fn herm_eig_reconstruction_random_4x4() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = random_hermitian(&mut rng, 4);
        let eig = herm_eig(&a).unwrap();
        let err = (eig.reconstruct() - &a).norm();
        assert!(err <= 1e-10 * a.norm(), "reconstruction error {err:.3e}");
    }

    #[test]
    fn herm_eig_rejects_non_square_and_non_finite() {
        let a = CMatrix::zeros(2, 3);
        assert!(matches!(herm_eig(&a), Err(Error::NotSquare { .. })));
        let mut b = identity(2);
        b[(0, 0)] = cx(f64::NAN, 0.0);
        assert!(matches!(herm_eig(&b), Err(Error::NonFinite)));
        let mut c = identity(2);
        c[(0, 1)] = cx(1.0, 0.0);
        assert!(matches!(herm_eig(&c), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn herm_eig_bounds_hold_on_random_suite() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for trial in 0..10_000 {
            let n = 1 + trial % 8;
            let a = random_hermitian(&mut rng, n);
            let eig = herm_eig(&a).unwrap();
            let scale = a.norm().max(1e-300);
            assert!((eig.reconstruct() - &a).norm() <= 1e-10 * scale.max(1.0));
            let orth = eig.vectors.adjoint() * &eig.vectors;
            assert!((orth - identity(n)).norm() <= 1e-10);
            for i in 1..n {
                assert!(eig.values[i] >= eig.values[i - 1]);
            }
        }
    }

    #[test]
    fn project_keeps_interior_point() {
        // already PSD with trace = cap/2 stays put
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let b = random_cmatrix(&mut rng, 3, 3);
        let mut a = &b * b.adjoint();
        let cap = 2.0 * re_trace(&a);
        a = herm_part(&a);
        let p = project_psd_trace(&a, cap).unwrap();
        assert!((p - &a).norm() < 1e-10 * a.norm());
    }

    #[test]
    fn project_clamps_and_caps_diagonal() {
        let a = CMatrix::from_diagonal(&CVector::from_vec(vec![cx(-1.0, 0.0), cx(2.0, 0.0)]));
        let p = project_psd_trace(&a, 1.0).unwrap();
        let expect =
            CMatrix::from_diagonal(&CVector::from_vec(vec![cx(0.0, 0.0), cx(1.0, 0.0)]));
        assert!((p - expect).norm() < 1e-12);
    }

    #[test]
    fn project_beats_eigenvalue_grid() {
        // optimality against a fine grid over the eigenvalue simplex
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..20 {
            let a = random_hermitian(&mut rng, 3);
            let p = project_psd_trace(&a, 1.0).unwrap();
            let dist = (&p - &a).norm();
            let d = herm_eig(&a).unwrap().values;
            let steps = 60usize;
            let mut best = f64::INFINITY;
            for i in 0..=steps {
                for j in 0..=steps - i {
                    for k in 0..=steps - i - j {
                        let lam = [
                            i as f64 / steps as f64,
                            j as f64 / steps as f64,
                            k as f64 / steps as f64,
                        ];
                        let dd: f64 =
                            (0..3).map(|t| (lam[t] - d[t]).powi(2)).sum::<f64>().sqrt();
                        best = best.min(dd);
                    }
                }
            }
            // the projection can be no farther than any feasible grid point
            assert!(dist <= best + 1e-9, "dist {dist:.6} grid best {best:.6}");
        }
    }

    #[test]
    fn project_idempotent_and_nonexpansive() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for _ in 0..1000 {
            let n = 1 + rng.gen_range(0..4);
            let cap = 0.5 + rng.gen::<f64>();
            let a = random_hermitian(&mut rng, n);
            let b = random_hermitian(&mut rng, n);
            let pa = project_psd_trace(&a, cap).unwrap();
            let pb = project_psd_trace(&b, cap).unwrap();
            let paa = project_psd_trace(&pa, cap).unwrap();
            assert!((&paa - &pa).norm() <= 1e-9 * pa.norm().max(1.0));
            assert!((&pa - &pb).norm() <= (&a - &b).norm() + 1e-9);
        }
    }

    #[test]
    fn project_rejects_bad_cap_and_nan() {
        let a = identity(2);
        assert!(project_psd_trace(&a, 0.0).is_err());
        assert!(project_psd_trace(&a, -1.0).is_err());
        let mut b = identity(2);
        b[(1, 1)] = cx(f64::INFINITY, 0.0);
        assert!(project_psd_trace(&b, 1.0).is_err());
    }

    #[test]
    fn logdet_basic_values() {
        assert!(logdet_psd(&identity(3)).unwrap().abs() < 1e-12);
        let a = CMatrix::from_diagonal(&CVector::from_vec(vec![
            cx(1f64.exp(), 0.0),
            cx(2f64.exp(), 0.0),
        ]));
        assert!((logdet_psd(&a).unwrap() - 3.0).abs() < 1e-10);
    }

    #[test]
    fn logdet_matches_eigenvalue_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let b = random_cmatrix(&mut rng, 3, 3);
        let a = herm_part(&(&b * b.adjoint())) + identity(3).scale(0.1);
        let ld = logdet_psd(&a).unwrap();
        let eig = herm_eig(&a).unwrap();
        let ld_eig: f64 = eig.values.iter().map(|x| x.ln()).sum();
        assert!((ld - ld_eig).abs() < 1e-10);
    }

    #[test]
    fn logdet_error_kinds_are_distinct() {
        let a = CMatrix::from_diagonal(&CVector::from_vec(vec![cx(1.0, 0.0), cx(-1.0, 0.0)]));
        assert!(matches!(logdet_psd(&a), Err(Error::NotPositiveDefinite)));
        let mut b = identity(2);
        b[(0, 0)] = cx(f64::NAN, 0.0);
        assert!(matches!(logdet_psd(&b), Err(Error::NonFinite)));
    }

    #[test]
    fn logdet_inverse_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(91);
        for _ in 0..200 {
            let n = 1 + rng.gen_range(0..5);
            let b = random_cmatrix(&mut rng, n, n);
            let a = herm_part(&(&b * b.adjoint())) + identity(n).scale(0.5);
            let inv = inv_pd(&a).unwrap();
            let s = logdet_psd(&a).unwrap() + logdet_psd(&herm_part(&inv)).unwrap();
            assert!(s.abs() < 1e-8, "logdet(A) + logdet(A^-1) = {s:.3e}");
        }
    }

    #[test]
    fn solve_pd_solves() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let b = random_cmatrix(&mut rng, 4, 4);
        let a = herm_part(&(&b * b.adjoint())) + identity(4).scale(0.2);
        let rhs = random_cmatrix(&mut rng, 4, 2);
        let x = solve_pd(&a, &rhs).unwrap();
        assert!((&a * x - rhs).norm() < 1e-10);
    }
}
