//! One-dimensional subspaces of `C^2` and small 2x2 line geometry.

use nalgebra::{Matrix2, Vector2};

use crate::numerics::{cx, Cx};

pub type M2 = Matrix2<Cx>;
pub type V2 = Vector2<Cx>;

/// Overlap above which two unit generators are considered the same line.
pub const LINE_TOL: f64 = 1e-9;

/// Nonzero-link threshold on the Frobenius norm.
pub const NONZERO_TOL: f64 = 1e-12;

/// Full-rank threshold: `sigma_min > RANK2_TOL * sigma_max`.
pub const RANK2_TOL: f64 = 1e-9;

/// A line in `C^2`, stored as a canonical representative: unit norm with
/// the first coordinate of significant modulus rotated real-positive.
#[derive(Debug, Clone, PartialEq)]
pub struct Subspace1D {
    g: V2,
}

impl Subspace1D {
    /// Canonicalize a generator; `None` for (numerically) zero vectors.
    pub fn from_vector(v: V2) -> Option<Self> {
        let n = v.norm();
        if !(n > 1e-150) || !n.is_finite() {
            return None;
        }
        let mut g = v / cx(n, 0.0);
        let lead = g.iter().find(|z| z.norm() > 1e-12).copied();
        if let Some(z) = lead {
            let adj = (z / cx(z.norm(), 0.0)).conj();
            g *= adj;
        }
        Some(Self { g })
    }

    pub fn generator(&self) -> &V2 {
        &self.g
    }

    /// The orthogonal line.
    pub fn orth(&self) -> Self {
        let v = V2::new(-self.g[1].conj(), self.g[0].conj());
        Self::from_vector(v).expect("orthogonal complement of a unit vector")
    }

    /// `|<a, b>|` for the unit generators; 1 means identical lines.
    pub fn overlap(&self, other: &Self) -> f64 {
        self.g.dotc(&other.g).norm()
    }

    pub fn approx_eq(&self, other: &Self) -> bool {
        self.overlap(other) > 1.0 - LINE_TOL
    }

    /// Angle between the lines in radians (Fubini-Study distance).
    pub fn angle_to(&self, other: &Self) -> f64 {
        self.overlap(other).clamp(0.0, 1.0).acos()
    }

    /// Image under a matrix; `None` if the line is annihilated.
    pub fn map(&self, m: &M2) -> Option<Self> {
        Self::from_vector(m * self.g)
    }
}

/// View a dynamically-sized 2x2 matrix as a fixed one.
pub fn m2_of(m: &crate::numerics::CMatrix) -> M2 {
    assert_eq!(m.shape(), (2, 2));
    M2::new(m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)])
}

/// Rank classification of a 2x2 channel block under the declared
/// thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rank {
    Zero,
    One,
    Two,
}

pub fn rank_class(m: &M2) -> Rank {
    let fro = m.norm();
    if fro <= NONZERO_TOL {
        return Rank::Zero;
    }
    let sv = m.singular_values();
    let (lo, hi) = (sv[0].min(sv[1]), sv[0].max(sv[1]));
    if lo > RANK2_TOL * hi {
        Rank::Two
    } else {
        Rank::One
    }
}

/// Null line of a rank-one matrix (right singular direction of the
/// vanishing singular value).
pub fn null_line(m: &M2) -> Subspace1D {
    let svd = m.svd(false, true);
    let vt = svd.v_t.expect("svd with vt");
    let idx = if svd.singular_values[0] <= svd.singular_values[1] { 0 } else { 1 };
    Subspace1D::from_vector(vt.row(idx).adjoint()).expect("unit singular vector")
}

/// Range line of a rank-one matrix (left singular direction of the
/// dominant singular value).
pub fn range_line(m: &M2) -> Subspace1D {
    let svd = m.svd(true, false);
    let u = svd.u.expect("svd with u");
    let idx = if svd.singular_values[0] >= svd.singular_values[1] { 0 } else { 1 };
    Subspace1D::from_vector(u.column(idx).into_owned()).expect("unit singular vector")
}

/// Invariant lines of a 2x2 matrix.
#[derive(Debug, Clone)]
pub enum EigLines {
    /// Multiple of the identity: every line is invariant.
    All,
    /// Defective repeated eigenvalue: a single invariant line.
    One(Subspace1D),
    /// Distinct eigenvalues: two invariant lines.
    Two(Subspace1D, Subspace1D),
}

/// Eigenvector line of `m` for eigenvalue `lam`, choosing the better
/// conditioned of the two cross-product forms.
fn eig_vec_for(m: &M2, lam: Cx) -> Subspace1D {
    let a = V2::new(-m[(0, 1)], m[(0, 0)] - lam);
    let b = V2::new(lam - m[(1, 1)], m[(1, 0)]);
    let v = if a.norm() >= b.norm() { a } else { b };
    Subspace1D::from_vector(v)
        .unwrap_or_else(|| Subspace1D::from_vector(V2::new(cx(1.0, 0.0), cx(0.0, 0.0))).unwrap())
}

pub fn eig_lines(m: &M2) -> EigLines {
    let scale = m.norm().max(1e-300);
    let half_tr = (m[(0, 0)] + m[(1, 1)]) * cx(0.5, 0.0);
    let centered = m - M2::identity() * half_tr;
    if centered.norm() <= 1e-7 * scale {
        return EigLines::All;
    }
    let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    let disc = half_tr * half_tr - det;
    let root = disc.sqrt();
    if root.norm() <= 1e-7 * scale {
        return EigLines::One(eig_vec_for(m, half_tr));
    }
    let l1 = half_tr + root;
    let l2 = half_tr - root;
    EigLines::Two(eig_vec_for(m, l1), eig_vec_for(m, l2))
}

/// Whether `line` is invariant under `m` (maps onto itself).
pub fn is_invariant_line(m: &M2, line: &Subspace1D, tol: f64) -> bool {
    match line.map(m) {
        Some(img) => img.overlap(line) > 1.0 - tol,
        // annihilated: invariant only in the degenerate sense; reject
        None => false,
    }
}

/// Uniform deterministic sample of lines in `C^2`: Fibonacci lattice on
/// the Bloch sphere, `(theta, phi) -> (cos(theta/2), e^{i phi} sin(theta/2))`.
pub fn fibonacci_line(index: usize, total: usize) -> Subspace1D {
    let golden = (1.0 + 5.0f64.sqrt()) / 2.0;
    let z = 1.0 - 2.0 * (index as f64 + 0.5) / total as f64;
    let theta = z.clamp(-1.0, 1.0).acos();
    let phi = 2.0 * std::f64::consts::PI * ((index as f64 / golden) % 1.0);
    let v = V2::new(
        cx((theta / 2.0).cos(), 0.0),
        cx(0.0, phi).exp() * cx((theta / 2.0).sin(), 0.0),
    );
    Subspace1D::from_vector(v).expect("unit sample")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(a: Cx, b: Cx) -> Subspace1D {
        Subspace1D::from_vector(V2::new(a, b)).unwrap()
    }

    #[test]
    fn canonical_representative() {
        let s = line(cx(0.0, 2.0), cx(2.0, 0.0));
        // leading coordinate rotated real positive, unit norm
        assert!(s.generator()[0].im.abs() < 1e-15);
        assert!(s.generator()[0].re > 0.0);
        assert!((s.generator().norm() - 1.0).abs() < 1e-15);
        let t = line(cx(0.0, -7.0), cx(-7.0, 0.0));
        assert!(s.approx_eq(&t));
        assert_eq!(Subspace1D::from_vector(V2::zeros()), None);
    }

    #[test]
    fn orth_is_orthogonal() {
        let s = line(cx(0.3, 0.4), cx(-0.2, 0.9));
        let o = s.orth();
        assert!(s.overlap(&o) < 1e-12);
    }

    #[test]
    fn rank_classes() {
        let z = M2::zeros();
        assert_eq!(rank_class(&z), Rank::Zero);
        let one = M2::new(cx(1.0, 0.0), cx(2.0, 0.0), cx(0.5, 0.0), cx(1.0, 0.0));
        assert_eq!(rank_class(&one), Rank::One);
        let two = M2::new(cx(1.0, 0.0), cx(0.0, 0.0), cx(0.0, 0.0), cx(1.0, 0.0));
        assert_eq!(rank_class(&two), Rank::Two);
    }

    #[test]
    fn null_and_range_of_rank_one() {
        // m = u v^H
        let u = V2::new(cx(1.0, 0.0), cx(0.0, 1.0));
        let v = V2::new(cx(2.0, 0.0), cx(1.0, -1.0));
        let m: M2 = u * v.adjoint();
        let null = null_line(&m);
        assert!((m * null.generator()).norm() < 1e-12);
        let range = range_line(&m);
        let urange = Subspace1D::from_vector(u).unwrap();
        assert!(range.approx_eq(&urange));
    }

    #[test]
    fn eig_lines_cases() {
        assert!(matches!(eig_lines(&(M2::identity() * cx(2.0, 0.0))), EigLines::All));
        // diag(1, 3): eigenlines e1, e2
        let d = M2::new(cx(1.0, 0.0), cx(0.0, 0.0), cx(0.0, 0.0), cx(3.0, 0.0));
        match eig_lines(&d) {
            EigLines::Two(a, b) => {
                let e1 = line(cx(1.0, 0.0), cx(0.0, 0.0));
                let e2 = line(cx(0.0, 0.0), cx(1.0, 0.0));
                assert!(a.approx_eq(&e1) && b.approx_eq(&e2) || a.approx_eq(&e2) && b.approx_eq(&e1));
            }
            other => panic!("expected two lines, got {other:?}"),
        }
        // Jordan block: one line
        let j = M2::new(cx(2.0, 0.0), cx(1.0, 0.0), cx(0.0, 0.0), cx(2.0, 0.0));
        match eig_lines(&j) {
            EigLines::One(a) => {
                assert!(a.approx_eq(&line(cx(1.0, 0.0), cx(0.0, 0.0))));
            }
            other => panic!("expected one line, got {other:?}"),
        }
    }

    #[test]
    fn invariant_line_test() {
        let d = M2::new(cx(1.0, 0.0), cx(0.0, 0.0), cx(0.0, 0.0), cx(3.0, 0.0));
        assert!(is_invariant_line(&d, &line(cx(1.0, 0.0), cx(0.0, 0.0)), 1e-9));
        assert!(!is_invariant_line(&d, &line(cx(1.0, 0.0), cx(1.0, 0.0)), 1e-9));
    }

    #[test]
    fn fibonacci_lines_spread() {
        let n = 200;
        let mut min_pair = f64::INFINITY;
        for i in 0..n {
            let a = fibonacci_line(i, n);
            for j in 0..i {
                let b = fibonacci_line(j, n);
                min_pair = min_pair.min(a.angle_to(&b));
            }
        }
        // no two samples collapse onto the same line
        assert!(min_pair > 1e-3, "closest pair {min_pair:.3e}");
    }
}
