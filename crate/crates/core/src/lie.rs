// SPDX-License-Identifier: Apache-2.0

//! Hermitian traceless matrices as the Lie algebra of SU(N+1).
//!
//! Elements are stored in the hermitian picture `A = iξ`, so every flow,
//! norm and pairing below works with real spectra. The Hilbert–Schmidt
//! norm `Σ|A_ab|²` coincides with the invariant norm of `ξ`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::config::{STRUCTURAL_TOL, TRACE_TOL};
use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

const I: Complex64 = Complex64::new(0.0, 1.0);

pub(crate) fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

fn asymmetry(m: &CMat) -> f64 {
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for a in 0..n {
        for b in a..n {
            worst = worst.max((m[(a, b)] - m[(b, a)].conj()).norm());
        }
    }
    worst
}

fn check_square(m: &CMat) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimMismatch {
            expected: m.nrows(),
            got: m.ncols(),
        });
    }
    Ok(())
}

/// Element of su(N+1) in the hermitian picture.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianTraceless {
    m: CMat,
}

impl HermitianTraceless {
    /// Validates hermiticity (1e-10) and tracelessness (1e-12, relative to the
    /// largest entry), then symmetrizes the stored entries exactly.
    pub fn new(m: CMat) -> Result<Self> {
        check_square(&m)?;
        let scale = max_abs(&m).max(1.0);
        let asym = asymmetry(&m);
        if asym > STRUCTURAL_TOL * scale {
            return Err(Error::NotHermitian { asymmetry: asym });
        }
        let tr = m.trace();
        if tr.norm() > TRACE_TOL * scale {
            return Err(Error::InvalidArgument(format!(
                "matrix is not traceless (trace {:.3e})",
                tr.norm()
            )));
        }
        Ok(Self::symmetrized(m))
    }

    fn symmetrized(m: CMat) -> Self {
        let h = (&m + m.adjoint()) * c(0.5);
        HermitianTraceless { m: h }
    }

    pub fn zero(dim: usize) -> Self {
        HermitianTraceless {
            m: CMat::zeros(dim, dim),
        }
    }

    /// Diagonal element; the entries must sum to zero.
    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        let m = CMat::from_diagonal(&CVec::from_iterator(diag.len(), diag.iter().map(|&x| c(x))));
        HermitianTraceless::new(m)
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.m
    }

    pub fn into_matrix(self) -> CMat {
        self.m
    }

    pub fn hs_norm_sq(&self) -> f64 {
        self.m.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn hs_norm(&self) -> f64 {
        self.hs_norm_sq().sqrt()
    }

    pub fn scaled(&self, s: f64) -> Self {
        HermitianTraceless { m: &self.m * c(s) }
    }

    /// `self + s * other`; dimensions must agree.
    pub fn add_scaled(&self, s: f64, other: &Self) -> Result<Self> {
        same_dim(self, other)?;
        Ok(HermitianTraceless {
            m: &self.m + &other.m * c(s),
        })
    }

    /// `u A u*`. Stays in the algebra only for unitary `u`.
    pub fn conjugate_by(&self, u: &CMat) -> Result<Self> {
        if u.nrows() != self.dim() || u.ncols() != self.dim() {
            return Err(Error::DimMismatch {
                expected: self.dim(),
                got: u.nrows(),
            });
        }
        Ok(Self::symmetrized(u * &self.m * u.adjoint()))
    }

    pub fn commutator(&self, other: &Self) -> CMat {
        &self.m * &other.m - &other.m * &self.m
    }
}

fn same_dim(a: &HermitianTraceless, b: &HermitianTraceless) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    Ok(())
}

/// `C - tr(C)/(N+1) · I` for hermitian `C`.
pub fn project_traceless(cmat: &CMat) -> Result<HermitianTraceless> {
    check_square(cmat)?;
    let scale = max_abs(cmat).max(1.0);
    let asym = asymmetry(cmat);
    if asym > STRUCTURAL_TOL * scale {
        return Err(Error::NotHermitian { asymmetry: asym });
    }
    let n = cmat.nrows();
    let mean = cmat.trace() / c(n as f64);
    let mut out = cmat.clone();
    for a in 0..n {
        out[(a, a)] -= mean;
    }
    Ok(HermitianTraceless::symmetrized(out))
}

/// Hilbert–Schmidt pairing `tr(AB)`.
pub fn hs_inner(a: &HermitianTraceless, b: &HermitianTraceless) -> Result<f64> {
    same_dim(a, b)?;
    // tr(AB) = Σ A_ab B_ba = Σ A_ab conj(B_ab) for hermitian B
    Ok(a
        .m
        .iter()
        .zip(b.m.iter())
        .map(|(x, y)| (x * y.conj()).re)
        .sum())
}

/// Invertible matrix acting on coefficient rows of a basis.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupElement {
    m: CMat,
}

impl GroupElement {
    pub fn identity(dim: usize) -> Self {
        GroupElement {
            m: CMat::identity(dim, dim),
        }
    }

    pub fn from_matrix(m: CMat) -> Result<Self> {
        check_square(&m)?;
        Ok(GroupElement { m })
    }

    pub fn matrix(&self) -> &CMat {
        &self.m
    }

    pub fn into_matrix(self) -> CMat {
        self.m
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn compose(&self, other: &GroupElement) -> GroupElement {
        GroupElement {
            m: &self.m * &other.m,
        }
    }

    pub fn determinant(&self) -> Complex64 {
        self.m.determinant()
    }

    /// `‖g g* - I‖_max`.
    pub fn unitarity_defect(&self) -> f64 {
        let d = &self.m * self.m.adjoint() - CMat::identity(self.dim(), self.dim());
        max_abs(&d)
    }
}

/// Eigendecomposition of a hermitian matrix: ascending real eigenvalues and
/// unitary eigenvectors (columns).
pub(crate) fn hermitian_eigen(m: &CMat) -> (Vec<f64>, CMat) {
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..m.nrows()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMat::from_fn(m.nrows(), m.ncols(), |r, col| eig.eigenvectors[(r, order[col])]);
    (values, vectors)
}

/// `V f(Λ) V*` for a hermitian matrix with spectral data `(values, vectors)`.
pub(crate) fn spectral_apply(values: &[f64], vectors: &CMat, f: impl Fn(f64) -> Complex64) -> CMat {
    let n = values.len();
    let mut scaled = vectors.clone();
    for (col, &lam) in values.iter().enumerate() {
        let fv = f(lam);
        for r in 0..n {
            scaled[(r, col)] *= fv;
        }
    }
    scaled * vectors.adjoint()
}

/// `exp(tA)`, computed through the hermitian eigendecomposition of `A`.
/// Exact on diagonal inputs; accuracy is that of the eigensolver (~1e-14
/// relative for the sizes used here).
pub fn mat_exp(a: &HermitianTraceless, t: f64) -> GroupElement {
    let (values, vectors) = hermitian_eigen(&a.m);
    GroupElement {
        m: spectral_apply(&values, &vectors, |lam| c((t * lam).exp())),
    }
}

/// `exp(itA)`; unitary.
pub fn mat_exp_unitary(a: &HermitianTraceless, t: f64) -> GroupElement {
    let (values, vectors) = hermitian_eigen(&a.m);
    GroupElement {
        m: spectral_apply(&values, &vectors, |lam| (I * (t * lam)).exp()),
    }
}

/// Orthonormal basis of the hermitian traceless `dim × dim` matrices under
/// the Hilbert–Schmidt pairing.
///
/// Order: for each `a < b` the symmetric element `(E_ab + E_ba)/√2` followed
/// by `i(E_ab - E_ba)/√2`, then the diagonal ladder
/// `diag(1,…,1,-l,0,…)/√(l(l+1))` for `l = 1..dim`.
pub fn lie_basis(dim: usize) -> Vec<HermitianTraceless> {
    assert!(dim >= 2, "lie_basis needs dim >= 2");
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = Vec::with_capacity(dim * dim - 1);
    for a in 0..dim {
        for b in (a + 1)..dim {
            let mut sym = CMat::zeros(dim, dim);
            sym[(a, b)] = c(s);
            sym[(b, a)] = c(s);
            out.push(HermitianTraceless { m: sym });
            let mut anti = CMat::zeros(dim, dim);
            anti[(a, b)] = I * s;
            anti[(b, a)] = -I * s;
            out.push(HermitianTraceless { m: anti });
        }
    }
    for l in 1..dim {
        let norm = ((l * (l + 1)) as f64).sqrt();
        let mut diag = CMat::zeros(dim, dim);
        for j in 0..l {
            diag[(j, j)] = c(1.0 / norm);
        }
        diag[(l, l)] = c(-(l as f64) / norm);
        out.push(HermitianTraceless { m: diag });
    }
    out
}

/// Hermitian generators `[J_x, J_y, J_z]` of the spin-k/2 representation of
/// su(2) on sections of O(k), in the weighted-monomial frame.
///
/// `J_z = diag(i - k/2)`, the raising operator has `(J_+)_{i,i-1} = √(i(k-i+1))`,
/// and `[J_x, J_y] = i J_z`.
pub fn aut_subalgebra(k: usize) -> [HermitianTraceless; 3] {
    assert!(k >= 1, "aut_subalgebra needs k >= 1");
    let dim = k + 1;
    let mut raise = CMat::zeros(dim, dim);
    for i in 1..dim {
        raise[(i, i - 1)] = c(((i * (k - i + 1)) as f64).sqrt());
    }
    let lower = raise.adjoint();
    let jx = (&raise + &lower) * c(0.5);
    let jy = (&raise - &lower) * (-I * 0.5);
    let jz = CMat::from_fn(dim, dim, |a, b| {
        if a == b {
            c(a as f64 - k as f64 / 2.0)
        } else {
            c(0.0)
        }
    });
    [
        HermitianTraceless { m: jx },
        HermitianTraceless { m: jy },
        HermitianTraceless { m: jz },
    ]
}

/// Gaussian hermitian traceless matrix with unit Hilbert–Schmidt norm.
pub fn random_generator<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> HermitianTraceless {
    loop {
        let m = CMat::from_fn(dim, dim, |_, _| {
            Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
        });
        let h = (&m + m.adjoint()) * c(0.5);
        let p = project_traceless(&h).expect("symmetrized input is hermitian");
        let n = p.hs_norm();
        if n > 1e-8 {
            return p.scaled(1.0 / n);
        }
    }
}

/// Seed-free generator with hs-norm 1, built from
/// `M_ab = cos(1.3a + 0.7b + s) + i sin(0.9ab + 0.4a + s)`.
///
/// Used wherever a reproducible "generic" direction is needed without
/// depending on a random number generator.
pub fn fixed_generator(dim: usize, s: f64) -> HermitianTraceless {
    let m = CMat::from_fn(dim, dim, |a, b| {
        let (a, b) = (a as f64, b as f64);
        Complex64::new((1.3 * a + 0.7 * b + s).cos(), (0.9 * a * b + 0.4 * a + s).sin())
    });
    let h = (&m + m.adjoint()) * c(0.5);
    let p = project_traceless(&h).expect("symmetrized input is hermitian");
    let n = p.hs_norm();
    p.scaled(1.0 / n)
}

/// Haar-ish random unitary: `exp(i·s·H)` for a random unit generator `H`,
/// times a random diagonal phase.
pub fn random_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CMat {
    let h = random_generator(dim, rng);
    let spread: f64 = 2.0 + 4.0 * rng.random::<f64>();
    let u = mat_exp_unitary(&h, spread).into_matrix();
    let phases = CVec::from_fn(dim, |_, _| (I * (std::f64::consts::TAU * rng.random::<f64>())).exp());
    CMat::from_diagonal(&phases) * u
}

/// Component of `a` orthogonal (Hilbert–Schmidt) to the span of `span`.
pub fn orthogonal_complement(a: &HermitianTraceless, span: &[HermitianTraceless]) -> Result<HermitianTraceless> {
    let ortho = gram_schmidt(span)?;
    let mut out = a.clone();
    for e in &ortho {
        let coef = hs_inner(&out, e)?;
        out = out.add_scaled(-coef, e)?;
    }
    Ok(out)
}

/// Orthonormalizes a list of generators, dropping numerically dependent ones.
pub fn gram_schmidt(span: &[HermitianTraceless]) -> Result<Vec<HermitianTraceless>> {
    let mut ortho: Vec<HermitianTraceless> = Vec::with_capacity(span.len());
    for v in span {
        let mut w = v.clone();
        for e in &ortho {
            let coef = hs_inner(&w, e)?;
            w = w.add_scaled(-coef, e)?;
        }
        let n = w.hs_norm();
        if n > 1e-12 {
            ortho.push(w.scaled(1.0 / n));
        }
    }
    Ok(ortho)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn real_mat(rows: &[&[f64]]) -> CMat {
        CMat::from_fn(rows.len(), rows.len(), |a, b| c(rows[a][b]))
    }

    #[test]
    fn projection_examples() {
        let id = CMat::identity(4, 4);
        assert_abs_diff_eq!(project_traceless(&id).unwrap().hs_norm(), 0.0, epsilon = 1e-15);

        let p = project_traceless(&real_mat(&[&[3.0, 0.0], &[0.0, 1.0]])).unwrap();
        assert_abs_diff_eq!(p.matrix()[(0, 0)].re, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.matrix()[(1, 1)].re, -1.0, epsilon = 1e-15);

        let sx = real_mat(&[&[0.0, 1.0], &[1.0, 0.0]]);
        assert_eq!(project_traceless(&sx).unwrap().matrix(), &sx);
    }

    #[test]
    fn projection_is_idempotent_and_rejects_asymmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_generator(5, &mut rng);
        let shifted = a.matrix() + CMat::identity(5, 5) * c(2.5);
        let p = project_traceless(&shifted).unwrap();
        let pp = project_traceless(p.matrix()).unwrap();
        assert!((p.matrix() - pp.matrix()).norm() < 1e-14);
        assert!((p.matrix() - a.matrix()).norm() < 1e-14);

        let bad = real_mat(&[&[0.0, 1.0], &[0.0, 0.0]]);
        assert!(matches!(project_traceless(&bad), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn hs_inner_examples() {
        let z = HermitianTraceless::from_diagonal(&[1.0, -1.0]).unwrap();
        let x = HermitianTraceless::new(real_mat(&[&[0.0, 1.0], &[1.0, 0.0]])).unwrap();
        assert_abs_diff_eq!(hs_inner(&z, &z).unwrap(), 2.0);
        assert_abs_diff_eq!(hs_inner(&z, &x).unwrap(), 0.0);
        let three = HermitianTraceless::zero(3);
        assert!(matches!(hs_inner(&z, &three), Err(Error::DimMismatch { .. })));
    }

    #[test]
    fn exp_examples() {
        let z = HermitianTraceless::from_diagonal(&[1.0, -1.0]).unwrap();
        let g = mat_exp(&z, 2f64.ln());
        assert_abs_diff_eq!(g.matrix()[(0, 0)].re, 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(g.matrix()[(1, 1)].re, 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(g.matrix()[(0, 1)].norm(), 0.0, epsilon = 1e-14);

        let id = mat_exp(&z, 0.0);
        assert!((id.matrix() - CMat::identity(2, 2)).norm() < 1e-15);

        // exp(i σ_x) = cos(1) I + i sin(1) σ_x
        let x = HermitianTraceless::new(real_mat(&[&[0.0, 1.0], &[1.0, 0.0]])).unwrap();
        let u = mat_exp_unitary(&x, 1.0);
        let m = u.matrix();
        assert_abs_diff_eq!(m[(0, 0)].re, 1f64.cos(), epsilon = 1e-14);
        assert_abs_diff_eq!(m[(0, 0)].im, 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(m[(0, 1)].re, 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(m[(0, 1)].im, 1f64.sin(), epsilon = 1e-14);
        assert_abs_diff_eq!(m[(1, 0)].im, 1f64.sin(), epsilon = 1e-14);
        assert!(u.unitarity_defect() < 1e-14);
    }

    #[test]
    fn exp_group_law_and_determinant() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for dim in [2, 3, 6] {
            let a = random_generator(dim, &mut rng);
            let lhs = mat_exp(&a, 0.7);
            let rhs = mat_exp(&a, 0.3).compose(&mat_exp(&a, 0.4));
            assert!((lhs.matrix() - rhs.matrix()).norm() < 1e-12);
            assert!((lhs.determinant().norm() - 1.0).abs() < 1e-9);
            assert!(mat_exp_unitary(&a, 3.1).unitarity_defect() < 1e-12);
        }
    }

    #[test]
    fn unitary_conjugation_preserves_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let a = random_generator(5, &mut rng);
        let u = random_unitary(5, &mut rng);
        let b = a.conjugate_by(&u).unwrap();
        assert_abs_diff_eq!(b.hs_norm(), a.hs_norm(), epsilon = 1e-12);
    }

    #[test]
    fn basis_is_orthonormal() {
        for dim in [2, 3, 5, 8] {
            let basis = lie_basis(dim);
            assert_eq!(basis.len(), dim * dim - 1);
            for (i, a) in basis.iter().enumerate() {
                for (j, b) in basis.iter().enumerate() {
                    let expected = if i == j { 1.0 } else { 0.0 };
                    assert_abs_diff_eq!(hs_inner(a, b).unwrap(), expected, epsilon = 1e-14);
                }
            }
        }
    }

    #[test]
    fn spin_generators() {
        let [_, _, jz] = aut_subalgebra(2);
        let d: Vec<f64> = (0..3).map(|i| jz.matrix()[(i, i)].re).collect();
        assert_eq!(d, vec![-1.0, 0.0, 1.0]);

        for k in [1, 2, 5, 12] {
            let [jx, jy, jz] = aut_subalgebra(k);
            let comm = jx.commutator(&jy);
            assert!((comm - jz.matrix() * I).norm() < 1e-12);
            let comm = jy.commutator(&jz);
            assert!((comm - jx.matrix() * I).norm() < 1e-12);
        }
        // k = 1: half the Pauli matrices, index 0 carrying weight -1/2
        let [jx, jy, _] = aut_subalgebra(1);
        assert_abs_diff_eq!(jx.matrix()[(0, 1)].re, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(jy.matrix()[(1, 0)].im, -0.5, epsilon = 1e-15);
    }

    #[test]
    fn complement_is_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_generator(6, &mut rng);
        let aut = aut_subalgebra(5);
        let p = orthogonal_complement(&a, &aut).unwrap();
        for j in &aut {
            assert_abs_diff_eq!(hs_inner(&p, j).unwrap(), 0.0, epsilon = 1e-12);
        }
    }
}
