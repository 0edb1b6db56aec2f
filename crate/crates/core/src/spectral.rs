// SPDX-License-Identifier: Apache-2.0

//! Tangential and normal parts of the fields `X_A` along the embedded curve,
//! the quadratic form `Q(A, B) = ∫ Re⟨π_N X_A, π_N X_B⟩ ω̃`, and the
//! experiments built on its spectrum.
//!
//! Norms of tangent vectors use the Fubini–Study form of
//! [`crate::projective`], so every `‖·‖²` below carries the factor
//! [`C_G`]. The smallest nonzero eigenvalue is taken on the orthogonal
//! complement of the kernel; at balanced embeddings of CP¹ with `k ≥ 2` that
//! kernel is the three-dimensional image of `su(2)`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{self, C_G, KERNEL_THRESHOLD};
use crate::error::{Error, Result};
use crate::lie::{
    aut_subalgebra, hermitian_eigen, lie_basis, orthogonal_complement, random_generator, CMat, CVec,
    HermitianTraceless,
};
use crate::moment::gram_matrix;
use crate::projective::{ProjectivePoint, TangentAtPoint};
use crate::sections::{
    reduce, reduce_radial, reduce_rings, resolved, sample_at, sqrt_binomials, Chart, CurveSample, QuadratureGrid,
    SectionBasis,
};

/// Orthonormal frame of the curve at one node: the unit lift `u`, the unit
/// tangent `n̂ ⊥ u`, and the tangent `t = P v'/|v|` itself.
struct Frame {
    u: CVec,
    nhat: CVec,
    tangent: CVec,
}

fn frame(s: &CurveSample) -> Frame {
    let norm = s.v.norm();
    let u = s.v.unscale(norm);
    let d = s.dv.unscale(norm);
    let tangent = &d - &u * u.dotc(&d);
    let nhat = tangent.unscale(tangent.norm());
    Frame { u, nhat, tangent }
}

/// Unnormalized `[|X|², |π_T X|², |π_N X|²]` of `X_A` at a unit lift. The
/// normal part is formed explicitly so that the three numbers are
/// computed independently.
fn point_norms(a: &CMat, f: &Frame) -> [f64; 3] {
    let au = a * &f.u;
    let x = f.u.dotc(&au);
    let y = f.nhat.dotc(&au);
    let normal = &au - &f.u * x - &f.nhat * y;
    [au.norm_squared() - x.norm_sqr(), y.norm_sqr(), normal.norm_squared()]
}

fn is_diagonal_matrix(m: &CMat) -> bool {
    (0..m.nrows()).all(|a| (0..m.ncols()).all(|b| a == b || m[(a, b)] == Complex64::new(0.0, 0.0)))
}

fn check_dim(a: &HermitianTraceless, basis: &SectionBasis) -> Result<()> {
    if a.dim() != basis.dim() {
        return Err(Error::DimMismatch {
            expected: basis.dim(),
            got: a.dim(),
        });
    }
    Ok(())
}

/// Split of `X_A` at `v(z)` into the part along the curve and the rest.
///
/// The two classes add up to `X_A` exactly and are orthogonal for the
/// Fubini–Study form.
pub fn tangential_split(
    a: &HermitianTraceless,
    basis: &SectionBasis,
    z: Complex64,
) -> Result<(TangentAtPoint, TangentAtPoint)> {
    check_dim(a, basis)?;
    let sb = sqrt_binomials(basis.k());
    let s = sample_at(basis, &sb, z, 0.0, Chart::South);
    let f = frame(&s);
    let av = a.matrix() * &s.v;
    let tangent_dir = &f.nhat * f.nhat.dotc(&av);
    let normal_dir = &av - &tangent_dir;
    let base = ProjectivePoint::new(s.v.clone())?;
    Ok((
        TangentAtPoint::new(base.clone(), tangent_dir)?,
        TangentAtPoint::new(base, normal_dir)?,
    ))
}

/// `‖A‖²` (Hilbert–Schmidt) and the L² norms of `X_A`, `π_T X_A`, `π_N X_A`
/// against ω̃.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GeneratorNorms {
    pub xi_sq: f64,
    pub x: f64,
    pub tangential: f64,
    pub normal: f64,
}

impl GeneratorNorms {
    /// `|‖X‖² - ‖π_T X‖² - ‖π_N X‖²|` relative to `‖X‖²`.
    pub fn defect(&self) -> f64 {
        let scale = if self.x > 0.0 { self.x } else { 1.0 };
        (self.x - self.tangential - self.normal).abs() / scale
    }
}

pub fn generator_norms(a: &HermitianTraceless, basis: &SectionBasis, grid: &QuadratureGrid) -> Result<GeneratorNorms> {
    check_dim(a, basis)?;
    let m = a.matrix();
    let radial = basis.is_diagonal() && is_diagonal_matrix(m);
    let body = |s: &CurveSample, acc: &mut [f64]| {
        let p = point_norms(m, &frame(s));
        let w = s.mass();
        for (slot, v) in acc.iter_mut().zip(p) {
            *slot += w * v;
        }
    };
    let raw = resolved(grid, |g| {
        Ok(if radial {
            reduce_radial(basis, g, 3, body)
        } else {
            reduce(basis, g, 3, body)
        })
    })?;
    Ok(GeneratorNorms {
        xi_sq: a.hs_norm_sq(),
        x: C_G * raw[0],
        tangential: C_G * raw[1],
        normal: C_G * raw[2],
    })
}

/// `Q(A, A) = ‖π_N X_A‖²`.
pub fn sigma_norm_sq(a: &HermitianTraceless, basis: &SectionBasis, grid: &QuadratureGrid) -> Result<f64> {
    Ok(generator_norms(a, basis, grid)?.normal)
}

/// Nonzero entries of each basis generator.
fn sparse_entries(gens: &[HermitianTraceless]) -> Vec<Vec<(usize, usize, Complex64)>> {
    gens.iter()
        .map(|g| {
            let m = g.matrix();
            let mut out = Vec::new();
            for col in 0..m.ncols() {
                for row in 0..m.nrows() {
                    if m[(row, col)] != Complex64::new(0.0, 0.0) {
                        out.push((row, col, m[(row, col)]));
                    }
                }
            }
            out
        })
        .collect()
}

/// Matrix of `Q` in the orthonormal [`lie_basis`].
///
/// Pointwise, `Re⟨π_N X_i, π_N X_j⟩ = Re u*A_iA_j u - x_i x_j - Re(ȳ_i y_j)`
/// with `x_i = u*A_i u` and `y_i = n̂*A_i u`. The first term integrates to
/// `Re tr(A_i A_j M)` with `M` the Gram matrix; the rest is a sum of rank-3
/// updates, accumulated per ring as one `RᵀR` product.
pub fn q_matrix(basis: &SectionBasis, grid: &QuadratureGrid) -> Result<DMatrix<f64>> {
    let n = basis.dim();
    let gens = lie_basis(n);
    let d = gens.len();
    let sparse = sparse_entries(&gens);
    let gram = gram_matrix(basis, grid)?.gram;

    let products: Vec<CMat> = gens.iter().map(|g| g.matrix() * &gram).collect();
    let mut q = DMatrix::<f64>::zeros(d, d);
    for (i, entries) in sparse.iter().enumerate() {
        for j in 0..d {
            let mut tr = Complex64::new(0.0, 0.0);
            for &(row, col, val) in entries {
                tr += val * products[j][(col, row)];
            }
            q[(i, j)] = tr.re;
        }
    }

    let rank_sum = resolved(grid, |g| {
        Ok(reduce_rings(basis, g, d * d, false, |ring, acc| {
            let mut r = DMatrix::<f64>::zeros(3 * ring.len(), d);
            for (p, s) in ring.iter().enumerate() {
                let f = frame(s);
                let sw = s.mass().sqrt();
                for (i, entries) in sparse.iter().enumerate() {
                    let mut x = Complex64::new(0.0, 0.0);
                    let mut y = Complex64::new(0.0, 0.0);
                    for &(row, col, val) in entries {
                        let t = val * f.u[col];
                        x += f.u[row].conj() * t;
                        y += f.nhat[row].conj() * t;
                    }
                    r[(3 * p, i)] = sw * x.re;
                    r[(3 * p + 1, i)] = sw * y.re;
                    r[(3 * p + 2, i)] = sw * y.im;
                }
            }
            let rtr = r.tr_mul(&r);
            for (slot, v) in acc.iter_mut().zip(rtr.iter()) {
                *slot += v;
            }
        }))
    })?;

    for (slot, v) in q.iter_mut().zip(&rank_sum) {
        *slot = C_G * (*slot - v);
    }
    Ok((&q + q.transpose()) * 0.5)
}

/// Spectrum of `Q` for a diagonal coefficient matrix, block by block.
///
/// Such a curve is invariant under `z ↦ e^{iθ}z`, which acts on `E_ab` with
/// weight `a - b`; `Q` couples only equal weights, and each block needs the
/// radial integrals `F_{(ab),(cd)} = ∫ ū_b (P_N)_{ac} u_d ω̃` at one angle.
/// Weight `±m` pairs `α E_ab + ᾱ E_ba` and contributes the eigenvalues of
/// `C_G/2 · (F_m + conj F_{-m})`, each twice; weight 0 is the real traceless
/// diagonal block.
pub fn q_spectrum_weight_blocks(basis: &SectionBasis, grid: &QuadratureGrid) -> Result<Vec<f64>> {
    if !basis.is_diagonal() {
        return Err(Error::InvalidArgument(
            "weight-block assembly needs a diagonal coefficient matrix".into(),
        ));
    }
    let n = basis.dim();
    // pair lists: weight m >= 0 as (a, a-m), then its transpose for m > 0
    let mut lists: Vec<Vec<(usize, usize)>> = Vec::new();
    for m in 0..n {
        let pos: Vec<(usize, usize)> = (m..n).map(|a| (a, a - m)).collect();
        if m > 0 {
            lists.push(pos.iter().map(|&(a, b)| (b, a)).collect());
        }
        lists.push(pos);
    }
    let offsets: Vec<usize> = lists
        .iter()
        .scan(0usize, |acc, l| {
            let start = *acc;
            *acc += 2 * l.len() * l.len();
            Some(start)
        })
        .collect();
    let len = lists.iter().map(|l| 2 * l.len() * l.len()).sum();

    let flat = resolved(grid, |g| {
        Ok(reduce_radial(basis, g, len, |s, acc| {
            let f = frame(s);
            let w = s.mass();
            let pn = CMat::from_fn(n, n, |a, c| {
                let delta = if a == c { 1.0 } else { 0.0 };
                Complex64::new(delta, 0.0) - f.u[a] * f.u[c].conj() - f.nhat[a] * f.nhat[c].conj()
            });
            for (list, &off) in lists.iter().zip(&offsets) {
                let l = list.len();
                for (p, &(a, b)) in list.iter().enumerate() {
                    let left = f.u[b].conj() * w;
                    for (q, &(c, d)) in list.iter().enumerate() {
                        let val = left * pn[(a, c)] * f.u[d];
                        acc[off + 2 * (p * l + q)] += val.re;
                        acc[off + 2 * (p * l + q) + 1] += val.im;
                    }
                }
            }
        }))
    })?;
    let block = |idx: usize| -> CMat {
        let l = lists[idx].len();
        let off = offsets[idx];
        CMat::from_fn(l, l, |p, q| Complex64::new(flat[off + 2 * (p * l + q)], flat[off + 2 * (p * l + q) + 1]))
    };

    let mut eigenvalues = Vec::with_capacity(n * n - 1);
    let mut idx = 0;
    for m in 0..n {
        if m == 0 {
            let f0 = block(idx).map(|z| z.re);
            idx += 1;
            // orthonormal basis of traceless real diagonals
            let ladder = DMatrix::<f64>::from_fn(n, n - 1, |j, l| {
                let l = l + 1;
                let norm = ((l * (l + 1)) as f64).sqrt();
                if j < l {
                    1.0 / norm
                } else if j == l {
                    -(l as f64) / norm
                } else {
                    0.0
                }
            });
            let restricted = ladder.transpose() * f0 * &ladder;
            let sym = (&restricted + restricted.transpose()) * 0.5;
            eigenvalues.extend(sym.symmetric_eigenvalues().iter().map(|x| C_G * x));
        } else {
            let neg = block(idx);
            let pos = block(idx + 1);
            idx += 2;
            let h = &pos + neg.map(|z| z.conj());
            let h = (&h + h.adjoint()) * Complex64::new(0.5, 0.0);
            for x in hermitian_eigen(&h).0 {
                eigenvalues.push(0.5 * C_G * x);
                eigenvalues.push(0.5 * C_G * x);
            }
        }
    }
    eigenvalues.sort_by(f64::total_cmp);
    Ok(eigenvalues)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Assembly {
    /// Weight blocks for diagonal bases, the full matrix otherwise.
    Auto,
    General,
    WeightBlocks,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QOptions {
    /// Kernel threshold relative to `max(λ_max, 1)`.
    pub threshold: f64,
    pub assembly: Assembly,
    /// Also report the norms of the `su(2)` generators and of the
    /// quadratic direction `remark2_xi`.
    pub generator_norms: bool,
}

impl Default for QOptions {
    fn default() -> Self {
        QOptions {
            threshold: KERNEL_THRESHOLD,
            assembly: Assembly::Auto,
            generator_norms: true,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct NamedNorms {
    pub name: String,
    #[serde(flatten)]
    pub norms: GeneratorNorms,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumReport {
    pub k: usize,
    pub eigenvalues: Vec<f64>,
    pub threshold: f64,
    pub kernel_dim: usize,
    /// Reciprocal of the smallest eigenvalue above the threshold; `None` when
    /// every eigenvalue is in the kernel.
    pub lambda_z: Option<f64>,
    pub assembly: Assembly,
    /// Hilbert–Schmidt norm of the moment map of the basis.
    pub balanced_residual: f64,
    pub norms: Vec<NamedNorms>,
    pub inequality: Option<InequalityReport>,
}

impl SpectrumReport {
    pub fn is_degenerate(&self) -> bool {
        self.lambda_z.is_none()
    }

    /// `Λ_z`, or DegenerateSpectrum.
    pub fn require_lambda(&self) -> Result<f64> {
        self.lambda_z.ok_or(Error::DegenerateSpectrum {
            kernel_dim: self.kernel_dim,
        })
    }
}

/// Balanced residual below which the kernel dimension is asserted.
const BALANCED_FOR_KERNEL: f64 = 1e-9;

/// Spectrum of `Q` with kernel bookkeeping.
///
/// At a balanced basis the kernel must be the `su(2)` image (dimension 3, or
/// all of `su(2)` when `k = 1`); any other count is a KernelMismatch.
pub fn q_gram(basis: &SectionBasis, grid: &QuadratureGrid, opts: &QOptions) -> Result<SpectrumReport> {
    if !(opts.threshold > 0.0) {
        return Err(Error::InvalidArgument(format!("threshold must be positive, got {}", opts.threshold)));
    }
    let assembly = match opts.assembly {
        Assembly::Auto if basis.is_diagonal() => Assembly::WeightBlocks,
        Assembly::Auto => Assembly::General,
        other => other,
    };
    let eigenvalues = match assembly {
        Assembly::WeightBlocks => q_spectrum_weight_blocks(basis, grid)?,
        _ => {
            let q = q_matrix(basis, grid)?;
            let mut ev: Vec<f64> = q.symmetric_eigenvalues().iter().copied().collect();
            ev.sort_by(f64::total_cmp);
            ev
        }
    };
    let largest = eigenvalues.last().copied().unwrap_or(0.0);
    let threshold = opts.threshold * largest.max(1.0);
    let kernel_dim = eigenvalues.iter().filter(|&&x| x < threshold).count();
    let lambda_z = eigenvalues.iter().find(|&&x| x >= threshold).map(|x| 1.0 / x);

    let residual = gram_matrix(basis, grid)?.residual_norm;
    let k = basis.k();
    if residual <= BALANCED_FOR_KERNEL {
        let expected = if k == 1 { (k + 1) * (k + 1) - 1 } else { 3 };
        if kernel_dim != expected {
            return Err(Error::KernelMismatch {
                expected,
                found: kernel_dim,
            });
        }
    }

    let mut norms = Vec::new();
    if opts.generator_norms {
        for (name, g) in ["J_x", "J_y", "J_z"].iter().zip(aut_subalgebra(k)) {
            norms.push(NamedNorms {
                name: name.to_string(),
                norms: generator_norms(&g, basis, grid)?,
            });
        }
        norms.push(NamedNorms {
            name: "remark2_xi".into(),
            norms: generator_norms(&remark2_xi(k), basis, grid)?,
        });
    }
    Ok(SpectrumReport {
        k,
        eigenvalues,
        threshold,
        kernel_dim,
        lambda_z,
        assembly,
        balanced_residual: residual,
        norms,
        inequality: None,
    })
}

/// Diagonal generator `ξ_ii = i² - ki + (k² - k)/6`, orthogonal to `su(2)`.
pub fn remark2_xi(k: usize) -> HermitianTraceless {
    let kf = k as f64;
    let diag: Vec<f64> = (0..=k)
        .map(|i| {
            let i = i as f64;
            i * i - kf * i + (kf * kf - kf) / 6.0
        })
        .collect();
    HermitianTraceless::from_diagonal(&diag).expect("entries sum to zero")
}

#[derive(Debug, Clone, Serialize)]
pub struct InequalityReport {
    pub k: usize,
    pub seed: u64,
    pub samples: usize,
    /// Smallest `c'` with `‖ξ‖² ≤ c'·k·‖X_ξ‖²` over the samples.
    pub c_prime: f64,
    /// Largest relative defect of `‖X‖² = ‖π_T X‖² + ‖π_N X‖²`.
    pub decomposition_defect: f64,
    /// Largest `c` with `c·‖π_T X‖² ≤ k·‖π_N X‖²` over the samples.
    pub c: f64,
    pub remark2: GeneratorNorms,
    /// `k·‖π_T X‖² / ‖π_N X‖²` for the quadratic direction `remark2_xi`.
    pub remark2_tangent_ratio: f64,
}

/// Empirical constants of the norm inequalities over seeded directions
/// orthogonal to `su(2)`, plus the quadratic direction `remark2_xi`.
pub fn inequality_report(
    basis: &SectionBasis,
    grid: &QuadratureGrid,
    samples: usize,
    seed: u64,
) -> Result<InequalityReport> {
    let k = basis.k();
    if k < 2 {
        return Err(Error::InvalidArgument(
            "inequality report needs k >= 2: every direction is an automorphism at k = 1".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let aut = aut_subalgebra(k);
    let mut directions = Vec::with_capacity(samples + 1);
    while directions.len() < samples {
        let p = orthogonal_complement(&random_generator(k + 1, &mut rng), &aut)?;
        let norm = p.hs_norm();
        if norm > 1e-8 {
            directions.push(p.scaled(1.0 / norm));
        }
    }
    let xi = remark2_xi(k);
    directions.push(xi.clone());

    let kf = k as f64;
    let mut c_prime = 0.0f64;
    let mut defect = 0.0f64;
    let mut c = f64::INFINITY;
    let mut remark2 = None;
    for (idx, a) in directions.iter().enumerate() {
        let norms = generator_norms(a, basis, grid)?;
        c_prime = c_prime.max(norms.xi_sq / (kf * norms.x));
        defect = defect.max(norms.defect());
        if norms.tangential > 0.0 {
            c = c.min(kf * norms.normal / norms.tangential);
        }
        if idx == samples {
            remark2 = Some(norms);
        }
    }
    let remark2 = remark2.expect("forced sample is last");
    Ok(InequalityReport {
        k,
        seed,
        samples,
        c_prime,
        decomposition_defect: defect,
        c,
        remark2,
        remark2_tangent_ratio: kf * remark2.tangential / remark2.normal,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PoincareReport {
    /// `∫ f² ω̃` with `f = φ̇` at `t = 0`.
    pub lhs: f64,
    /// `k·∫|∂f|² + (∫ f ω̃)² / k`.
    pub rhs: f64,
    /// `(1/π) ∫ |∂_z̄ f|² dx dy`.
    pub gradient_energy: f64,
    pub mean: f64,
}

impl PoincareReport {
    pub fn ratio(&self) -> f64 {
        if self.rhs > 0.0 {
            self.lhs / self.rhs
        } else {
            0.0
        }
    }
}

/// Both sides of the Poincaré inequality for `f = 2 v*Av / v*v`.
///
/// `∂_z̄ f = 2 t*A u` is used in closed form.
pub fn poincare_check(basis: &SectionBasis, a: &HermitianTraceless, grid: &QuadratureGrid) -> Result<PoincareReport> {
    check_dim(a, basis)?;
    let m = a.matrix();
    let out = resolved(grid, |g| {
        Ok(reduce(basis, g, 3, |s, acc| {
            let fr = frame(s);
            let au = m * &fr.u;
            let f = 2.0 * fr.u.dotc(&au).re;
            let fzbar = fr.tangent.dotc(&au) * 2.0;
            let w = s.mass();
            acc[0] += w * f * f;
            acc[1] += w * f;
            acc[2] += s.area * fzbar.norm_sqr() / std::f64::consts::PI;
        }))
    })?;
    let kf = basis.k() as f64;
    Ok(PoincareReport {
        lhs: out[0],
        rhs: kf * out[2] + out[1] * out[1] / kf,
        gradient_energy: out[2],
        mean: out[1],
    })
}

/// How the grid is chosen for each `k` of an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridPolicy {
    /// Radial nodes `max(64, k + 16)` instead of 64, enough for the
    /// polynomial degree `2k + 2` of balanced integrands.
    pub scaling: bool,
    pub radial: Option<usize>,
    pub angular: Option<usize>,
    pub tol: f64,
}

impl Default for GridPolicy {
    fn default() -> Self {
        GridPolicy {
            scaling: false,
            radial: None,
            angular: None,
            tol: config::DEFAULT_QUAD_TOL,
        }
    }
}

impl GridPolicy {
    pub fn scaling() -> Self {
        GridPolicy {
            scaling: true,
            ..GridPolicy::default()
        }
    }

    pub fn grid(&self, k: usize) -> Result<QuadratureGrid> {
        let radial = self.radial.unwrap_or(if self.scaling {
            config::scaling_radial(k)
        } else {
            config::DEFAULT_RADIAL
        });
        QuadratureGrid::new(radial, self.angular.unwrap_or(config::default_angular(k)), self.tol)
    }
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() < 2 || xs.len() != ys.len() {
        return None;
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Least-squares `(a, b)` in `y ≈ a·k^p + b·k^{p-1}`.
pub fn fit_leading(ks: &[f64], ys: &[f64], p: i32) -> Option<(f64, f64)> {
    if ks.len() < 2 || ks.len() != ys.len() {
        return None;
    }
    let m = DMatrix::<f64>::from_fn(ks.len(), 2, |r, col| ks[r].powi(p - col as i32));
    let y = nalgebra::DVector::<f64>::from_column_slice(ys);
    let sol = m.svd(true, true).solve(&y, 1e-300).ok()?;
    Some((sol[0], sol[1]))
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingRow {
    pub k: usize,
    pub lambda_z: Option<f64>,
    pub lambda_over_k2: Option<f64>,
    pub lambda_over_k4: Option<f64>,
    /// Slope of `log Λ_z` over the successful rows up to this one.
    pub slope_running: Option<f64>,
    pub kernel_dim: Option<usize>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingTable {
    pub seed: u64,
    pub rows: Vec<ScalingRow>,
    pub slope: Option<f64>,
    pub lambda_over_k4_decreasing: bool,
    pub remark2: Option<Remark2Table>,
}

/// `Λ_z` of the balanced embedding for every `k` in `ks`.
///
/// A failure at one `k` is recorded in its row and the run continues. The
/// balanced embedding is deterministic; `seed` is carried into the report.
pub fn scaling_experiment(ks: &[usize], policy: &GridPolicy, seed: u64) -> Result<ScalingTable> {
    if ks.is_empty() || ks.iter().any(|&k| !(2..=64).contains(&k)) {
        return Err(Error::InvalidArgument("scaling needs k values in 2..=64".into()));
    }
    let opts = QOptions {
        generator_norms: false,
        ..QOptions::default()
    };
    let mut rows = Vec::with_capacity(ks.len());
    let mut good_k = Vec::new();
    let mut good_l = Vec::new();
    for &k in ks {
        let outcome = policy
            .grid(k)
            .and_then(|g| q_gram(&SectionBasis::identity(k), &g, &opts))
            .and_then(|r| Ok((r.require_lambda()?, r.kernel_dim)));
        let kf = k as f64;
        match outcome {
            Ok((lambda, kernel)) => {
                good_k.push(kf);
                good_l.push(lambda);
                rows.push(ScalingRow {
                    k,
                    lambda_z: Some(lambda),
                    lambda_over_k2: Some(lambda / kf.powi(2)),
                    lambda_over_k4: Some(lambda / kf.powi(4)),
                    slope_running: log_log_slope(&good_k, &good_l),
                    kernel_dim: Some(kernel),
                    error: None,
                });
            }
            Err(e) => rows.push(ScalingRow {
                k,
                lambda_z: None,
                lambda_over_k2: None,
                lambda_over_k4: None,
                slope_running: None,
                kernel_dim: None,
                error: Some(e.to_string()),
            }),
        }
    }
    let quartic: Vec<f64> = rows.iter().filter_map(|r| r.lambda_over_k4).collect();
    Ok(ScalingTable {
        seed,
        slope: log_log_slope(&good_k, &good_l),
        lambda_over_k4_decreasing: quartic.windows(2).all(|w| w[1] < w[0]),
        rows,
        remark2: None,
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Remark2Row {
    pub k: usize,
    #[serde(flatten)]
    pub norms: GeneratorNorms,
}

#[derive(Debug, Clone, Serialize)]
pub struct Remark2Fit {
    pub quantity: String,
    pub power: i32,
    /// `a` in `a·k^p + b·k^{p-1}`, in the units of the table.
    pub leading: f64,
    pub subleading: f64,
    /// `leading` with the Fubini–Study factor divided out where present.
    pub normalized: f64,
    pub target: f64,
    pub rel_err: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Remark2Table {
    pub c_g: f64,
    pub rows: Vec<Remark2Row>,
    pub fits: Vec<Remark2Fit>,
    /// Slope of `log ‖π_N X_ξ‖²` against `log k`.
    pub normal_exponent: Option<f64>,
}

/// Norms of the quadratic direction `remark2_xi` on balanced embeddings, with fits of the
/// leading coefficients `1/180 k⁵` for `‖ξ‖²` and `1/30 k⁴` for `‖X_ξ‖²` and
/// `‖π_T X_ξ‖²`.
pub fn remark2_table(ks: &[usize], policy: &GridPolicy) -> Result<Remark2Table> {
    if ks.is_empty() || ks.contains(&0) {
        return Err(Error::InvalidArgument("remark2 needs positive k values".into()));
    }
    let mut rows = Vec::with_capacity(ks.len());
    for &k in ks {
        let grid = policy.grid(k)?;
        rows.push(Remark2Row {
            k,
            norms: generator_norms(&remark2_xi(k), &SectionBasis::identity(k), &grid)?,
        });
    }
    let kf: Vec<f64> = rows.iter().map(|r| r.k as f64).collect();
    let mut fits = Vec::new();
    type Spec = (&'static str, i32, f64, f64, fn(&GeneratorNorms) -> f64);
    let specs: [Spec; 3] = [
        ("xi_sq", 5, 1.0, 1.0 / 180.0, |n| n.xi_sq),
        ("x", 4, C_G, 1.0 / 30.0, |n| n.x),
        ("tangential", 4, C_G, 1.0 / 30.0, |n| n.tangential),
    ];
    for (name, p, unit, target, get) in specs {
        let ys: Vec<f64> = rows.iter().map(|r| get(&r.norms)).collect();
        if let Some((a, b)) = fit_leading(&kf, &ys, p) {
            let normalized = a / unit;
            fits.push(Remark2Fit {
                quantity: name.into(),
                power: p,
                leading: a,
                subleading: b,
                normalized,
                target,
                rel_err: (normalized - target).abs() / target,
            });
        }
    }
    let normals: Vec<f64> = rows.iter().map(|r| r.norms.normal).collect();
    Ok(Remark2Table {
        c_g: C_G,
        normal_exponent: log_log_slope(&kf, &normals),
        rows,
        fits,
    })
}
