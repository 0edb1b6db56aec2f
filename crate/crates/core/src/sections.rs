// SPDX-License-Identifier: Apache-2.0

//! Sections of O(k) on CP¹ and quadrature against the induced area form.
//!
//! A basis is stored as coefficient rows in the reference frame
//! `e_i(z) = √binom(k,i) z^i`, so the identity matrix is the balanced
//! basis. Integrals run over a Gauss–Legendre rule in `u = r²/(1+r²)` times
//! a uniform angular rule, in either affine chart.

use std::path::Path;

use nalgebra::SVD;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{self, BASIS_SINGULAR_RATIO};
use crate::error::{Error, Result};
use crate::lie::{c, CMat, CVec, GroupElement};

#[derive(Debug, Clone, PartialEq)]
pub struct SectionBasis {
    k: usize,
    coeffs: CMat,
}

impl SectionBasis {
    /// Rows of `coeffs` are sections in the reference frame. Rejects
    /// matrices whose singular values spread more than 1e12.
    pub fn new(k: usize, coeffs: CMat) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidArgument("k must be positive".into()));
        }
        let dim = k + 1;
        if coeffs.nrows() != dim || coeffs.ncols() != dim {
            return Err(Error::DimMismatch {
                expected: dim,
                got: if coeffs.nrows() != dim { coeffs.nrows() } else { coeffs.ncols() },
            });
        }
        if coeffs.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidArgument("coefficients must be finite".into()));
        }
        let sv = SVD::new(coeffs.clone(), false, false).singular_values;
        let largest = sv.max();
        let smallest = sv.min();
        let ratio = if largest > 0.0 { smallest / largest } else { 0.0 };
        if ratio <= BASIS_SINGULAR_RATIO {
            return Err(Error::BasisSingular { ratio });
        }
        Ok(SectionBasis { k, coeffs })
    }

    /// Balanced reference basis `e_0, …, e_k`.
    pub fn identity(k: usize) -> Self {
        assert!(k >= 1, "k must be positive");
        SectionBasis {
            k,
            coeffs: CMat::identity(k + 1, k + 1),
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.k + 1
    }

    pub fn coeffs(&self) -> &CMat {
        &self.coeffs
    }

    /// `g · coeffs`.
    pub fn transformed(&self, g: &GroupElement) -> Result<SectionBasis> {
        if g.dim() != self.dim() {
            return Err(Error::DimMismatch {
                expected: self.dim(),
                got: g.dim(),
            });
        }
        SectionBasis::new(self.k, g.matrix() * &self.coeffs)
    }

    pub fn left_mul(&self, m: &CMat) -> Result<SectionBasis> {
        SectionBasis::new(self.k, m * &self.coeffs)
    }

    pub fn scaled(&self, s: Complex64) -> Result<SectionBasis> {
        SectionBasis::new(self.k, &self.coeffs * s)
    }

    /// Diagonal coefficient matrices keep the rotation symmetry `z ↦ e^{iθ}z`.
    pub fn is_diagonal(&self) -> bool {
        let scale = self.coeffs.iter().fold(0.0f64, |a, z| a.max(z.norm()));
        let dim = self.dim();
        (0..dim).all(|a| (0..dim).all(|b| a == b || self.coeffs[(a, b)].norm() <= 1e-15 * scale))
    }

    pub fn to_json(&self) -> BasisFile {
        BasisFile {
            k: self.k,
            coeffs: (0..self.dim())
                .map(|r| {
                    (0..self.dim())
                        .map(|col| JsonComplex::from(self.coeffs[(r, col)]))
                        .collect()
                })
                .collect(),
        }
    }

    pub fn from_json(file: &BasisFile) -> Result<SectionBasis> {
        let dim = file.k + 1;
        if file.coeffs.len() != dim || file.coeffs.iter().any(|row| row.len() != dim) {
            return Err(Error::Parse(format!(
                "basis file for k = {} needs a {dim}×{dim} coefficient matrix",
                file.k
            )));
        }
        let m = CMat::from_fn(dim, dim, |r, col| file.coeffs[r][col].into());
        SectionBasis::new(file.k, m)
    }

    pub fn read(path: &Path) -> Result<SectionBasis> {
        let text = std::fs::read_to_string(path)?;
        let file: BasisFile = serde_json::from_str(&text)?;
        SectionBasis::from_json(&file)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.to_json())?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JsonComplex {
    pub re: f64,
    pub im: f64,
}

impl From<Complex64> for JsonComplex {
    fn from(z: Complex64) -> Self {
        JsonComplex { re: z.re, im: z.im }
    }
}

impl From<JsonComplex> for Complex64 {
    fn from(z: JsonComplex) -> Self {
        Complex64::new(z.re, z.im)
    }
}

/// On-disk basis: `{"k": int, "coeffs": [[{"re","im"}, …], …]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisFile {
    pub k: usize,
    pub coeffs: Vec<Vec<JsonComplex>>,
}

pub fn matrix_to_json(m: &CMat) -> Vec<Vec<JsonComplex>> {
    (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|col| m[(r, col)].into()).collect())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Chart {
    /// Affine coordinate `z`.
    South,
    /// Affine coordinate `w = 1/z`.
    North,
}

/// Grid configuration as read from JSON: `{"radial", "angular", "tol"}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub radial: usize,
    pub angular: usize,
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureGrid {
    radial: usize,
    angular: usize,
    tol: f64,
    chart: Chart,
    self_check: bool,
    /// Gauss–Legendre nodes on (0,1) in `u = r²/(1+r²)`.
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for j in 2..=n {
        let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
        p0 = p1;
        p1 = p2;
    }
    (p1, n as f64 * (x * p1 - p0) / (x * x - 1.0))
}

/// Gauss–Legendre rule mapped to (0,1), nodes ascending.
///
/// Nodes start from the eigenvalues of the Jacobi matrix and are polished
/// by Newton steps on `P_n`; weights use `2 / ((1-x²) P_n'(x)²)`.
fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    let jacobi = nalgebra::DMatrix::<f64>::from_fn(n, n, |i, j| {
        let m = i.max(j);
        if i.abs_diff(j) == 1 {
            m as f64 / ((4 * m * m - 1) as f64).sqrt()
        } else {
            0.0
        }
    });
    let mut xs: Vec<f64> = jacobi.symmetric_eigenvalues().iter().copied().collect();
    xs.sort_by(f64::total_cmp);
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for mut x in xs {
        for _ in 0..3 {
            let (p, dp) = legendre(n, x);
            x -= p / dp;
        }
        let (_, dp) = legendre(n, x);
        nodes.push(0.5 * (x + 1.0));
        weights.push(1.0 / ((1.0 - x * x) * dp * dp));
    }
    (nodes, weights)
}

impl QuadratureGrid {
    pub fn new(radial: usize, angular: usize, tol: f64) -> Result<Self> {
        if radial < 2 || angular < 3 {
            return Err(Error::InvalidArgument(format!(
                "grid needs at least 2 radial and 3 angular nodes, got {radial}×{angular}"
            )));
        }
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(Error::InvalidArgument(format!("grid tolerance must be positive, got {tol}")));
        }
        let (nodes, weights) = gauss_legendre_unit(radial);
        Ok(QuadratureGrid {
            radial,
            angular,
            tol,
            chart: Chart::South,
            self_check: true,
            nodes,
            weights,
        })
    }

    /// 64 radial nodes and `max(64, 4k+8)` angles.
    pub fn for_k(k: usize) -> Self {
        QuadratureGrid::new(config::DEFAULT_RADIAL, config::default_angular(k), config::DEFAULT_QUAD_TOL)
            .expect("default grid is valid")
    }

    pub fn from_config(cfg: &GridConfig) -> Result<Self> {
        QuadratureGrid::new(cfg.radial, cfg.angular, cfg.tol)
    }

    pub fn config(&self) -> GridConfig {
        GridConfig {
            radial: self.radial,
            angular: self.angular,
            tol: self.tol,
        }
    }

    pub fn with_chart(mut self, chart: Chart) -> Self {
        self.chart = chart;
        self
    }

    /// Disables the doubled-grid resolution check.
    pub fn with_self_check(mut self, on: bool) -> Self {
        self.self_check = on;
        self
    }

    pub fn radial(&self) -> usize {
        self.radial
    }

    pub fn angular(&self) -> usize {
        self.angular
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn chart(&self) -> Chart {
        self.chart
    }

    pub fn self_check(&self) -> bool {
        self.self_check
    }

    pub fn doubled(&self) -> QuadratureGrid {
        QuadratureGrid::new(2 * self.radial, 2 * self.angular, self.tol)
            .expect("doubling a valid grid")
            .with_chart(self.chart)
            .with_self_check(false)
    }

    /// Sum of the angular weights; 2π by construction.
    pub fn angular_weight_sum(&self) -> f64 {
        let w = std::f64::consts::TAU / self.angular as f64;
        (0..self.angular).map(|_| w).sum()
    }

    /// ∫ ω_FS over the sphere using the round density `1/(π(1+r²)²)`.
    pub fn unit_mass(&self) -> f64 {
        // in u the round density times the area element is du dθ / (2π)
        let radial: f64 = self.weights.iter().sum();
        radial * self.angular_weight_sum() / std::f64::consts::TAU
    }

    /// Quadrature nodes of one ring: local chart coordinate and area weight
    /// (`dx dy` in that chart).
    fn ring(&self, j: usize) -> impl Iterator<Item = (Complex64, f64)> + '_ {
        let u = self.nodes[j];
        let r = (u / (1.0 - u)).sqrt();
        let dtheta = std::f64::consts::TAU / self.angular as f64;
        // r dr dθ = du dθ / (2 (1-u)²)
        let area = self.weights[j] * dtheta / (2.0 * (1.0 - u) * (1.0 - u));
        (0..self.angular).map(move |m| (Complex64::from_polar(r, dtheta * m as f64), area))
    }
}

/// `√binom(k, i)` for `i = 0..=k`.
pub(crate) fn sqrt_binomials(k: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(k + 1);
    let mut b = 1.0f64;
    for i in 0..=k {
        out.push(b.sqrt());
        b = b * (k - i) as f64 / (i + 1) as f64;
    }
    out
}

/// Reference frame `m_i(z) = √binom(k,i) z^i` and its derivative, both
/// multiplied by `(1+|z|²)^{-k/2}`; the common real factor leaves the point
/// and the tangent class unchanged and keeps large `k` in range.
pub(crate) fn reference_frame(k: usize, sb: &[f64], z: Complex64, chart: Chart) -> (CVec, CVec) {
    let s = (1.0 + z.norm_sqr()).sqrt().recip();
    let a = z * s;
    let mut apow = vec![c(1.0); k + 1];
    let mut bpow = vec![1.0; k + 2];
    for i in 1..=k {
        apow[i] = apow[i - 1] * a;
    }
    for i in 1..=k + 1 {
        bpow[i] = bpow[i - 1] * s;
    }
    let mut m = CVec::zeros(k + 1);
    let mut dm = CVec::zeros(k + 1);
    for i in 0..=k {
        // exponent of the local coordinate carried by e_i in this chart
        let e = match chart {
            Chart::South => i,
            Chart::North => k - i,
        };
        m[i] = apow[e] * bpow[k - e] * sb[i];
        if e > 0 {
            dm[i] = apow[e - 1] * bpow[k - e + 1] * (sb[i] * e as f64);
        }
    }
    (m, dm)
}

/// A sample of the embedded curve at one quadrature node.
#[derive(Debug, Clone)]
pub struct CurveSample {
    /// Point in the south affine coordinate (`1/w` for north-chart nodes).
    pub z: Complex64,
    /// Homogeneous coordinates `v = B m` of the image point.
    pub v: CVec,
    /// Derivative of `v` along the local chart coordinate.
    pub dv: CVec,
    /// Quadrature weight times `dx dy` of the local chart.
    pub area: f64,
}

impl CurveSample {
    /// `(|v|²|v'|² - |v*v'|²) / |v|⁴ = ∂∂̄ log|v|²`.
    pub fn curve_speed_sq(&self) -> f64 {
        let vv = self.v.norm_squared();
        let dd = self.dv.norm_squared();
        let vd = self.v.dotc(&self.dv).norm_sqr();
        ((vv * dd - vd) / (vv * vv)).max(0.0)
    }

    /// Density of the induced form in the local chart: `(1/π) ∂∂̄ log Σ|s_j|²`.
    pub fn density(&self) -> f64 {
        self.curve_speed_sq() / std::f64::consts::PI
    }

    /// Quadrature weight of ω̃ at this node.
    pub fn mass(&self) -> f64 {
        self.area * self.density()
    }
}

pub(crate) fn sample_at(basis: &SectionBasis, sb: &[f64], zeta: Complex64, area: f64, chart: Chart) -> CurveSample {
    let (m, dm) = reference_frame(basis.k, sb, zeta, chart);
    let z = match chart {
        Chart::South => zeta,
        Chart::North => zeta.inv(),
    };
    CurveSample {
        z,
        v: basis.coeffs() * m,
        dv: basis.coeffs() * dm,
        area,
    }
}

fn neumaier_add(sum: &mut [f64], comp: &mut [f64], x: &[f64]) {
    for ((s, c), &v) in sum.iter_mut().zip(comp.iter_mut()).zip(x) {
        let t = *s + v;
        if s.abs() >= v.abs() {
            *c += (*s - t) + v;
        } else {
            *c += (v - t) + *s;
        }
        *s = t;
    }
}

fn ring_samples(basis: &SectionBasis, sb: &[f64], grid: &QuadratureGrid, j: usize, radial_only: bool) -> Vec<CurveSample> {
    if radial_only {
        let (zeta, area) = grid.ring(j).next().expect("non-empty ring");
        vec![sample_at(basis, sb, zeta, area * grid.angular as f64, grid.chart)]
    } else {
        grid.ring(j)
            .map(|(zeta, area)| sample_at(basis, sb, zeta, area, grid.chart))
            .collect()
    }
}

/// Accumulates `f` ring by ring into a flat buffer of length `len`.
///
/// Rings are evaluated in parallel; ring partials are combined in ring
/// order with compensated summation, so results are bit-reproducible
/// regardless of the worker count. With `radial_only`, each ring is
/// represented by its first node carrying the weight of the whole ring,
/// which is exact for integrands that do not depend on the angle.
pub(crate) fn reduce_rings<F>(basis: &SectionBasis, grid: &QuadratureGrid, len: usize, radial_only: bool, f: F) -> Vec<f64>
where
    F: Fn(&[CurveSample], &mut [f64]) + Sync,
{
    let sb = sqrt_binomials(basis.k);
    let partials: Vec<Vec<f64>> = (0..grid.radial)
        .into_par_iter()
        .map(|j| {
            let mut acc = vec![0.0; len];
            f(&ring_samples(basis, &sb, grid, j, radial_only), &mut acc);
            acc
        })
        .collect();
    let mut sum = vec![0.0; len];
    let mut comp = vec![0.0; len];
    for p in &partials {
        neumaier_add(&mut sum, &mut comp, p);
    }
    sum.iter().zip(&comp).map(|(s, c)| s + c).collect()
}

/// [`reduce_rings`] with a per-node accumulator over the full grid.
pub(crate) fn reduce<F>(basis: &SectionBasis, grid: &QuadratureGrid, len: usize, f: F) -> Vec<f64>
where
    F: Fn(&CurveSample, &mut [f64]) + Sync,
{
    reduce_rings(basis, grid, len, false, |ring, acc| ring.iter().for_each(|s| f(s, acc)))
}

/// [`reduce`] over one node per ring; see [`reduce_rings`].
pub(crate) fn reduce_radial<F>(basis: &SectionBasis, grid: &QuadratureGrid, len: usize, f: F) -> Vec<f64>
where
    F: Fn(&CurveSample, &mut [f64]) + Sync,
{
    reduce_rings(basis, grid, len, true, |ring, acc| ring.iter().for_each(|s| f(s, acc)))
}

/// `f` at every node, rings in order and angles in order within a ring.
pub(crate) fn node_values<F>(basis: &SectionBasis, grid: &QuadratureGrid, f: F) -> Vec<f64>
where
    F: Fn(&CurveSample) -> f64 + Sync,
{
    let sb = sqrt_binomials(basis.k);
    let rings: Vec<Vec<f64>> = (0..grid.radial)
        .into_par_iter()
        .map(|j| {
            grid.ring(j)
                .map(|(zeta, area)| f(&sample_at(basis, &sb, zeta, area, grid.chart)))
                .collect()
        })
        .collect();
    rings.concat()
}

/// Runs `eval` on `grid` and, when the grid's self-check is on, on the
/// doubled grid; fails if any component moves by more than
/// `tol · max(1, max|value|)`. Returns the fine-grid result when checked.
pub(crate) fn resolved<F>(grid: &QuadratureGrid, eval: F) -> Result<Vec<f64>>
where
    F: Fn(&QuadratureGrid) -> Result<Vec<f64>>,
{
    let coarse = eval(grid)?;
    if !grid.self_check {
        return Ok(coarse);
    }
    let fine = eval(&grid.doubled())?;
    let scale = fine.iter().fold(1.0f64, |a, x| a.max(x.abs()));
    let change = coarse
        .iter()
        .zip(&fine)
        .fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
    if !(change <= grid.tol * scale) {
        return Err(Error::QuadratureUnderResolved {
            change: change / scale,
            tol: grid.tol,
        });
    }
    Ok(coarse)
}

/// Homogeneous coordinates `v(z) = B · m(z)` with `m_i = √binom(k,i) z^i`.
pub fn evaluate_sections(basis: &SectionBasis, z: Complex64) -> CVec {
    let sb = sqrt_binomials(basis.k);
    let mut pow = c(1.0);
    let m = CVec::from_fn(basis.dim(), |i, _| {
        let out = pow * sb[i];
        pow *= z;
        out
    });
    basis.coeffs() * m
}

/// Density `λ(z) = (1/π) ∂_z∂_z̄ log Σ|s_j(z)|²` of the induced form in the
/// south chart, from the closed-form derivative of the log.
pub fn induced_metric_density(basis: &SectionBasis, z: Complex64) -> f64 {
    let sb = sqrt_binomials(basis.k);
    // unscaled frame: the density is chart-coordinate dependent, not
    // representative dependent, so the (1+|z|²) factor is harmless
    sample_at(basis, &sb, z, 0.0, Chart::South).density()
}

/// `∫ f ω̃` with `f` given in the south coordinate.
pub fn integrate<F>(f: F, basis: &SectionBasis, grid: &QuadratureGrid) -> Result<Complex64>
where
    F: Fn(Complex64) -> Complex64 + Sync,
{
    let out = resolved(grid, |g| {
        Ok(reduce(basis, g, 2, |s, acc| {
            let w = s.mass();
            let val = f(s.z);
            acc[0] += w * val.re;
            acc[1] += w * val.im;
        }))
    })?;
    Ok(Complex64::new(out[0], out[1]))
}

/// Total mass `∫ ω̃`; equals `k` for every basis.
pub fn total_mass(basis: &SectionBasis, grid: &QuadratureGrid) -> Result<f64> {
    Ok(integrate(|_| c(1.0), basis, grid)?.re)
}

/// Exact `a/b` in lowest terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rational {
    pub num: u128,
    pub den: u128,
}

impl Rational {
    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

/// `∫₀^∞ r^a / (1+r)^b dr = a!(b-a-2)!/(b-1)! = 1 / ((b-1)·binom(b-2, a))`.
pub fn beta_oracle(a: u32, b: u32) -> Result<Rational> {
    if b < a + 2 {
        return Err(Error::DivergentIntegral { a, b });
    }
    let n = (b - 2) as u128;
    let a = a as u128;
    let mut binom: u128 = 1;
    for i in 0..a.min(n - a) {
        binom = binom * (n - i) / (i + 1);
    }
    Ok(Rational {
        num: 1,
        den: (b as u128 - 1) * binom,
    })
}
