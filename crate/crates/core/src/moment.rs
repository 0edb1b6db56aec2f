// SPDX-License-Identifier: Apache-2.0

//! Gram matrix of a basis in its own induced metric, and the moment map.
//!
//! The pointwise norms `|s_α|²/Σ|s_j|²` always sum to one, so the only
//! balancing condition left to measure is that the Gram matrix be scalar.

use serde::Serialize;

use crate::error::Result;
use crate::lie::{hermitian_eigen, CMat, HermitianTraceless};
use crate::sections::{matrix_to_json, node_values, reduce, resolved, JsonComplex, QuadratureGrid, SectionBasis};

#[derive(Debug, Clone)]
pub struct GramReport {
    pub k: usize,
    /// `M_αβ = ∫ s_α s̄_β / Σ|s_j|² ω̃`.
    pub gram: CMat,
    /// `trace(M) / (k+1)`.
    pub scalar_part: f64,
    pub traceless_part: HermitianTraceless,
    pub residual_norm: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GramReportJson {
    pub k: usize,
    #[serde(rename = "D")]
    pub d: f64,
    #[serde(rename = "E_hs_norm")]
    pub e_hs_norm: f64,
    pub gram: Vec<Vec<JsonComplex>>,
}

impl GramReport {
    pub fn to_json(&self) -> GramReportJson {
        GramReportJson {
            k: self.k,
            d: self.scalar_part,
            e_hs_norm: self.residual_norm,
            gram: matrix_to_json(&self.gram),
        }
    }

    pub fn trace(&self) -> f64 {
        self.gram.trace().re
    }

    pub fn min_eigenvalue(&self) -> f64 {
        hermitian_eigen(&self.gram).0[0]
    }
}

/// Upper triangle of `v v* / |v|²` weighted by ω̃, packed as (re, im) pairs.
fn gram_raw(basis: &SectionBasis, grid: &QuadratureGrid) -> Result<CMat> {
    let n = basis.dim();
    let flat = resolved(grid, |g| {
        Ok(reduce(basis, g, 2 * n * n, |s, acc| {
            let w = s.mass() / s.v.norm_squared();
            for a in 0..n {
                for b in a..n {
                    let z = s.v[a] * s.v[b].conj() * w;
                    acc[2 * (a * n + b)] += z.re;
                    acc[2 * (a * n + b) + 1] += z.im;
                }
            }
        }))
    })?;
    let mut m = CMat::zeros(n, n);
    for a in 0..n {
        for b in a..n {
            let z = num_complex::Complex64::new(flat[2 * (a * n + b)], flat[2 * (a * n + b) + 1]);
            m[(a, b)] = z;
            m[(b, a)] = z.conj();
        }
    }
    for a in 0..n {
        m[(a, a)].im = 0.0;
    }
    Ok(m)
}

pub fn gram_matrix(basis: &SectionBasis, grid: &QuadratureGrid) -> Result<GramReport> {
    let gram = gram_raw(basis, grid)?;
    let n = basis.dim();
    let d = gram.trace().re / n as f64;
    let mut e = gram.clone();
    for a in 0..n {
        e[(a, a)] -= d;
    }
    let traceless_part = HermitianTraceless::new(e)?;
    let residual_norm = traceless_part.hs_norm();
    Ok(GramReport {
        k: basis.k(),
        gram,
        scalar_part: d,
        traceless_part,
        residual_norm,
    })
}

/// Traceless part of the Gram matrix, in the hermitian picture.
pub fn moment_map(basis: &SectionBasis, grid: &QuadratureGrid) -> Result<HermitianTraceless> {
    Ok(gram_matrix(basis, grid)?.traceless_part)
}

/// Hilbert–Schmidt norm of the moment map.
///
/// This measures only whether the Gram matrix is scalar: the pointwise
/// condition `Σ|s_j|² = 1` holds identically for the induced metric.
pub fn balanced_residual(basis: &SectionBasis, grid: &QuadratureGrid) -> Result<f64> {
    Ok(gram_matrix(basis, grid)?.residual_norm)
}

/// Extremes over the grid nodes of `λ_B / λ_identity`, the ratio of the
/// induced density to `k` times the round one.
///
/// Only the metric-equivalence part of bounded geometry is checked; no
/// derivative norms of `ω̃ - ω̃₀` are computed.
pub fn r_bounded_diagnostic(basis: &SectionBasis, grid: &QuadratureGrid) -> (f64, f64) {
    let reference = SectionBasis::identity(basis.k());
    let lam = node_densities(basis, grid);
    let lam0 = node_densities(&reference, grid);
    lam.iter()
        .zip(&lam0)
        .map(|(a, b)| a / b)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r), hi.max(r)))
}

/// Chart density at every grid node, in node order.
fn node_densities(basis: &SectionBasis, grid: &QuadratureGrid) -> Vec<f64> {
    node_values(basis, grid, |s| s.curve_speed_sq())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lie::{c, fixed_generator, mat_exp, mat_exp_unitary, random_generator, random_unitary};
    use crate::lie::GroupElement;
    use approx::assert_abs_diff_eq;
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gram_examples() {
        for k in [1, 2, 5] {
            let g = gram_matrix(&SectionBasis::identity(k), &QuadratureGrid::for_k(k)).unwrap();
            let expected = k as f64 / (k + 1) as f64;
            assert!((&g.gram - CMat::identity(k + 1, k + 1) * c(expected)).norm() < 1e-12);
            assert_abs_diff_eq!(g.scalar_part, expected, epsilon = 1e-12);
            assert!(g.residual_norm <= 1e-9);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let u = GroupElement::from_matrix(random_unitary(4, &mut rng)).unwrap();
        let b = SectionBasis::identity(3).transformed(&u).unwrap();
        let g = gram_matrix(&b, &QuadratureGrid::for_k(3)).unwrap();
        assert!((&g.gram - CMat::identity(4, 4) * c(0.75)).norm() < 1e-10);
    }

    #[test]
    fn residual_golden_values() {
        // reference values from an independent numpy evaluation on the same grid
        for (k, expected) in [(2, 0.0645826116660862), (4, 0.12528398630914087)] {
            let g = mat_exp(&fixed_generator(k + 1, 0.0), 0.1);
            let b = SectionBasis::identity(k).transformed(&g).unwrap();
            let r = balanced_residual(&b, &QuadratureGrid::for_k(k)).unwrap();
            assert!((r - expected).abs() <= 1e-10 * expected, "k={k}: {r}");
        }
    }

    #[test]
    fn first_order_perturbation() {
        let k = 4;
        let a = fixed_generator(k + 1, 0.3);
        let grid = QuadratureGrid::for_k(k);
        let r = |d: f64| {
            let b = SectionBasis::identity(k).transformed(&mat_exp(&a, d)).unwrap();
            balanced_residual(&b, &grid).unwrap()
        };
        let (r1, r2) = (r(1e-3), r(2e-3));
        assert!(r1 > 1e-6);
        assert!((r2 / r1 - 2.0).abs() < 1e-2);
    }

    #[test]
    fn trace_equivariance_and_scale() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..6 {
            let k = rng.random_range(1..=6);
            let grid = QuadratureGrid::for_k(k);
            let b = SectionBasis::identity(k)
                .transformed(&mat_exp(&random_generator(k + 1, &mut rng), 0.4))
                .unwrap();
            let g = gram_matrix(&b, &grid).unwrap();
            assert_abs_diff_eq!(g.trace(), k as f64, epsilon = 5e-10);
            assert!(g.min_eigenvalue() > 0.0);

            let u = random_unitary(k + 1, &mut rng);
            let ub = b.left_mul(&u).unwrap();
            let e = moment_map(&b, &grid).unwrap();
            let ue = moment_map(&ub, &grid).unwrap();
            assert!((ue.matrix() - &u * e.matrix() * u.adjoint()).norm() <= 1e-8);

            let scaled = b.scaled(Complex64::new(0.3, -2.0)).unwrap();
            let es = moment_map(&scaled, &grid).unwrap();
            assert!((es.matrix() - e.matrix()).norm() <= 1e-12);
        }
    }

    #[test]
    fn r_bounded_examples() {
        let k = 2;
        let grid = QuadratureGrid::for_k(k);
        let (lo, hi) = r_bounded_diagnostic(&SectionBasis::identity(k), &grid);
        assert_abs_diff_eq!(lo, 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(hi, 1.0, epsilon = 1e-10);

        // unitary change of basis is an isometry of the ambient metric, so the
        // induced density is unchanged
        let u = mat_exp_unitary(&fixed_generator(3, 1.0), 2.0);
        let (lo, hi) = r_bounded_diagnostic(&SectionBasis::identity(k).transformed(&u).unwrap(), &grid);
        assert_abs_diff_eq!(lo, 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(hi, 1.0, epsilon = 1e-10);

        let b = SectionBasis::identity(k).transformed(&mat_exp(&fixed_generator(3, 0.0), 1.0)).unwrap();
        let (lo, hi) = r_bounded_diagnostic(&b, &grid);
        assert!((lo - 0.1025371284998512).abs() < 1e-12);
        assert!((hi - 9.335536661631307).abs() < 1e-10);
        assert!((hi / lo - 91.04542713661867).abs() < 1e-9);
    }
}
