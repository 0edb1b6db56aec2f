// SPDX-License-Identifier: Apache-2.0

//! Numerical constants shared across the crate.
//!
//! Every knob that appears in a CLI report lives here so that the defaults
//! can be printed next to the results they produced.

use serde::Serialize;

/// Normalization of the Fubini–Study hermitian form on tangent vectors.
///
/// The bracket `[(v*v)(b*a) - (b*v)(v*a)] / (v*v)^2` is multiplied by this
/// constant. Its value is pinned by requiring that the second derivative of
/// the Deligne energy along `exp(tA)` equals twice the L² norm of the normal
/// part of `X_A`; with the energy `½∫φ(σ*ω + ω)` and `∫ω̃ = k` this forces 2.
pub const C_G: f64 = 2.0;

/// Structural checks: hermiticity, idempotence, group laws.
pub const STRUCTURAL_TOL: f64 = 1e-10;

/// Tolerance of the tracelessness invariant, relative to the largest entry.
pub const TRACE_TOL: f64 = 1e-12;

/// Smallest/largest singular value ratio below which a basis is rejected.
pub const BASIS_SINGULAR_RATIO: f64 = 1e-12;

pub const DEFAULT_RADIAL: usize = 64;
pub const DEFAULT_ANGULAR_MIN: usize = 64;
/// Grid self-check tolerance (relative to `max(1, |value|)`).
pub const DEFAULT_QUAD_TOL: f64 = 1e-10;

/// Lower bound on both node counts for energy checks. The energy integrand
/// contains `log` of the density ratio, which is not polynomial in either
/// coordinate, so the defaults above leave the self-check unsatisfied on
/// strongly perturbed lines.
pub const ENERGY_GRID_MIN: usize = 96;

pub const FD_FIRST_STEP: f64 = 1e-4;
pub const FD_SECOND_STEP: f64 = 1e-3;

pub const FLOW_STEP: f64 = 1.0;
pub const FLOW_MAX_HALVINGS: u32 = 30;
pub const FLOW_TOL: f64 = 1e-8;
pub const FLOW_MAX_ITER: usize = 500;

/// Kernel threshold of `Q_z`, relative to its largest eigenvalue.
pub const KERNEL_THRESHOLD: f64 = 1e-10;

/// Default angular node count for power `k`: trapezoid is exact for
/// trigonometric polynomials of degree below `M`.
pub fn default_angular(k: usize) -> usize {
    DEFAULT_ANGULAR_MIN.max(4 * k + 8)
}

/// Radial nodes used by the scaling experiments. Integrands on the balanced
/// embedding are polynomials of degree up to `2k + 2` in `u = r²/(1+r²)`.
pub fn scaling_radial(k: usize) -> usize {
    DEFAULT_RADIAL.max(k + 16)
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Tolerances {
    pub structural: f64,
    pub quadrature: f64,
    pub kernel_threshold: f64,
    pub flow_tol: f64,
    pub fd_first_step: f64,
    pub fd_second_step: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            structural: STRUCTURAL_TOL,
            quadrature: DEFAULT_QUAD_TOL,
            kernel_threshold: KERNEL_THRESHOLD,
            flow_tol: FLOW_TOL,
            fd_first_step: FD_FIRST_STEP,
            fd_second_step: FD_SECOND_STEP,
        }
    }
}
