// SPDX-License-Identifier: Apache-2.0

//! Discrete downward gradient flow of `‖μ‖²` on the orbit of a basis.
//!
//! Each step replaces `B` by `exp(-ε E)·B` with `E` the moment map of `B`.
//! The step size restarts from `ε₀` every iteration and is halved until the
//! residual decreases.

use serde::Serialize;

use crate::config::{FLOW_MAX_HALVINGS, FLOW_MAX_ITER, FLOW_STEP, FLOW_TOL};
use crate::error::{Error, Result};
use crate::lie::{c, hermitian_eigen, mat_exp, spectral_apply, HermitianTraceless};
use crate::moment::gram_matrix;
use crate::sections::{QuadratureGrid, SectionBasis};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlowOptions {
    /// Initial step `ε₀` tried at every iteration.
    pub step: f64,
    pub max_halvings: u32,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for FlowOptions {
    fn default() -> Self {
        FlowOptions {
            step: FLOW_STEP,
            max_halvings: FLOW_MAX_HALVINGS,
            tol: FLOW_TOL,
            max_iter: FLOW_MAX_ITER,
        }
    }
}

impl FlowOptions {
    fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::InvalidArgument(format!("step must be positive, got {}", self.step)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument(format!("tol must be positive, got {}", self.tol)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub basis: SectionBasis,
    pub residual: f64,
    /// Step actually taken; zero when the input was already a fixed point.
    pub step_used: f64,
}

#[derive(Debug, Clone)]
pub struct BalanceOutcome {
    pub basis: SectionBasis,
    /// Residual before the first step and after every step.
    pub trace: Vec<f64>,
    /// Step used by each iteration (`trace.len() - 1` entries).
    pub steps: Vec<f64>,
}

impl BalanceOutcome {
    pub fn iterations(&self) -> usize {
        self.steps.len()
    }

    pub fn residual(&self) -> f64 {
        *self.trace.last().expect("trace is never empty")
    }
}

/// Moves from `basis` (with moment map `e` and residual `r`) to the first
/// `exp(-ε e)·basis` whose residual is smaller, halving `ε` from `step`.
fn descend(
    basis: &SectionBasis,
    e: &HermitianTraceless,
    r: f64,
    step: f64,
    max_halvings: u32,
    grid: &QuadratureGrid,
) -> Result<(SectionBasis, HermitianTraceless, f64, f64)> {
    let mut eps = step;
    for _ in 0..=max_halvings {
        let candidate = basis.transformed(&mat_exp(e, -eps))?;
        let report = gram_matrix(&candidate, grid)?;
        if report.residual_norm < r {
            return Ok((candidate, report.traceless_part, report.residual_norm, eps));
        }
        eps *= 0.5;
    }
    Err(Error::LineSearchFailed {
        halvings: max_halvings,
        residual: r,
    })
}

/// One backtracking step of size at most `step`.
///
/// Inputs whose residual is already below the grid tolerance are returned
/// unchanged: below that level the residual is quadrature noise.
pub fn flow_step(basis: &SectionBasis, step: f64, grid: &QuadratureGrid) -> Result<StepOutcome> {
    FlowOptions { step, ..FlowOptions::default() }.validate()?;
    let report = gram_matrix(basis, grid)?;
    if report.residual_norm <= grid.tol() {
        return Ok(StepOutcome {
            basis: basis.clone(),
            residual: report.residual_norm,
            step_used: 0.0,
        });
    }
    let (basis, _, residual, step_used) = descend(
        basis,
        &report.traceless_part,
        report.residual_norm,
        step,
        FLOW_MAX_HALVINGS,
        grid,
    )?;
    Ok(StepOutcome {
        basis,
        residual,
        step_used,
    })
}

/// Iterates [`flow_step`] until the residual is at most `opts.tol`.
pub fn balance(basis: &SectionBasis, opts: &FlowOptions, grid: &QuadratureGrid) -> Result<BalanceOutcome> {
    opts.validate()?;
    let report = gram_matrix(basis, grid)?;
    let mut current = basis.clone();
    let mut e = report.traceless_part;
    let mut r = report.residual_norm;
    let mut trace = vec![r];
    let mut steps = Vec::new();
    while r > opts.tol {
        if steps.len() >= opts.max_iter {
            return Err(Error::MaxIterExceeded {
                max_iter: opts.max_iter,
                residual: r,
                trace,
            });
        }
        let (next, next_e, next_r, used) = descend(&current, &e, r, opts.step, opts.max_halvings, grid)?;
        current = next;
        e = next_e;
        r = next_r;
        trace.push(r);
        steps.push(used);
    }
    Ok(BalanceOutcome {
        basis: current,
        trace,
        steps,
    })
}

/// `B ← √D · M^{-1/2} · B` with `M` the Gram matrix and `D = tr M/(k+1)`;
/// the scalar keeps balanced inputs exactly fixed.
pub fn sqrt_balance_step(basis: &SectionBasis, grid: &QuadratureGrid) -> Result<SectionBasis> {
    let report = gram_matrix(basis, grid)?;
    let (values, vectors) = hermitian_eigen(&report.gram);
    if !(values[0] > 0.0) {
        return Err(Error::GramNotPositive {
            min_eigenvalue: values[0],
        });
    }
    let scale = report.scalar_part.sqrt();
    let m = spectral_apply(&values, &vectors, |x| c(scale / x.sqrt()));
    basis.left_mul(&m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lie::{fixed_generator, mat_exp_unitary, random_generator, CMat};
    use crate::moment::balanced_residual;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn perturbed(k: usize, size: f64) -> SectionBasis {
        SectionBasis::identity(k)
            .transformed(&mat_exp(&fixed_generator(k + 1, 0.0), size))
            .unwrap()
    }

    #[test]
    fn fixed_points() {
        let k = 3;
        let grid = QuadratureGrid::for_k(k);
        let out = flow_step(&SectionBasis::identity(k), 0.7, &grid).unwrap();
        assert_eq!(out.basis, SectionBasis::identity(k));
        assert_eq!(out.step_used, 0.0);

        let u = mat_exp_unitary(&fixed_generator(k + 1, 1.0), 1.3);
        let rotated = SectionBasis::identity(k).transformed(&u).unwrap();
        let out = flow_step(&rotated, 0.7, &grid).unwrap();
        assert_eq!(out.basis, rotated);

        let done = balance(&rotated, &FlowOptions::default(), &grid).unwrap();
        assert_eq!(done.trace.len(), 1);
        assert!(flow_step(&rotated, -1.0, &grid).is_err());
    }

    #[test]
    fn step_decreases_residual() {
        let k = 4;
        let grid = QuadratureGrid::for_k(k);
        let b = perturbed(k, 0.2);
        let before = balanced_residual(&b, &grid).unwrap();
        let out = flow_step(&b, 1.0 / (2.0 * k as f64), &grid).unwrap();
        assert!(out.residual < before);
        assert!(out.step_used > 0.0);
    }

    #[test]
    fn balance_iteration_counts() {
        // counts from an independent numpy run of the same policy
        for (k, iterations) in [(2, 12), (4, 28)] {
            let grid = QuadratureGrid::for_k(k);
            let b = perturbed(k, 0.5);
            let out = balance(&b, &FlowOptions::default(), &grid).unwrap();
            assert_eq!(out.iterations(), iterations, "k={k}");
            assert!(out.residual() <= 1e-8);
            assert!(out.trace.windows(2).all(|w| w[1] < w[0]));

            let g = gram_matrix(&out.basis, &grid).unwrap().gram;
            let expected = CMat::identity(k + 1, k + 1) * c(k as f64 / (k + 1) as f64);
            assert!((g - expected).norm() <= 1e-7);

            // output lies on the orbit of the input
            let gmat = out.basis.coeffs() * b.coeffs().clone().try_inverse().unwrap();
            let back = &gmat * b.coeffs();
            assert!((back - out.basis.coeffs()).norm() <= 1e-10 * out.basis.coeffs().norm());
        }
    }

    #[test]
    fn k1_always_balances() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let grid = QuadratureGrid::for_k(1);
        for _ in 0..3 {
            let b = SectionBasis::identity(1)
                .transformed(&mat_exp(&random_generator(2, &mut rng), 0.8))
                .unwrap();
            assert!(balance(&b, &FlowOptions::default(), &grid).unwrap().residual() <= 1e-8);
        }
    }

    #[test]
    fn max_iter_is_reported_with_trace() {
        let grid = QuadratureGrid::for_k(3);
        let opts = FlowOptions { max_iter: 2, ..FlowOptions::default() };
        match balance(&perturbed(3, 0.5), &opts, &grid) {
            Err(Error::MaxIterExceeded { max_iter, trace, .. }) => {
                assert_eq!(max_iter, 2);
                assert_eq!(trace.len(), 3);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn sqrt_step_golden_and_fixed_point() {
        let k = 4;
        let grid = QuadratureGrid::for_k(k);
        let b = perturbed(k, 0.5);
        let r0 = balanced_residual(&b, &grid).unwrap();
        let r1 = balanced_residual(&sqrt_balance_step(&b, &grid).unwrap(), &grid).unwrap();
        assert!((r0 - 0.5863662849372971).abs() < 1e-10);
        assert!((r1 - 0.1350123449662805).abs() < 1e-10);
        assert!((r1 / r0 - 0.230252571531663).abs() < 1e-9);

        let id = SectionBasis::identity(k);
        let once = sqrt_balance_step(&id, &grid).unwrap();
        assert!((once.coeffs() - id.coeffs()).norm() <= 1e-9);
        let twice = sqrt_balance_step(&once, &grid).unwrap();
        assert!((twice.coeffs() - once.coeffs()).norm() <= 1e-9);
    }
}
