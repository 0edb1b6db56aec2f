// SPDX-License-Identifier: Apache-2.0

//! Deligne energy along one-parameter subgroups of SL(k+1).
//!
//! Along `B_t = exp(tA)·B` the induced metrics differ by the potential
//! `φ_t = log(|e^{tA}v|² / |v|²)` and the energy change is
//! `E(φ_t) = ½ ∫ φ_t (ω_t + ω_0)`.

use serde::{Deserialize, Serialize};

use crate::config::FD_SECOND_STEP;
use crate::error::{Error, Result};
use crate::lie::{mat_exp, mat_exp_unitary, CMat, CVec, HermitianTraceless};
use crate::moment::gram_matrix;
use crate::sections::{reduce, resolved, CurveSample, QuadratureGrid, SectionBasis};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// `exp(tA)`, the direction in which the energy is convex.
    Positive,
    /// `exp(itA)`, along which every energy is constant.
    Unitary,
}

#[derive(Debug, Clone)]
pub struct FlowLine {
    pub basis: SectionBasis,
    pub generator: HermitianTraceless,
    pub t: f64,
    pub direction: Direction,
}

impl FlowLine {
    pub fn new(basis: SectionBasis, generator: HermitianTraceless, t: f64) -> Result<Self> {
        if generator.dim() != basis.dim() {
            return Err(Error::DimMismatch {
                expected: basis.dim(),
                got: generator.dim(),
            });
        }
        if !t.is_finite() {
            return Err(Error::InvalidArgument(format!("flow parameter must be finite, got {t}")));
        }
        Ok(FlowLine {
            basis,
            generator,
            t,
            direction: Direction::Positive,
        })
    }

    pub fn unitary(mut self) -> Self {
        self.direction = Direction::Unitary;
        self
    }

    pub fn at(&self, t: f64) -> FlowLine {
        FlowLine { t, ..self.clone() }
    }

    fn group_matrix(&self, t: f64) -> CMat {
        match self.direction {
            Direction::Positive => mat_exp(&self.generator, t).into_matrix(),
            Direction::Unitary => mat_exp_unitary(&self.generator, t).into_matrix(),
        }
    }

    /// Basis at the current parameter.
    pub fn current_basis(&self) -> Result<SectionBasis> {
        self.basis.left_mul(&self.group_matrix(self.t))
    }
}

/// `E(φ_s)` for every `s` in `ts`, sharing one pass over the grid.
pub fn energy_profile(line: &FlowLine, ts: &[f64], grid: &QuadratureGrid) -> Result<Vec<f64>> {
    let gs: Vec<CMat> = ts.iter().map(|&s| line.group_matrix(s)).collect();
    resolved(grid, |g| {
        Ok(reduce(&line.basis, g, ts.len(), |s, acc| {
            let v0 = s.v.norm_squared();
            let m0 = s.mass();
            for (slot, gm) in acc.iter_mut().zip(&gs) {
                let moved = CurveSample {
                    z: s.z,
                    v: gm * &s.v,
                    dv: gm * &s.dv,
                    area: s.area,
                };
                let phi = (moved.v.norm_squared() / v0).ln();
                *slot += 0.5 * phi * (moved.mass() + m0);
            }
        }))
    })
}

/// `E(φ_t)`: the change of the Deligne energy from the start of the line.
pub fn deligne_energy_delta(line: &FlowLine, grid: &QuadratureGrid) -> Result<f64> {
    if line.t == 0.0 {
        return Ok(0.0);
    }
    Ok(energy_profile(line, &[line.t], grid)?[0])
}

/// `dE/dt = ∫ φ̇_t ω_t`, with `φ̇_t = 2 w*Aw / w*w` and `w = e^{tA}v`.
pub fn energy_first_derivative(line: &FlowLine, grid: &QuadratureGrid) -> Result<f64> {
    let basis = line.current_basis()?;
    let a = line.generator.matrix().clone();
    let factor = match line.direction {
        Direction::Positive => 1.0,
        // i·A is skew, so w*(iA)w is imaginary and the derivative vanishes
        Direction::Unitary => 0.0,
    };
    let out = resolved(grid, |g| {
        Ok(reduce(&basis, g, 1, |s, acc| {
            let av: CVec = &a * &s.v;
            acc[0] += 2.0 * s.v.dotc(&av).re / s.v.norm_squared() * s.mass();
        }))
    })?;
    Ok(factor * out[0])
}

/// `2 tr(A · gram(B_t))`, the closed form of the first derivative.
pub fn energy_first_derivative_trace(line: &FlowLine, grid: &QuadratureGrid) -> Result<f64> {
    let gram = gram_matrix(&line.current_basis()?, grid)?.gram;
    Ok(2.0 * (line.generator.matrix() * gram).trace().re)
}

/// Central second difference of `E` at `t` with step `h`, plus one
/// Richardson level: `(4 D(h/2) - D(h)) / 3`.
pub fn energy_second_derivative_with_step(line: &FlowLine, h: f64, grid: &QuadratureGrid) -> Result<f64> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidArgument(format!("finite-difference step must be positive, got {h}")));
    }
    let t = line.t;
    let ts = [t - h, t - 0.5 * h, t, t + 0.5 * h, t + h];
    let e = energy_profile(line, &ts, grid)?;
    let coarse = (e[4] - 2.0 * e[2] + e[0]) / (h * h);
    let fine = (e[3] - 2.0 * e[2] + e[1]) / (0.25 * h * h);
    Ok((4.0 * fine - coarse) / 3.0)
}

pub fn energy_second_derivative(line: &FlowLine, grid: &QuadratureGrid) -> Result<f64> {
    energy_second_derivative_with_step(line, FD_SECOND_STEP, grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lie::{aut_subalgebra, fixed_generator, random_generator};
    use crate::moment::moment_map;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn remark2_k2() -> HermitianTraceless {
        HermitianTraceless::from_diagonal(&[1.0 / 3.0, -2.0 / 3.0, 1.0 / 3.0]).unwrap()
    }

    #[test]
    fn energy_examples() {
        let grid = QuadratureGrid::for_k(2);
        let line = FlowLine::new(SectionBasis::identity(2), remark2_k2(), 0.0).unwrap();
        assert_eq!(deligne_energy_delta(&line, &grid).unwrap(), 0.0);
        let zero = FlowLine::new(SectionBasis::identity(2), HermitianTraceless::zero(3), 0.7).unwrap();
        assert_eq!(deligne_energy_delta(&zero, &grid).unwrap(), 0.0);

        // 30-digit radial integrals of the diagonal flow
        let e = deligne_energy_delta(&line.at(0.1), &grid).unwrap();
        assert!((e - 0.005424424441120327).abs() < 1e-13);
        let e = deligne_energy_delta(&line.at(-0.1), &grid).unwrap();
        assert!((e - 0.005221985936870813).abs() < 1e-13);
    }

    #[test]
    fn cocycle() {
        let k = 3;
        let grid = QuadratureGrid::for_k(k);
        let a = fixed_generator(k + 1, 0.5);
        let b = SectionBasis::identity(k).transformed(&mat_exp(&fixed_generator(k + 1, 1.5), 0.3)).unwrap();
        let whole = deligne_energy_delta(&FlowLine::new(b.clone(), a.clone(), 0.7).unwrap(), &grid).unwrap();
        let first = FlowLine::new(b, a.clone(), 0.3).unwrap();
        let e1 = deligne_energy_delta(&first, &grid).unwrap();
        let restarted = FlowLine::new(first.current_basis().unwrap(), a, 0.4).unwrap();
        let e2 = deligne_energy_delta(&restarted, &grid).unwrap();
        assert!((whole - e1 - e2).abs() <= 2e-10 * whole.abs().max(1.0));
    }

    #[test]
    fn first_derivative_matches_trace_and_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let k = rng.random_range(2..=5);
            let grid = QuadratureGrid::for_k(k);
            let b = SectionBasis::identity(k)
                .transformed(&mat_exp(&random_generator(k + 1, &mut rng), 0.3))
                .unwrap();
            let line = FlowLine::new(b, random_generator(k + 1, &mut rng), 0.2).unwrap();
            let direct = energy_first_derivative(&line, &grid).unwrap();
            let trace = energy_first_derivative_trace(&line, &grid).unwrap();
            assert!((direct - trace).abs() <= 1e-10 * direct.abs().max(1.0));

            let h = 1e-4;
            let e = energy_profile(&line, &[0.2 - h, 0.2 + h], &grid).unwrap();
            let fd = (e[1] - e[0]) / (2.0 * h);
            assert!((fd - direct).abs() <= 1e-6 * direct.abs().max(1e-3));
        }
    }

    #[test]
    fn balanced_point_is_critical() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let k = 4;
        let grid = QuadratureGrid::for_k(k);
        for _ in 0..5 {
            let line = FlowLine::new(SectionBasis::identity(k), random_generator(k + 1, &mut rng), 0.0).unwrap();
            assert!(energy_first_derivative(&line, &grid).unwrap().abs() <= 1e-9);
        }
        let b = SectionBasis::identity(k).transformed(&mat_exp(&fixed_generator(k + 1, 0.0), 0.2)).unwrap();
        let e = moment_map(&b, &grid).unwrap();
        let line = FlowLine::new(b, e.clone(), 0.0).unwrap();
        let d = energy_first_derivative(&line, &grid).unwrap();
        assert!((d - 2.0 * e.hs_norm_sq()).abs() <= 1e-10);
        assert!(d > 0.0);
    }

    #[test]
    fn automorphisms_are_flat() {
        for k in [2, 5] {
            let grid = QuadratureGrid::for_k(k);
            for j in aut_subalgebra(k) {
                let line = FlowLine::new(SectionBasis::identity(k), j, 0.0).unwrap();
                assert!(energy_second_derivative(&line, &grid).unwrap().abs() <= 1e-8);
            }
        }
        let grid = QuadratureGrid::for_k(1);
        let line = FlowLine::new(SectionBasis::identity(1), fixed_generator(2, 0.0), 0.0).unwrap();
        assert!(energy_second_derivative(&line, &grid).unwrap().abs() <= 1e-8);
    }

    #[test]
    fn second_derivative_at_remark2_direction() {
        // 2·Q(ξ,ξ) = 2·C_G·(4/15) at k = 2
        let grid = QuadratureGrid::for_k(2);
        let line = FlowLine::new(SectionBasis::identity(2), remark2_k2(), 0.0).unwrap();
        let h2 = energy_second_derivative(&line, &grid).unwrap();
        assert!((h2 - 16.0 / 15.0).abs() <= 1e-5 * 16.0 / 15.0, "{h2}");
    }

    #[test]
    fn unitary_direction_is_null() {
        let k = 3;
        let grid = QuadratureGrid::for_k(k);
        let b = SectionBasis::identity(k).transformed(&mat_exp(&fixed_generator(k + 1, 2.0), 0.4)).unwrap();
        let line = FlowLine::new(b, fixed_generator(k + 1, 0.1), 0.0).unwrap().unitary();
        for t in [-1.0, 0.3, 2.0] {
            assert!(deligne_energy_delta(&line.at(t), &grid).unwrap().abs() <= 1e-10);
        }
        assert_abs_diff_eq!(energy_first_derivative(&line, &grid).unwrap(), 0.0);
    }

    #[test]
    fn convex_along_lines() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let k = 3;
        let grid = QuadratureGrid::for_k(k);
        let line = FlowLine::new(SectionBasis::identity(k), random_generator(k + 1, &mut rng), 0.0).unwrap();
        for t in [-1.0, -0.4, 0.0, 0.5, 1.0] {
            assert!(energy_second_derivative(&line.at(t), &grid).unwrap() >= -1e-7);
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(FlowLine::new(SectionBasis::identity(2), HermitianTraceless::zero(4), 0.0).is_err());
        assert!(FlowLine::new(SectionBasis::identity(2), HermitianTraceless::zero(3), f64::NAN).is_err());
        let line = FlowLine::new(SectionBasis::identity(2), HermitianTraceless::zero(3), 0.0).unwrap();
        assert!(energy_second_derivative_with_step(&line, 0.0, &QuadratureGrid::for_k(2)).is_err());
    }
}
