// SPDX-License-Identifier: Apache-2.0

//! Points and tangent vectors of CP^N in homogeneous coordinates.
//!
//! A tangent vector is the class of a pair `(v, a)` modulo
//! `(v, a) ~ (λv, λa + μv)`. Nothing here normalizes `v`; every formula is
//! written so that it is invariant under both rescalings.

use num_complex::Complex64;

use crate::config::C_G;
use crate::error::{Error, Result};
use crate::lie::{CVec, HermitianTraceless};

fn dot(a: &CVec, b: &CVec) -> Complex64 {
    // a* b
    a.dotc(b)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectivePoint {
    homog: CVec,
}

impl ProjectivePoint {
    pub fn new(homog: CVec) -> Result<Self> {
        if homog.iter().all(|z| z.norm() == 0.0) {
            return Err(Error::InvalidArgument("zero vector is not a projective point".into()));
        }
        Ok(ProjectivePoint { homog })
    }

    pub fn homog(&self) -> &CVec {
        &self.homog
    }

    pub fn dim(&self) -> usize {
        self.homog.len()
    }

    pub fn norm_sq(&self) -> f64 {
        self.homog.norm_squared()
    }

    /// Same point up to a nonzero scalar.
    pub fn same_point(&self, other: &ProjectivePoint) -> bool {
        if self.dim() != other.dim() {
            return false;
        }
        // |<v,w>|² = |v|²|w|² iff w ∝ v
        let vw = dot(&self.homog, &other.homog).norm_sqr();
        let prod = self.norm_sq() * other.norm_sq();
        (prod - vw).abs() <= 1e-12 * prod
    }
}

/// Class of `(base, dir)` in `T_base CP^N`.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentAtPoint {
    pub base: ProjectivePoint,
    pub dir: CVec,
}

impl TangentAtPoint {
    pub fn new(base: ProjectivePoint, dir: CVec) -> Result<Self> {
        if dir.len() != base.dim() {
            return Err(Error::DimMismatch {
                expected: base.dim(),
                got: dir.len(),
            });
        }
        Ok(TangentAtPoint { base, dir })
    }

    /// Representative of the same class with base vector `λ·base`.
    pub fn rebased(&self, lambda: Complex64) -> TangentAtPoint {
        TangentAtPoint {
            base: ProjectivePoint {
                homog: self.base.homog.map(|z| z * lambda),
            },
            dir: self.dir.map(|z| z * lambda),
        }
    }

    pub fn scaled(&self, s: Complex64) -> TangentAtPoint {
        TangentAtPoint {
            base: self.base.clone(),
            dir: self.dir.map(|z| z * s),
        }
    }

    /// Sum of two classes at the same point, expressed on `self`'s representative.
    pub fn add(&self, other: &TangentAtPoint) -> Result<TangentAtPoint> {
        let ratio = base_ratio(&self.base, &other.base)?;
        // other = (λ v, b) ~ (v, b/λ)
        Ok(TangentAtPoint {
            base: self.base.clone(),
            dir: &self.dir + other.dir.map(|z| z / ratio),
        })
    }
}

/// λ with `w = λ v`, or BasePointMismatch.
fn base_ratio(v: &ProjectivePoint, w: &ProjectivePoint) -> Result<Complex64> {
    if !v.same_point(w) {
        return Err(Error::BasePointMismatch);
    }
    Ok(dot(&v.homog, &w.homog) / v.norm_sq())
}

/// Unnormalized Fubini–Study bracket `[(v*v)(b*a) - (b*v)(v*a)] / (v*v)²`.
pub(crate) fn fs_bracket(v: &CVec, a: &CVec, b: &CVec) -> Complex64 {
    let vv = v.norm_squared();
    (dot(b, a) * vv - dot(b, v) * dot(v, a)) / (vv * vv)
}

/// Fubini–Study hermitian form `C_G · [(v*v)(b*a) - (b*v)(v*a)] / (v*v)²`
/// for `X = (v, a)` and `Y = (v, b)`; linear in `X`, antilinear in `Y`.
pub fn fs_tangent_inner(x: &TangentAtPoint, y: &TangentAtPoint) -> Result<Complex64> {
    let ratio = base_ratio(&x.base, &y.base)?;
    let b = y.dir.map(|z| z / ratio);
    Ok(fs_bracket(&x.base.homog, &x.dir, &b) * C_G)
}

pub fn fs_norm_sq(x: &TangentAtPoint) -> f64 {
    fs_bracket(&x.base.homog, &x.dir, &x.dir).re * C_G
}

/// `X_A = (v, A v)`.
pub fn vector_field_at(a: &HermitianTraceless, p: &ProjectivePoint) -> Result<TangentAtPoint> {
    if a.dim() != p.dim() {
        return Err(Error::DimMismatch {
            expected: a.dim(),
            got: p.dim(),
        });
    }
    Ok(TangentAtPoint {
        base: p.clone(),
        dir: a.matrix() * p.homog(),
    })
}

/// `φ̇_t(v) = 2 (v* e^{2tA} A v) / (v* e^{2tA} v)`, the time derivative of
/// `log(|e^{tA} v|² / |v|²)`.
pub fn phi_dot(a: &HermitianTraceless, t: f64, p: &ProjectivePoint) -> Result<f64> {
    if a.dim() != p.dim() {
        return Err(Error::DimMismatch {
            expected: a.dim(),
            got: p.dim(),
        });
    }
    if t == 0.0 {
        let v = p.homog();
        return Ok(2.0 * dot(v, &(a.matrix() * v)).re / v.norm_squared());
    }
    let w = crate::lie::mat_exp(a, t).into_matrix() * p.homog();
    Ok(2.0 * dot(&w, &(a.matrix() * &w)).re / w.norm_squared())
}
