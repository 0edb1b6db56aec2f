// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not hermitian (asymmetry {asymmetry:.3e})")]
    NotHermitian { asymmetry: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },

    #[error("base points of the tangent vectors differ")]
    BasePointMismatch,

    #[error("coefficient matrix is singular (condition ratio {ratio:.3e})")]
    BasisSingular { ratio: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("integral diverges: need b >= a + 2, got a = {a}, b = {b}")]
    DivergentIntegral { a: u32, b: u32 },

    #[error("quadrature under-resolved: doubling the grid changed the result by {change:.3e} (tolerance {tol:.1e})")]
    QuadratureUnderResolved { change: f64, tol: f64 },

    #[error("line search failed after {halvings} halvings (residual {residual:.3e})")]
    LineSearchFailed { halvings: u32, residual: f64 },

    #[error("no convergence within {max_iter} iterations (residual {residual:.3e})")]
    MaxIterExceeded {
        max_iter: usize,
        residual: f64,
        trace: Vec<f64>,
    },

    #[error("gram matrix is not positive definite (smallest eigenvalue {min_eigenvalue:.3e})")]
    GramNotPositive { min_eigenvalue: f64 },

    #[error("spectrum is degenerate: all {kernel_dim} eigenvalues lie below the kernel threshold")]
    DegenerateSpectrum { kernel_dim: usize },

    #[error("kernel dimension {found} differs from the expected {expected}")]
    KernelMismatch { expected: usize, found: usize },

    #[error("i/o error: {0}")]
    Io(String),

    #[error("malformed input: {0}")]
    Parse(String),
}

impl Error {
    /// Numerical failures, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::QuadratureUnderResolved { .. }
                | Error::LineSearchFailed { .. }
                | Error::MaxIterExceeded { .. }
                | Error::GramNotPositive { .. }
                | Error::DegenerateSpectrum { .. }
                | Error::KernelMismatch { .. }
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
