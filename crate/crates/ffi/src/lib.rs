// SPDX-License-Identifier: Apache-2.0

//! C ABI over `balancedflow`.
//!
//! Bases and grids are opaque heap handles created by `bf_*_new`-style
//! functions and released with the matching `bf_*_free`. Every fallible call
//! returns a [`BfStatus`]; on failure a message is kept per thread and can be
//! read with [`bf_last_error_message`]. Matrices cross the boundary as two
//! row-major `double` arrays holding real and imaginary parts.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use balancedflow::error::Error;
use balancedflow::flow::{balance, FlowOptions};
use balancedflow::lie::{mat_exp, random_generator, CMat};
use balancedflow::moment::gram_matrix;
use balancedflow::sections::{BasisFile, QuadratureGrid, SectionBasis};
use balancedflow::spectral::{generator_norms, q_gram, remark2_xi, QOptions};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    BufferTooSmall = 3,
    Parse = 4,
    QuadratureUnderResolved = 10,
    LineSearchFailed = 11,
    MaxIterExceeded = 12,
    GramNotPositive = 13,
    DegenerateSpectrum = 14,
    KernelMismatch = 15,
    Panic = 99,
}

/// Coefficient matrix of a basis of sections.
pub struct BfBasis {
    inner: SectionBasis,
}

/// Quadrature grid on the sphere.
pub struct BfGrid {
    inner: QuadratureGrid,
}

/// Squared norms of a generator and of its induced vector field, split into
/// tangential and normal parts.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BfGeneratorNorms {
    pub xi_sq: f64,
    pub x: f64,
    pub tangential: f64,
    pub normal: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let message = CString::new(message.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(message));
}

struct Failure(BfStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::QuadratureUnderResolved { .. } => BfStatus::QuadratureUnderResolved,
            Error::LineSearchFailed { .. } => BfStatus::LineSearchFailed,
            Error::MaxIterExceeded { .. } => BfStatus::MaxIterExceeded,
            Error::GramNotPositive { .. } => BfStatus::GramNotPositive,
            Error::DegenerateSpectrum { .. } => BfStatus::DegenerateSpectrum,
            Error::KernelMismatch { .. } => BfStatus::KernelMismatch,
            Error::Parse(_) | Error::Io(_) => BfStatus::Parse,
            _ => BfStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(BfStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> BfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => BfStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_last_error(message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(format!("internal panic: {message}"));
            BfStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn write_out<T>(p: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    p.write(value);
    Ok(())
}

fn boxed_basis(b: SectionBasis) -> *mut BfBasis {
    Box::into_raw(Box::new(BfBasis { inner: b }))
}

/// Writes a square matrix into caller buffers of `len` doubles each.
unsafe fn write_matrix(m: &CMat, re: *mut f64, im: *mut f64, len: usize) -> Result<(), Failure> {
    let n = m.nrows();
    if re.is_null() || im.is_null() {
        return Err(null("output buffer"));
    }
    if len < n * n {
        return Err(Failure(BfStatus::BufferTooSmall, format!("need {} entries, got {len}", n * n)));
    }
    for r in 0..n {
        for c in 0..n {
            *re.add(r * n + c) = m[(r, c)].re;
            *im.add(r * n + c) = m[(r, c)].im;
        }
    }
    Ok(())
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn bf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failure on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn bf_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Frees a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn bf_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Basis `√binom(k,i) z^i`, balanced for the round metric.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn bf_basis_identity(k: usize, out: *mut *mut BfBasis) -> BfStatus {
    guard(|| {
        if k == 0 {
            return Err(Failure(BfStatus::InvalidArgument, "k must be positive".into()));
        }
        write_out(out, boxed_basis(SectionBasis::identity(k)), "out")
    })
}

/// Basis with the given `(k+1)×(k+1)` row-major coefficients.
///
/// # Safety
/// `re` and `im` must each point to `(k+1)²` doubles; `out` must be valid
/// for writes.
#[no_mangle]
pub unsafe extern "C" fn bf_basis_from_coeffs(
    k: usize,
    re: *const f64,
    im: *const f64,
    out: *mut *mut BfBasis,
) -> BfStatus {
    guard(|| {
        if re.is_null() || im.is_null() {
            return Err(null("coefficient array"));
        }
        let n = k + 1;
        let m = CMat::from_fn(n, n, |r, c| Complex64::new(*re.add(r * n + c), *im.add(r * n + c)));
        write_out(out, boxed_basis(SectionBasis::new(k, m)?), "out")
    })
}

/// `exp(size·A)` applied to the identity basis, with `A` a unit-norm random
/// generator drawn from `seed`. Same construction as the command line.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn bf_basis_perturbed(k: usize, size: f64, seed: u64, out: *mut *mut BfBasis) -> BfStatus {
    guard(|| {
        if k == 0 || !size.is_finite() {
            return Err(Failure(BfStatus::InvalidArgument, "need k > 0 and a finite size".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = mat_exp(&random_generator(k + 1, &mut rng), size);
        write_out(out, boxed_basis(SectionBasis::identity(k).transformed(&g)?), "out")
    })
}

/// Parses the JSON basis format `{"k", "coeffs": [[{"re","im"}]]}`.
///
/// # Safety
/// `json` must be a nul-terminated string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn bf_basis_from_json(json: *const c_char, out: *mut *mut BfBasis) -> BfStatus {
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|e| Failure(BfStatus::Parse, e.to_string()))?;
        let file: BasisFile = serde_json::from_str(text).map_err(Error::from)?;
        write_out(out, boxed_basis(SectionBasis::from_json(&file)?), "out")
    })
}

/// Serializes a basis; release the string with [`bf_string_free`].
///
/// # Safety
/// `basis` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn bf_basis_to_json(basis: *const BfBasis, out: *mut *mut c_char) -> BfStatus {
    guard(|| {
        let b = deref(basis, "basis")?;
        let text = serde_json::to_string(&b.inner.to_json()).map_err(Error::from)?;
        let s = CString::new(text).expect("json has no nul bytes");
        write_out(out, s.into_raw(), "out")
    })
}

/// Power `k` of the basis, or 0 for a null handle.
///
/// # Safety
/// `basis` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn bf_basis_k(basis: *const BfBasis) -> usize {
    basis.as_ref().map_or(0, |b| b.inner.k())
}

/// Copies the coefficient matrix into `re`/`im` (row-major, `len` each).
///
/// # Safety
/// `basis` must be a live handle and the buffers must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn bf_basis_coeffs(basis: *const BfBasis, re: *mut f64, im: *mut f64, len: usize) -> BfStatus {
    guard(|| write_matrix(deref(basis, "basis")?.inner.coeffs(), re, im, len))
}

/// # Safety
/// `basis` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bf_basis_free(basis: *mut BfBasis) {
    if !basis.is_null() {
        drop(Box::from_raw(basis));
    }
}

/// Grid with `radial` Gauss–Legendre and `angular` uniform nodes, checked
/// against its doubling at relative tolerance `tol`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn bf_grid_new(radial: usize, angular: usize, tol: f64, out: *mut *mut BfGrid) -> BfStatus {
    guard(|| {
        let g = QuadratureGrid::new(radial, angular, tol)?;
        write_out(out, Box::into_raw(Box::new(BfGrid { inner: g })), "out")
    })
}

/// Default grid for power `k`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn bf_grid_for_k(k: usize, out: *mut *mut BfGrid) -> BfStatus {
    guard(|| write_out(out, Box::into_raw(Box::new(BfGrid { inner: QuadratureGrid::for_k(k) })), "out"))
}

/// # Safety
/// `grid` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bf_grid_free(grid: *mut BfGrid) {
    if !grid.is_null() {
        drop(Box::from_raw(grid));
    }
}

/// Hilbert–Schmidt norm of the moment map.
///
/// # Safety
/// Handles must be live; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn bf_balanced_residual(basis: *const BfBasis, grid: *const BfGrid, out: *mut f64) -> BfStatus {
    guard(|| {
        let report = gram_matrix(&deref(basis, "basis")?.inner, &deref(grid, "grid")?.inner)?;
        write_out(out, report.residual_norm, "out")
    })
}

/// Gram matrix of the basis in its induced metric, row-major.
///
/// # Safety
/// Handles must be live; the buffers must hold `len` doubles each.
#[no_mangle]
pub unsafe extern "C" fn bf_gram(
    basis: *const BfBasis,
    grid: *const BfGrid,
    re: *mut f64,
    im: *mut f64,
    len: usize,
) -> BfStatus {
    guard(|| {
        let report = gram_matrix(&deref(basis, "basis")?.inner, &deref(grid, "grid")?.inner)?;
        write_matrix(&report.gram, re, im, len)
    })
}

/// Runs the gradient flow until the residual is at most `tol`. On success a
/// new handle is written to `out`; `iterations` and `residual` may be null.
///
/// # Safety
/// Handles must be live; non-null outputs must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn bf_balance(
    basis: *const BfBasis,
    grid: *const BfGrid,
    tol: f64,
    max_iter: usize,
    out: *mut *mut BfBasis,
    iterations: *mut usize,
    residual: *mut f64,
) -> BfStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let opts = FlowOptions {
            tol,
            max_iter,
            ..FlowOptions::default()
        };
        let result = balance(&deref(basis, "basis")?.inner, &opts, &deref(grid, "grid")?.inner)?;
        if !iterations.is_null() {
            iterations.write(result.iterations());
        }
        if !residual.is_null() {
            residual.write(result.residual());
        }
        out.write(boxed_basis(result.basis));
        Ok(())
    })
}

/// Eigenvalues of `Q` in ascending order, the kernel dimension and `Λ_z`.
///
/// `threshold` is relative to `max(λ_max, 1)`; pass 0 for the default.
/// When every eigenvalue lies in the kernel `lambda_z` is set to NaN and the
/// call still succeeds; use [`bf_lambda_z`] to treat that as an error.
///
/// # Safety
/// Handles must be live; `eigenvalues` must hold `len` doubles; non-null
/// outputs must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn bf_spectrum(
    basis: *const BfBasis,
    grid: *const BfGrid,
    threshold: f64,
    eigenvalues: *mut f64,
    len: usize,
    kernel_dim: *mut usize,
    lambda_z: *mut f64,
) -> BfStatus {
    guard(|| {
        let report = spectrum(basis, grid, threshold)?;
        if !eigenvalues.is_null() || len > 0 {
            if eigenvalues.is_null() {
                return Err(null("eigenvalues"));
            }
            if len < report.eigenvalues.len() {
                return Err(Failure(
                    BfStatus::BufferTooSmall,
                    format!("need {} entries, got {len}", report.eigenvalues.len()),
                ));
            }
            ptr::copy_nonoverlapping(report.eigenvalues.as_ptr(), eigenvalues, report.eigenvalues.len());
        }
        if !kernel_dim.is_null() {
            kernel_dim.write(report.kernel_dim);
        }
        if !lambda_z.is_null() {
            lambda_z.write(report.lambda_z.unwrap_or(f64::NAN));
        }
        Ok(())
    })
}

/// `Λ_z` alone; fails with `DegenerateSpectrum` when it does not exist.
///
/// # Safety
/// Handles must be live; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn bf_lambda_z(basis: *const BfBasis, grid: *const BfGrid, out: *mut f64) -> BfStatus {
    guard(|| {
        let lambda = spectrum(basis, grid, 0.0)?.require_lambda()?;
        write_out(out, lambda, "out")
    })
}

unsafe fn spectrum(
    basis: *const BfBasis,
    grid: *const BfGrid,
    threshold: f64,
) -> Result<balancedflow::spectral::SpectrumReport, Failure> {
    let mut opts = QOptions {
        generator_norms: false,
        ..QOptions::default()
    };
    if threshold != 0.0 {
        opts.threshold = threshold;
    }
    Ok(q_gram(&deref(basis, "basis")?.inner, &deref(grid, "grid")?.inner, &opts)?)
}

/// Norms of the quadratic direction `remark2_xi` on the balanced embedding of power `k`.
///
/// # Safety
/// `grid` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn bf_remark2_norms(k: usize, grid: *const BfGrid, out: *mut BfGeneratorNorms) -> BfStatus {
    guard(|| {
        if k == 0 {
            return Err(Failure(BfStatus::InvalidArgument, "k must be positive".into()));
        }
        let n = generator_norms(&remark2_xi(k), &SectionBasis::identity(k), &deref(grid, "grid")?.inner)?;
        write_out(
            out,
            BfGeneratorNorms {
                xi_sq: n.xi_sq,
                x: n.x,
                tangential: n.tangential,
                normal: n.normal,
            },
            "out",
        )
    })
}
