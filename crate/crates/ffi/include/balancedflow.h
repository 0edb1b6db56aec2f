#ifndef BALANCEDFLOW_H
#define BALANCEDFLOW_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum bf_status {
  BF_STATUS_OK = 0,
  BF_STATUS_NULL_POINTER = 1,
  BF_STATUS_INVALID_ARGUMENT = 2,
  BF_STATUS_BUFFER_TOO_SMALL = 3,
  BF_STATUS_PARSE = 4,
  BF_STATUS_QUADRATURE_UNDER_RESOLVED = 10,
  BF_STATUS_LINE_SEARCH_FAILED = 11,
  BF_STATUS_MAX_ITER_EXCEEDED = 12,
  BF_STATUS_GRAM_NOT_POSITIVE = 13,
  BF_STATUS_DEGENERATE_SPECTRUM = 14,
  BF_STATUS_KERNEL_MISMATCH = 15,
  BF_STATUS_PANIC = 99,
} bf_status;

/**
 * Coefficient matrix of a basis of sections.
 */
typedef struct bf_basis bf_basis;

/**
 * Quadrature grid on the sphere.
 */
typedef struct bf_grid bf_grid;

/**
 * Squared norms of a generator and of its induced vector field, split into
 * tangential and normal parts.
 */
typedef struct bf_generator_norms {
  double xi_sq;
  double x;
  double tangential;
  double normal;
} bf_generator_norms;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static nul-terminated string.
 */
const char *bf_version(void);

/**
 * Message of the last failure on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *bf_last_error_message(void);

/**
 * Frees a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void bf_string_free(char *s);

/**
 * Basis `√binom(k,i) z^i`, balanced for the round metric.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum bf_status bf_basis_identity(size_t k, struct bf_basis **out);

/**
 * Basis with the given `(k+1)×(k+1)` row-major coefficients.
 *
 * # Safety
 * `re` and `im` must each point to `(k+1)²` doubles; `out` must be valid
 * for writes.
 */
enum bf_status bf_basis_from_coeffs(size_t k,
                                    const double *re,
                                    const double *im,
                                    struct bf_basis **out);

/**
 * `exp(size·A)` applied to the identity basis, with `A` a unit-norm random
 * generator drawn from `seed`. Same construction as the command line.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum bf_status bf_basis_perturbed(size_t k, double size, uint64_t seed, struct bf_basis **out);

/**
 * Parses the JSON basis format `{"k", "coeffs": [[{"re","im"}]]}`.
 *
 * # Safety
 * `json` must be a nul-terminated string; `out` must be valid for writes.
 */
enum bf_status bf_basis_from_json(const char *json, struct bf_basis **out);

/**
 * Serializes a basis; release the string with [`bf_string_free`].
 *
 * # Safety
 * `basis` must be a live handle; `out` must be valid for writes.
 */
enum bf_status bf_basis_to_json(const struct bf_basis *basis, char **out);

/**
 * Power `k` of the basis, or 0 for a null handle.
 *
 * # Safety
 * `basis` must be null or a live handle.
 */
size_t bf_basis_k(const struct bf_basis *basis);

/**
 * Copies the coefficient matrix into `re`/`im` (row-major, `len` each).
 *
 * # Safety
 * `basis` must be a live handle and the buffers must hold `len` doubles.
 */
enum bf_status bf_basis_coeffs(const struct bf_basis *basis, double *re, double *im, size_t len);

/**
 * # Safety
 * `basis` must be null or a handle not yet freed.
 */
void bf_basis_free(struct bf_basis *basis);

/**
 * Grid with `radial` Gauss–Legendre and `angular` uniform nodes, checked
 * against its doubling at relative tolerance `tol`.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum bf_status bf_grid_new(size_t radial, size_t angular, double tol, struct bf_grid **out);

/**
 * Default grid for power `k`.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum bf_status bf_grid_for_k(size_t k, struct bf_grid **out);

/**
 * # Safety
 * `grid` must be null or a handle not yet freed.
 */
void bf_grid_free(struct bf_grid *grid);

/**
 * Hilbert–Schmidt norm of the moment map.
 *
 * # Safety
 * Handles must be live; `out` must be valid for writes.
 */
enum bf_status bf_balanced_residual(const struct bf_basis *basis,
                                    const struct bf_grid *grid,
                                    double *out);

/**
 * Gram matrix of the basis in its induced metric, row-major.
 *
 * # Safety
 * Handles must be live; the buffers must hold `len` doubles each.
 */
enum bf_status bf_gram(const struct bf_basis *basis,
                       const struct bf_grid *grid,
                       double *re,
                       double *im,
                       size_t len);

/**
 * Runs the gradient flow until the residual is at most `tol`. On success a
 * new handle is written to `out`; `iterations` and `residual` may be null.
 *
 * # Safety
 * Handles must be live; non-null outputs must be valid for writes.
 */
enum bf_status bf_balance(const struct bf_basis *basis,
                          const struct bf_grid *grid,
                          double tol,
                          size_t max_iter,
                          struct bf_basis **out,
                          size_t *iterations,
                          double *residual);

/**
 * Eigenvalues of `Q` in ascending order, the kernel dimension and `Λ_z`.
 *
 * `threshold` is relative to `max(λ_max, 1)`; pass 0 for the default.
 * When every eigenvalue lies in the kernel `lambda_z` is set to NaN and the
 * call still succeeds; use [`bf_lambda_z`] to treat that as an error.
 *
 * # Safety
 * Handles must be live; `eigenvalues` must hold `len` doubles; non-null
 * outputs must be valid for writes.
 */
enum bf_status bf_spectrum(const struct bf_basis *basis,
                           const struct bf_grid *grid,
                           double threshold,
                           double *eigenvalues,
                           size_t len,
                           size_t *kernel_dim,
                           double *lambda_z);

/**
 * `Λ_z` alone; fails with `DegenerateSpectrum` when it does not exist.
 *
 * # Safety
 * Handles must be live; `out` must be valid for writes.
 */
enum bf_status bf_lambda_z(const struct bf_basis *basis, const struct bf_grid *grid, double *out);

/**
 * Norms of the quadratic direction `remark2_xi` on the balanced embedding of power `k`.
 *
 * # Safety
 * `grid` must be a live handle; `out` must be valid for writes.
 */
enum bf_status bf_remark2_norms(size_t k,
                                const struct bf_grid *grid,
                                struct bf_generator_norms *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BALANCEDFLOW_H */
