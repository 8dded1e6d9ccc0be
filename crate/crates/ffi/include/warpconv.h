#ifndef WARPCONV_H
#define WARPCONV_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/**
 * Undeformed operators accepted by [`wc_warp_spectral`].
 */
typedef enum WcOperatorKind {
  /**
   * P_j with j = `index`.
   */
  WC_OPERATOR_KIND_MOMENTUM = 0,
  /**
   * X_j with j = `index`.
   */
  WC_OPERATOR_KIND_COORDINATE = 1,
  /**
   * P²/2m with m = `mass`.
   */
  WC_OPERATOR_KIND_FREE_HAMILTONIAN = 2,
} WcOperatorKind;

/**
 * Status codes returned by every fallible function.
 */
typedef enum WcStatus {
  WC_STATUS_OK = 0,
  WC_STATUS_NULL_POINTER = 1,
  WC_STATUS_INVALID_ARGUMENT = 2,
  /**
   * A numerical contract failed (non-convergence, infeasible bound, tail leakage...).
   */
  WC_STATUS_NUMERICAL = 3,
  WC_STATUS_IO = 4,
  /**
   * A Rust panic was caught at the boundary.
   */
  WC_STATUS_INTERNAL = 5,
} WcStatus;

/**
 * Opaque grid handle.
 */
typedef struct WcGrid WcGrid;

/**
 * Opaque handle of a deformed Hamiltonian H₀ + V.
 */
typedef struct WcHamiltonian WcHamiltonian;

/**
 * Opaque state handle.
 */
typedef struct WcState WcState;

/**
 * Fitted coefficients of ‖VΦ‖ ≤ a‖H₀Φ‖ + b‖Φ‖.
 */
typedef struct WcBoundFit {
  double a;
  double b;
  double max_violation;
  size_t samples;
  size_t degenerate;
  bool feasible;
} WcBoundFit;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or null. Valid until the next call that fails.
 */
const char *wc_last_error_message(void);

void wc_clear_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *wc_version(void);

/**
 * Sign and ordering conventions as a static NUL-terminated string.
 */
const char *wc_convention(void);

/**
 * Grid [−L, L)^dims with `points` nodes per axis shifted by `offset`.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum WcStatus wc_grid_new(size_t dims,
                          size_t points,
                          double half_width,
                          double offset,
                          struct WcGrid **out);

/**
 * # Safety
 * `grid` must come from [`wc_grid_new`] or be null.
 */
void wc_grid_free(struct WcGrid *grid);

/**
 * Number of nodes, or 0 for a null grid.
 *
 * # Safety
 * `grid` must be a live handle or null.
 */
size_t wc_grid_len(const struct WcGrid *grid);

/**
 * # Safety
 * `grid` must be a live handle or null.
 */
size_t wc_grid_dims(const struct WcGrid *grid);

/**
 * Normalized x^k e^{−x²/2} sampled on the grid; `k` holds one exponent per axis.
 *
 * # Safety
 * `grid` must be live, `k` must hold `k_len` integers and `out` must be valid for writes.
 */
enum WcStatus wc_state_domain_vector(const struct WcGrid *grid,
                                     const int32_t *k,
                                     size_t k_len,
                                     struct WcState **out);

/**
 * State from `len` amplitudes split into real and imaginary arrays.
 *
 * # Safety
 * `re` and `im` must each hold `len` doubles.
 */
enum WcStatus wc_state_from_amplitudes(const struct WcGrid *grid,
                                       const double *re,
                                       const double *im,
                                       size_t len,
                                       struct WcState **out);

/**
 * Copies the amplitudes into `re` and `im`, which must hold `len` = grid length doubles.
 *
 * # Safety
 * `re` and `im` must be valid for `len` writes.
 */
enum WcStatus wc_state_amplitudes(const struct WcState *state, double *re, double *im, size_t len);

/**
 * # Safety
 * `state` must be live and `norm` valid for writes.
 */
enum WcStatus wc_state_norm(const struct WcState *state, double *norm);

/**
 * ‖a − b‖.
 *
 * # Safety
 * Both states must be live and `dist` valid for writes.
 */
enum WcStatus wc_state_distance(const struct WcState *a, const struct WcState *b, double *dist);

/**
 * # Safety
 * `state` must come from this library or be null.
 */
void wc_state_free(struct WcState *state);

/**
 * Writes a snapshot; JSON for a `.json` path, binary otherwise.
 *
 * # Safety
 * `path` must be a NUL-terminated string.
 */
enum WcStatus wc_state_save(const struct WcState *state, const char *path);

/**
 * Reads a snapshot written by [`wc_state_save`]. The grid is rebuilt from the snapshot header.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` valid for writes.
 */
enum WcStatus wc_state_load(const char *path, struct WcState **out);

/**
 * H_B = H₀ + V for the skew matrix B and Q = X/|X|^exponent, symmetric ordering.
 *
 * # Safety
 * `skew` must hold dims² doubles and `out` be valid for writes.
 */
enum WcStatus wc_hamiltonian_new(const struct WcGrid *grid,
                                 const double *skew,
                                 double exponent,
                                 double mass,
                                 struct WcHamiltonian **out);

/**
 * # Safety
 * `h` must come from [`wc_hamiltonian_new`] or be null.
 */
void wc_hamiltonian_free(struct WcHamiltonian *h);

/**
 * # Safety
 * Handles must be live and `out` valid for writes.
 */
enum WcStatus wc_hamiltonian_apply(const struct WcHamiltonian *h,
                                   const struct WcState *state,
                                   struct WcState **out);

/**
 * Relative residual ‖H_BΦ − (1/2m) Σ_j (P_B^j)²Φ‖/‖Φ‖.
 *
 * # Safety
 * Handles must be live and `residual` valid for writes.
 */
enum WcStatus wc_theorem_d1_check(const struct WcHamiltonian *h,
                                  const struct WcState *state,
                                  double *residual);

/**
 * Fits ‖VΦ‖ ≤ a‖H₀Φ‖ + b‖Φ‖ over the default sample set drawn with `seed`.
 *
 * # Safety
 * `h` must be live and `fit` valid for writes.
 */
enum WcStatus wc_bound_fit(const struct WcHamiltonian *h,
                           uint64_t seed,
                           double b_cap,
                           struct WcBoundFit *fit);

/**
 * Applies the warped convolution of the chosen operator, deformed by `skew` with
 * Q = X/|X|^exponent, to `state` using the exact spectral evaluator.
 *
 * # Safety
 * Handles must be live, `skew` must hold dims² doubles and `out` be valid for writes.
 */
enum WcStatus wc_warp_spectral(enum WcOperatorKind kind,
                               size_t index,
                               double mass,
                               const double *skew,
                               double exponent,
                               const struct WcState *state,
                               struct WcState **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* WARPCONV_H */
