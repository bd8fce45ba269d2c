#ifndef WEYLSCALE_H
#define WEYLSCALE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum WsStatus {
  WS_STATUS_OK = 0,
  WS_STATUS_NULL_POINTER = 1,
  WS_STATUS_INVALID_ARGUMENT = 2,
  WS_STATUS_INVALID_GRID = 3,
  WS_STATUS_ZERO_MODE = 4,
  WS_STATUS_NUMERICAL_GUARD = 5,
  WS_STATUS_DIVERGENT = 6,
  WS_STATUS_PANIC = 7,
} WsStatus;

/**
 * Sampled test function.
 */
typedef struct WsFunction WsFunction;

/**
 * Galerkin model of `T` with its operator diagnostics.
 */
typedef struct WsGalerkin WsGalerkin;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static nul-terminated string.
 */
const char *ws_version(void);

/**
 * Copies the last error message of this thread into `buf` (truncated, always
 * nul-terminated when `len > 0`). Returns the full message length, or 0 if
 * there is none.
 *
 * # Safety
 * `buf` must be valid for `len` bytes or null.
 */
uintptr_t ws_last_error_message(char *buf, uintptr_t len);

/**
 * `amplitude * exp(-1/(1-u^2))`, `u = (x - center)/width`, on the grid of `n` points over `[-half_width, half_width]`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum WsStatus ws_function_bump(uintptr_t n,
                               double half_width,
                               double center,
                               double width,
                               double amp_re,
                               double amp_im,
                               struct WsFunction **out);

/**
 * Derivative of the bump; its integral vanishes.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum WsStatus ws_function_bump_derivative(uintptr_t n,
                                          double half_width,
                                          double center,
                                          double width,
                                          double amp_re,
                                          double amp_im,
                                          struct WsFunction **out);

/**
 * `a + b` on a common grid.
 *
 * # Safety
 * All pointers must be valid; `a` and `b` must be live handles.
 */
enum WsStatus ws_function_add(const struct WsFunction *a,
                              const struct WsFunction *b,
                              struct WsFunction **out);

/**
 * Number of samples of `f`.
 *
 * # Safety
 * `f` must be a live handle or null.
 */
uintptr_t ws_function_len(const struct WsFunction *f);

/**
 * Copies the samples into `re` and `im`, each of length `len` equal to [`ws_function_len`].
 *
 * # Safety
 * `re` and `im` must be valid for `len` doubles.
 */
enum WsStatus ws_function_samples(const struct WsFunction *f,
                                  double *re,
                                  double *im,
                                  uintptr_t len);

/**
 * Releases a handle; null is ignored.
 *
 * # Safety
 * `f` must come from this library and not be used afterwards.
 */
void ws_function_free(struct WsFunction *f);

/**
 * `||f||_m`; `m = 0` requires a vanishing real zero mode and returns
 * [`WsStatus::Divergent`] when the norm is infinite.
 *
 * # Safety
 * `f` must be a live handle and `out` valid.
 */
enum WsStatus ws_mass_norm(const struct WsFunction *f, double m, double *out);

/**
 * `sigma(f, g) = Im int conj(f) g`.
 *
 * # Safety
 * Handles must be live and `out` valid.
 */
enum WsStatus ws_symplectic(const struct WsFunction *f, const struct WsFunction *g, double *out);

/**
 * Klein-Gordon time evolution `tau_t^(m) f`.
 *
 * # Safety
 * `f` must be a live handle and `out` valid.
 */
enum WsStatus ws_time_translate(const struct WsFunction *f,
                                double t,
                                double m,
                                struct WsFunction **out);

/**
 * `K_order(x)` for order 0 or 1.
 *
 * # Safety
 * `out` must be valid.
 */
enum WsStatus ws_bessel_k(int order, double x, double *out);

/**
 * `Q-(x)` (`plus == 0`) or `Q+(x)` (`plus != 0`).
 *
 * # Safety
 * `out` must be valid.
 */
enum WsStatus ws_kernel_q(int plus, double x, double m, double *out);

/**
 * Bilinear form of `Q-` or `Q+` on real null-integral functions, by the
 * position path (`momentum == 0`) or the momentum path.
 *
 * # Safety
 * Handles must be live and `out` valid.
 */
enum WsStatus ws_form_q(int plus,
                        const struct WsFunction *f,
                        const struct WsFunction *g,
                        double m,
                        int momentum,
                        double *out);

/**
 * Builds a Galerkin model with `basis_size` functions per block on `[lo, hi]`
 * and runs its operator diagnostics.
 *
 * # Safety
 * `out` must be valid.
 */
enum WsStatus ws_galerkin_new(uintptr_t n,
                              double half_width,
                              double lo,
                              double hi,
                              double m,
                              uintptr_t basis_size,
                              struct WsGalerkin **out);

/**
 * `sum |eigenvalues of 1 - T|`.
 *
 * # Safety
 * `h` must be a live handle and `out` valid.
 */
enum WsStatus ws_galerkin_trace_norm(const struct WsGalerkin *h, double *out);

/**
 * Max residual of the `1 - T` matrix elements against the momentum-path forms.
 *
 * # Safety
 * `h` must be a live handle and `out` valid.
 */
enum WsStatus ws_galerkin_matrix_element_residual(const struct WsGalerkin *h, double *out);

/**
 * Number of eigenvalues of `1 - T` (twice the basis size).
 *
 * # Safety
 * `h` must be a live handle or null.
 */
uintptr_t ws_galerkin_len(const struct WsGalerkin *h);

/**
 * Copies the eigenvalues of `1 - T`, by decreasing magnitude.
 *
 * # Safety
 * `buf` must be valid for `len` doubles.
 */
enum WsStatus ws_galerkin_eigenvalues(const struct WsGalerkin *h, double *buf, uintptr_t len);

/**
 * Releases a Galerkin handle; null is ignored.
 *
 * # Safety
 * `h` must come from this library and not be used afterwards.
 */
void ws_galerkin_free(struct WsGalerkin *h);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* WEYLSCALE_H */
