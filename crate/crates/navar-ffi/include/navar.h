/* C interface for the navar library. Generated; do not edit. */

#ifndef NAVAR_H
#define NAVAR_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Benchmark network shapes.
 */
typedef enum NavarPattern {
  NAVAR_PATTERN_RANDOM = 0,
  NAVAR_PATTERN_BAND = 1,
  NAVAR_PATTERN_CLUSTER = 2,
} NavarPattern;

/**
 * Call outcome. Mirrors the command-line exit codes.
 */
typedef enum NavarStatus {
  /**
   * Success.
   */
  NAVAR_STATUS_OK = 0,
  /**
   * A parameter or input failed validation.
   */
  NAVAR_STATUS_INVALID_INPUT = 2,
  /**
   * A model precondition failed (nonstationary spec, too little data, ...).
   */
  NAVAR_STATUS_MODEL_FAILURE = 3,
  /**
   * Internal error; should not happen.
   */
  NAVAR_STATUS_INTERNAL = 4,
} NavarStatus;

/**
 * Opaque fitted influence model: a column centering plus the estimated
 * coefficient blocks and their support.
 */
typedef struct NavarModel NavarModel;

/**
 * Opaque multivariate time-series panel (rows are time points).
 */
typedef struct NavarPanel NavarPanel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, as a NUL-terminated
 * UTF-8 string. Valid until the next failing call on the same thread; empty
 * before any failure.
 */
const char *navar_last_error(void);

/**
 * Simulates a stationary benchmark process and returns a new panel handle
 * in `out`: `n` observations of a `p`-dimensional process whose transition
 * map has `edges_per_row` nonzero components per row in the given pattern,
 * recorded after `burn_in` warm-up steps.
 */
enum NavarStatus navar_panel_simulate(enum NavarPattern pattern,
                                      size_t p,
                                      size_t edges_per_row,
                                      size_t n,
                                      size_t burn_in,
                                      uint64_t seed,
                                      struct NavarPanel **out);

/**
 * Wraps caller data (row-major, `rows x cols`) in a new panel handle. The
 * buffer is copied; the caller keeps ownership of `data`.
 */
enum NavarStatus navar_panel_from_data(const double *data,
                                       size_t rows,
                                       size_t cols,
                                       struct NavarPanel **out);

/**
 * Number of time points; 0 for a null handle.
 */
size_t navar_panel_rows(const struct NavarPanel *panel);

/**
 * Number of variables; 0 for a null handle.
 */
size_t navar_panel_cols(const struct NavarPanel *panel);

/**
 * Copies the panel into `out` (row-major); `len` must equal rows * cols.
 */
enum NavarStatus navar_panel_copy_data(const struct NavarPanel *panel, double *out, size_t len);

/**
 * Releases a panel handle; null is a no-op.
 */
void navar_panel_free(struct NavarPanel *panel);

/**
 * Fits the functional group lasso at a fixed penalty `lambda`, with
 * `basis_size` features per covariate on a support spanning `c0_mult`
 * pooled standard deviations. The panel is column-centered internally.
 */
enum NavarStatus navar_model_fit(const struct NavarPanel *panel,
                                 size_t basis_size,
                                 double c0_mult,
                                 double lambda,
                                 struct NavarModel **out);

/**
 * Fits with penalty and truncation level chosen by rolling-origin
 * cross-validation at the library defaults (levels {2, 3, 4, 6}, a 30-point
 * anchored penalty path, `folds` folds).
 */
enum NavarStatus navar_model_fit_cv(const struct NavarPanel *panel,
                                    size_t folds,
                                    struct NavarModel **out);

/**
 * Number of variables the model was fitted on; 0 for a null handle.
 */
size_t navar_model_dimension(const struct NavarModel *model);

/**
 * Features per covariate; 0 for a null handle.
 */
size_t navar_model_basis_size(const struct NavarModel *model);

/**
 * Penalty the model was fitted at; NaN for a null handle.
 */
double navar_model_lambda(const struct NavarModel *model);

/**
 * Number of recovered directed edges; 0 for a null handle.
 */
size_t navar_model_edge_count(const struct NavarModel *model);

/**
 * Copies the recovered adjacency into `out` (row-major `p x p`;
 * `out[j * p + k]` is 1 when variable `k` drives variable `j`). `len` must
 * equal `p * p`.
 */
enum NavarStatus navar_model_copy_adjacency(const struct NavarModel *model,
                                            uint8_t *out,
                                            size_t len);

/**
 * Copies the empirical component norms into `out` (row-major `p x p`;
 * entry `j * p + k` is the fitted norm of the influence of `k` on `j`).
 * `len` must equal `p * p`.
 */
enum NavarStatus navar_model_copy_group_norms(const struct NavarModel *model,
                                              double *out,
                                              size_t len);

/**
 * One-step conditional-mean forecast: reads the current state from `state`
 * (length `p`) and writes the forecast into `out` (length `p`). The model's
 * training centering is applied and removed internally.
 */
enum NavarStatus navar_model_predict(const struct NavarModel *model,
                                     const double *state,
                                     size_t state_len,
                                     double *out,
                                     size_t out_len);

/**
 * Releases a model handle; null is a no-op.
 */
void navar_model_free(struct NavarModel *model);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NAVAR_H */
