#ifndef BELLSTRENGTH_H
#define BELLSTRENGTH_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum BsStatus {
  BS_STATUS_OK = 0,
  BS_STATUS_NULL_POINTER = 1,
  BS_STATUS_INVALID_DIMENSION = 2,
  BS_STATUS_INVALID_COEFFICIENT = 3,
  BS_STATUS_SHAPE = 4,
  BS_STATUS_INVALID_BEHAVIOR = 5,
  BS_STATUS_RESOURCE_LIMIT = 6,
  BS_STATUS_INVALID_PARAMETER = 7,
  BS_STATUS_SINGULAR_RATIO = 8,
  BS_STATUS_NOT_CONVERGED = 9,
  BS_STATUS_EIGEN_NOT_CONVERGED = 10,
  BS_STATUS_IO = 11,
  BS_STATUS_BUFFER_TOO_SMALL = 12,
  BS_STATUS_PANIC = 13,
  BS_STATUS_OTHER = 14,
} BsStatus;

// Which optimizer [`bs_optimize`] runs.
typedef enum BsMode {
  // Exact up to d = 6, conjectured above.
  BS_MODE_AUTO = 0,
  BS_MODE_EXACT = 1,
  BS_MODE_CONJECTURED = 2,
} BsMode;

// Joint outcome probabilities of a two-setting test.
typedef struct BsBehavior BsBehavior;

// Result of a state optimization.
typedef struct BsReport BsReport;

// Bipartite pure state in Schmidt form.
typedef struct BsState BsState;

// Best local fit of a behavior.
typedef struct BsStrength {
  double divergence_bits;
  double certificate_gap;
  uint64_t iterations;
} BsStrength;

// Scalar fields of a [`BsReport`].
typedef struct BsReportSummary {
  size_t dim;
  // 1 for the conjectured route, 0 for the exact one.
  int32_t conjectured;
  double divergence_bits;
  double entanglement_bits;
  // Tilt parameter, NaN for the exact route.
  double parameter;
  double consistency_residual;
  int32_t converged;
} BsReportSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread; empty if none. The
// pointer stays valid until the next failing call on the same thread.
const char *bs_last_error(void);

// Library version as a static NUL-terminated string.
const char *bs_version(void);

// State `sum_i coeffs[i] |ii>`; coefficients must be nonnegative with unit norm.
//
// # Safety
// `coeffs` must point to `len` doubles; `out` must be writable.
enum BsStatus bs_state_new(const double *coeffs, size_t len, struct BsState **out);

// # Safety
// `out` must be writable.
enum BsStatus bs_state_maximally_entangled(size_t d, struct BsState **out);

// Coefficients `(gamma, gamma, sqrt(1 - 2 gamma^2))`.
//
// # Safety
// `out` must be writable.
enum BsStatus bs_state_three_level(double gamma, struct BsState **out);

// Local dimension, 0 for a null handle.
//
// # Safety
// `state` must be null or a live handle.
size_t bs_state_dim(const struct BsState *state);

// Copies the Schmidt coefficients into `out[0..len]`; `len` must be at least the dimension.
//
// # Safety
// `state` must be a live handle; `out` must point to `len` writable doubles.
enum BsStatus bs_state_coefficients(const struct BsState *state, double *out, size_t len);

// Entropy of entanglement in bits.
//
// # Safety
// `state` must be a live handle; `out` must be writable.
enum BsStatus bs_state_entropy(const struct BsState *state, double *out);

// # Safety
// `state` must be null or a handle not yet freed.
void bs_state_free(struct BsState *state);

// Behavior of `state` under the CGLMP measurements with uniform settings.
//
// # Safety
// `state` must be a live handle; `out` must be writable.
enum BsStatus bs_behavior_cglmp(const struct BsState *state, struct BsBehavior **out);

// Number of entries `m^2 n^2`, 0 for a null handle.
//
// # Safety
// `behavior` must be null or a live handle.
size_t bs_behavior_len(const struct BsBehavior *behavior);

// Copies the joint probabilities, indexed `((iA m + iB) n + jA) n + jB`.
//
// # Safety
// `behavior` must be a live handle; `out` must point to `len` writable doubles.
enum BsStatus bs_behavior_probs(const struct BsBehavior *behavior, double *out, size_t len);

// # Safety
// `behavior` must be null or a handle not yet freed.
void bs_behavior_free(struct BsBehavior *behavior);

// Strength `min_{p local} D(q || p)` in bits, to certificate gap `tol`.
//
// # Safety
// `behavior` must be a live handle; `out` must be writable.
enum BsStatus bs_min_kl_local(const struct BsBehavior *behavior,
                              double tol,
                              struct BsStrength *out);

// Optimal state for the `2 x d` CGLMP test.
//
// # Safety
// `out` must be writable.
enum BsStatus bs_optimize(size_t d, enum BsMode mode, double tol, struct BsReport **out);

// # Safety
// `report` must be a live handle; `out` must be writable.
enum BsStatus bs_report_summary(const struct BsReport *report, struct BsReportSummary *out);

// Optimal Schmidt coefficients, descending, as a new state handle.
//
// # Safety
// `report` must be a live handle; `out` must be writable.
enum BsStatus bs_report_state(const struct BsReport *report, struct BsState **out);

// # Safety
// `report` must be null or a handle not yet freed.
void bs_report_free(struct BsReport *report);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BELLSTRENGTH_H */
