#ifndef HOMEOSPLINE_H
#define HOMEOSPLINE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum HsStatus {
  HS_STATUS_OK = 0,
  HS_STATUS_NULL_POINTER = 1,
  HS_STATUS_CONFIG = 2,
  HS_STATUS_INPUT = 3,
  HS_STATUS_INSUFFICIENT_DATA = 4,
  HS_STATUS_DEGENERATE_DESIGN = 5,
  HS_STATUS_NUMERICAL = 6,
  HS_STATUS_DIVERGENCE = 7,
  HS_STATUS_IO = 8,
  HS_STATUS_PANIC = 9,
} HsStatus;

// Opaque planar homeomorphic map.
typedef struct HsFlow2d HsFlow2d;

// Opaque monotone estimate.
typedef struct HsMonotone HsMonotone;

// Opaque unconstrained 1D smoothing spline.
typedef struct HsSpline HsSpline;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failure on this thread; empty when none. Valid until the next call on the thread.
const char *hs_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *hs_version(void);

// Fits a monotone increasing estimate to `n` points.
//
// `sigma <= 0` selects the default Gaussian width, `lambda <= 0` selects the
// penalty by GCV, `steps == 0` uses the default step count. With
// `local_linear_pre != 0` the data are pre-smoothed before monotonization.
//
// # Safety
// `x` and `y` must point to `n` readable doubles and `out` to a writable handle slot.
enum HsStatus hs_monotone_fit(const double *x,
                              const double *y,
                              size_t n,
                              double sigma,
                              double lambda,
                              size_t steps,
                              int32_t local_linear_pre,
                              struct HsMonotone **out);

// Evaluates the estimate at `m` points.
//
// # Safety
// `h` must come from [`hs_monotone_fit`]; `points` and `values` must hold `m` doubles.
enum HsStatus hs_monotone_eval(const struct HsMonotone *h,
                               const double *points,
                               size_t m,
                               double *values);

// Selected penalty, or NaN for a null handle.
//
// # Safety
// `h` must be null or come from [`hs_monotone_fit`].
double hs_monotone_lambda(const struct HsMonotone *h);

// Nonzero when the step count exceeded the field's sup-norm.
//
// # Safety
// `h` must be null or come from [`hs_monotone_fit`].
int32_t hs_monotone_guard_holds(const struct HsMonotone *h);

// # Safety
// `h` must be null or a handle from [`hs_monotone_fit`] not yet freed.
void hs_monotone_free(struct HsMonotone *h);

// Unconstrained smoothing spline with a Gaussian kernel (`sigma <= 0` for the default width).
//
// # Safety
// `x` and `y` must point to `n` readable doubles and `out` to a writable handle slot.
enum HsStatus hs_spline_fit(const double *x,
                            const double *y,
                            size_t n,
                            double sigma,
                            double lambda,
                            struct HsSpline **out);

// # Safety
// `h` must come from [`hs_spline_fit`]; `points` and `values` must hold `m` doubles.
enum HsStatus hs_spline_eval(const struct HsSpline *h,
                             const double *points,
                             size_t m,
                             double *values);

// # Safety
// `h` must be null or a handle from [`hs_spline_fit`] not yet freed.
void hs_spline_free(struct HsSpline *h);

// Homeomorphic matching of `n` landmark pairs (`sigma <= 0` for the default width,
// `steps == 0` for the default step count).
//
// # Safety
// `sources` and `targets` must each hold `2n` doubles; `out` must be a writable handle slot.
enum HsStatus hs_match_homeo(const double *sources,
                             const double *targets,
                             size_t n,
                             double sigma,
                             double lambda,
                             size_t steps,
                             struct HsFlow2d **out);

// Applies the forward map to `m` interleaved points.
//
// # Safety
// `h` must come from [`hs_match_homeo`]; `points` and `values` must hold `2m` doubles.
enum HsStatus hs_flow2d_forward(const struct HsFlow2d *h,
                                const double *points,
                                size_t m,
                                double *values);

// Applies the inverse map to `m` interleaved points.
//
// # Safety
// As [`hs_flow2d_forward`].
enum HsStatus hs_flow2d_inverse(const struct HsFlow2d *h,
                                const double *points,
                                size_t m,
                                double *values);

// # Safety
// `h` must be null or a handle from [`hs_match_homeo`] not yet freed.
void hs_flow2d_free(struct HsFlow2d *h);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HOMEOSPLINE_H */
