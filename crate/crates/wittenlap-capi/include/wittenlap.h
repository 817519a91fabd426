/* C interface to the wittenlap exponential-asymptotics library. */

#ifndef WITTENLAP_H
#define WITTENLAP_H

/* This file is generated by cbindgen from wittenlap-capi; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes returned by every fallible call.
typedef enum WlStatus {
  // Success.
  WL_STATUS_OK = 0,
  // A required pointer argument was null.
  WL_STATUS_NULL_ARGUMENT = 1,
  // An input string was not valid UTF-8.
  WL_STATUS_INVALID_UTF8 = 2,
  // The model JSON could not be parsed.
  WL_STATUS_PARSE_ERROR = 3,
  // The pipeline failed (degenerate data, truncation breakdown, ...).
  WL_STATUS_COMPUTE_ERROR = 4,
  // A solution index was out of range.
  WL_STATUS_INDEX_OUT_OF_RANGE = 5,
  // The requested quantity is undefined for this branch.
  WL_STATUS_NOT_AVAILABLE = 6,
  // An internal invariant failed; see `wl_last_error_message`.
  WL_STATUS_INTERNAL_ERROR = 7,
} WlStatus;

// Opaque handle to a solved model.
typedef struct WlPipeline WlPipeline;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Parses a trigonometric-polynomial model
// `{"constant": c0, "cos": [...], "sin": [...]}` and solves its spectrum.
// `epsilon` is the connection-point offset (0.02 is a good default).
//
// # Safety
// `json` must be a valid NUL-terminated string and `out` a valid pointer.
enum WlStatus wl_solve_potential(const char *json, double epsilon, struct WlPipeline **out);

// Parses abstract critical data
// `{"points": [{"q": .., "value": .., "curvature": ..}, ...]}` and solves
// the model's exponential types.
//
// # Safety
// `json` must be a valid NUL-terminated string and `out` a valid pointer.
enum WlStatus wl_solve_abstract(const char *json, struct WlPipeline **out);

// Releases a pipeline handle.  Null is ignored.
//
// # Safety
// `pipeline` must be null or a pointer obtained from `wl_solve_*`, not yet
// freed.
void wl_pipeline_free(struct WlPipeline *pipeline);

// Number of solved eigenvalue branches (including the exact zero branch).
//
// # Safety
// `pipeline` and `out` must be valid pointers.
enum WlStatus wl_solution_count(const struct WlPipeline *pipeline, uintptr_t *out);

// Whether branch `index` is the exact zero eigenvalue.
//
// # Safety
// `pipeline` and `out` must be valid pointers.
enum WlStatus wl_solution_is_zero(const struct WlPipeline *pipeline, uintptr_t index, int32_t *out);

// Exponential type of branch `index`: the rate c of its leading e^{c/h}.
// The zero branch has no type (`WL_STATUS_NOT_AVAILABLE`).
//
// # Safety
// `pipeline` and `out` must be valid pointers.
enum WlStatus wl_solution_exponential_type(const struct WlPipeline *pipeline,
                                           uintptr_t index,
                                           double *out);

// Numeric value of the eigenvalue prediction h·E_r(h) at a concrete h.
//
// # Safety
// `pipeline` and `out` must be valid pointers.
enum WlStatus wl_solution_eigenvalue_at(const struct WlPipeline *pipeline,
                                        uintptr_t index,
                                        double h,
                                        double *out);

// Serializes branch `index`'s reduced energy E_r(h) as a JSON array of
// monomial records `{c, m, k, l, re, im}`.  Free with `wl_string_free`.
//
// # Safety
// `pipeline` and `out` must be valid pointers.
enum WlStatus wl_solution_terms_json(const struct WlPipeline *pipeline,
                                     uintptr_t index,
                                     char **out);

// Builds the per-interval eigenfunction coefficient table for branch
// `index` and serializes it as JSON
// `[{"interval": j, "D_plus": [...], "D_minus": [...]}, ...]`.
// Coefficients are normalized so the leading coefficient of the base-point
// minus component is −1.  Free with `wl_string_free`.
//
// # Safety
// `pipeline` and `out` must be valid pointers.
enum WlStatus wl_eigenfunction_table_json(const struct WlPipeline *pipeline,
                                          uintptr_t index,
                                          char **out);

// Returns the last error message on this thread (caller frees with
// `wl_string_free`), or null if no error has occurred.
char *wl_last_error_message(void);

// Releases a string returned by this library.  Null is ignored.
//
// # Safety
// `s` must be null or an unfreed string returned by this library.
void wl_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* WITTENLAP_H */
