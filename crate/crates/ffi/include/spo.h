#ifndef SPO_H
#define SPO_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result code of every call.
 */
typedef enum SpoStatus {
  SPO_STATUS_OK = 0,
  SPO_STATUS_NULL_POINTER = 1,
  SPO_STATUS_INVALID_ARGUMENT = 2,
  SPO_STATUS_DIMENSION_MISMATCH = 3,
  SPO_STATUS_PARSE = 4,
  SPO_STATUS_NUMERICAL = 5,
  SPO_STATUS_IO = 6,
  /*
   Caller buffer too small; the required length was written back.
   */
  SPO_STATUS_BUFFER_TOO_SMALL = 7,
  SPO_STATUS_PANIC = 99,
} SpoStatus;

typedef enum SpoNcp {
  SPO_NCP_FISCHER_BURMEISTER = 0,
  SPO_NCP_MINIMUM = 1,
} SpoNcp;

typedef enum SpoOperator {
  SPO_OPERATOR_FULL = 0,
  SPO_OPERATOR_REDUCED = 1,
  /*
   Lifts free variables to `x = x⁺ − x⁻` automatically.
   */
  SPO_OPERATOR_COMPLEMENTARY = 2,
} SpoOperator;

/*
 Outcome of a Newton solve.
 */
typedef enum SpoSolveStatus {
  SPO_SOLVE_STATUS_CONVERGED = 0,
  SPO_SOLVE_STATUS_MAX_ITERATIONS = 1,
  SPO_SOLVE_STATUS_STEP_BLOWUP = 2,
  SPO_SOLVE_STATUS_LINEAR_SOLVE_FAILURE = 3,
} SpoSolveStatus;

/*
 Opaque problem handle.
 */
typedef struct SpoProblem SpoProblem;

/*
 Opaque solve report handle.
 */
typedef struct SpoReport SpoReport;

/*
 Newton settings; fill with [`spo_options_default`] before changing fields.
 */
typedef struct SpoOptions {
  size_t max_iter;
  double eps;
  double delta;
  /*
   `INFINITY` disables the step bound.
   */
  double step_safety;
  enum SpoNcp ncp;
  enum SpoOperator op;
} SpoOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failed call on this thread, or null. Valid until the
 next call on the same thread.
 */
const char *spo_last_error(void);

/*
 Library version as a static string.
 */
const char *spo_version(void);

/*
 Loads an instance from its JSON serialization.

 # Safety
 `json` must be a NUL-terminated string; `out` must be writable.
 */
enum SpoStatus spo_problem_from_json(const char *json, struct SpoProblem **out);

/*
 Generates a benchmark instance from `FAMILY:PARAMS`, e.g.
 `"sensing:n=64,m=32,p=4,s=8,seed=1,rho=0.5"`.

 # Safety
 `spec` must be a NUL-terminated string; `out` must be writable.
 */
enum SpoStatus spo_problem_generate(const char *spec, struct SpoProblem **out);

/*
 `min ½xᵀQx + cᵀx + ρ‖x‖₀  s.t.  A_eq x = b_eq, A_in x ≤ b_in` and, if
 `nonneg` is nonzero, `x ≥ 0`. `q` is `n × n`, `a_eq` is `p × n`, `a_in` is
 `m × n`, all row-major; pointers may be null when the length is zero.

 # Safety
 Each pointer must reference the stated number of doubles.
 */
enum SpoStatus spo_problem_quadratic(size_t n,
                                     const double *q,
                                     const double *c,
                                     size_t p,
                                     const double *a_eq,
                                     const double *b_eq,
                                     size_t m,
                                     const double *a_in,
                                     const double *b_in,
                                     int32_t nonneg,
                                     double rho,
                                     struct SpoProblem **out);

/*
 Releases a problem; null is ignored.

 # Safety
 `problem` must come from this library and not be used afterwards.
 */
void spo_problem_free(struct SpoProblem *problem);

/*
 Variables `n`, inequalities `m`, equalities `p`; any output may be null.

 # Safety
 `problem` must be a live handle.
 */
enum SpoStatus spo_problem_dims(const struct SpoProblem *problem, size_t *n, size_t *m, size_t *p);

/*
 Replaces the penalty parameter.

 # Safety
 `problem` must be a live handle.
 */
enum SpoStatus spo_problem_set_rho(struct SpoProblem *problem, double rho);

/*
 `f(x) + ρ‖x‖₀(δ)`.

 # Safety
 `problem` must be a live handle, `x` must hold `n` doubles and `out` be writable.
 */
enum SpoStatus spo_objective(const struct SpoProblem *problem,
                             const double *x,
                             size_t n,
                             double delta,
                             double *out);

/*
 ℓ1-surrogate starting point into `x0_out` (capacity `len`); the required
 length goes to `needed` when it is not null.

 # Safety
 `x0_out` must have room for `len` doubles.
 */
enum SpoStatus spo_presolve(const struct SpoProblem *problem,
                            double *x0_out,
                            size_t len,
                            size_t *needed);

/*
 Library defaults: 100 iterations, ε = 1e−6, δ = 1e−4, step bound 100,
 Fischer–Burmeister, full operator.

 # Safety
 `opts` must be writable.
 */
enum SpoStatus spo_options_default(struct SpoOptions *opts);

/*
 Runs the Newton method from `x0` (length `n`), or from the ℓ1 presolve
 when `x0` is null. `opts` may be null for the defaults.

 # Safety
 `problem` must be a live handle, `x0` null or `n` doubles, `out` writable.
 */
enum SpoStatus spo_solve(const struct SpoProblem *problem,
                         const double *x0,
                         size_t n,
                         const struct SpoOptions *opts,
                         struct SpoReport **out);

/*
 Releases a report; null is ignored.

 # Safety
 `report` must come from this library and not be used afterwards.
 */
void spo_report_free(struct SpoReport *report);

/*
 # Safety
 `report` must be a live handle and `out` writable.
 */
enum SpoStatus spo_report_status(const struct SpoReport *report, enum SpoSolveStatus *out);

/*
 Iterations taken, final objective `f + ρ‖x‖₀(δ)`, support size and final
 S-stationarity residual; any output may be null.

 # Safety
 `report` must be a live handle.
 */
enum SpoStatus spo_report_summary(const struct SpoReport *report,
                                  size_t *iterations,
                                  double *objective,
                                  size_t *l0,
                                  double *residual);

/*
 Final `x` into `x_out` (capacity `len`); see [`spo_presolve`] for `needed`.

 # Safety
 `x_out` must have room for `len` doubles.
 */
enum SpoStatus spo_report_x(const struct SpoReport *report,
                            double *x_out,
                            size_t len,
                            size_t *needed);

/*
 Full report as JSON; release with [`spo_string_free`].

 # Safety
 `report` must be a live handle and `out` writable.
 */
enum SpoStatus spo_report_to_json(const struct SpoReport *report, char **out);

/*
 Releases a string returned by this library; null is ignored.

 # Safety
 `s` must come from this library and not be used afterwards.
 */
void spo_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SPO_H */
