#ifndef DYNSAMPLE_H
#define DYNSAMPLE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DsStatus {
  DS_STATUS_OK = 0,
  DS_STATUS_NULL_POINTER = 1,
  DS_STATUS_INVALID_UTF8 = 2,
  DS_STATUS_INVALID_ARGUMENT = 3,
  DS_STATUS_SIGN_PATTERN = 4,
  DS_STATUS_RHO_BELOW_THRESHOLD = 5,
  DS_STATUS_RESONANT_POINT = 6,
  DS_STATUS_PRECISION_INSUFFICIENT = 7,
  DS_STATUS_TOL_UNACHIEVABLE = 8,
  DS_STATUS_ILL_CONDITIONED = 9,
  DS_STATUS_ROOT_BRACKET = 10,
  DS_STATUS_PARSE = 11,
  DS_STATUS_BUFFER_TOO_SMALL = 12,
  DS_STATUS_INTERNAL = 13,
} DsStatus;

// Initial datum given by its sine coefficients.
typedef struct DsDatum DsDatum;

// Plan, trace and recovery of one synthetic job.
typedef struct DsJob DsJob;

// Spatial operator `Σ α_{2l} ∂_x^{2l}` on `[0, π]` with Dirichlet ends.
typedef struct DsOperator DsOperator;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or null. Valid until the
// next call on the same thread.
const char *ds_last_error(void);

// Library version as a static string.
const char *ds_version(void);

// # Safety
// `s` must come from this library or be null.
void ds_string_free(char *s);

// Operator from `α₂, α₄, …` (`len ≥ 1`), which must alternate in sign
// starting positive.
//
// # Safety
// `alpha` points to `len` doubles; `out` is writable.
enum DsStatus ds_operator_new(const double *alpha, size_t len, struct DsOperator **out);

// # Safety
// `out` is writable.
enum DsStatus ds_operator_heat(struct DsOperator **out);

// # Safety
// `op` is a live handle; `out` is writable.
enum DsStatus ds_operator_lambda(const struct DsOperator *op, uint64_t k, double *out);

// Smallest admissible ratio, `2N ln 2` (strict).
//
// # Safety
// `op` is a live handle; `out` is writable.
enum DsStatus ds_operator_rho_threshold(const struct DsOperator *op, double *out);

// Ratio at which the coefficient bounds propagate for `n` samples.
//
// # Safety
// `op` is a live handle; `out` is writable.
enum DsStatus ds_operator_induction_rho(const struct DsOperator *op, size_t n, double *out);

// # Safety
// `op` comes from this library or is null; it is not used afterwards.
void ds_operator_free(struct DsOperator *op);

// Datum with sine coefficients `coeffs[k-1] = f̂_k` and smoothness `r`.
//
// # Safety
// `coeffs` points to `len` doubles; `out` is writable.
enum DsStatus ds_datum_new(double r, const double *coeffs, size_t len, struct DsDatum **out);

// Seeded member of the smoothness-`r` unit ball supported on `k ≤ support`.
//
// # Safety
// `out` is writable.
enum DsStatus ds_datum_random(double r,
                              size_t support,
                              double margin,
                              uint64_t seed,
                              struct DsDatum **out);

// # Safety
// `d` is a live handle; `out` is writable.
enum DsStatus ds_datum_ball_norm(const struct DsDatum *d, double *out);

// # Safety
// `d` comes from this library or is null; it is not used afterwards.
void ds_datum_free(struct DsDatum *d);

// Sample `datum` at `x0` (an expression such as `"pi*(sqrt(5)-1)/2"`) on
// the geometric schedule `t_j = ρ^{j-1} t₁`, `j = 1..n`, and recover.
// Precision is chosen automatically.
//
// # Safety
// `op` and `datum` are live handles; `x0` is a nul-terminated string;
// `out` is writable.
enum DsStatus ds_job_run(const struct DsOperator *op,
                         const struct DsDatum *datum,
                         const char *x0,
                         uint64_t k_scan,
                         double t1,
                         double rho,
                         size_t n,
                         struct DsJob **out);

// Recovered `c̄_k`, `k = 1..n`, rounded to double.
//
// # Safety
// `job` is a live handle; `out` holds `cap` doubles; `len` is writable.
enum DsStatus ds_job_coefficients(const struct DsJob *job, double *out, size_t cap, size_t *len);

// Reconstructed sine coefficients `f̄_k`, `k = 1..⌈n/2⌉`.
//
// # Safety
// `job` is a live handle; `out` holds `cap` doubles; `len` is writable.
enum DsStatus ds_job_reconstruction(const struct DsJob *job, double *out, size_t cap, size_t *len);

// A-priori bounds on `|c_k - c̄_k|`.
//
// # Safety
// `job` is a live handle; `out` holds `cap` doubles; `len` is writable.
enum DsStatus ds_job_bounds(const struct DsJob *job, double *out, size_t cap, size_t *len);

// `L²` distance between the datum and its reconstruction.
//
// # Safety
// `job` is a live handle; `out` is writable.
enum DsStatus ds_job_l2_error(const struct DsJob *job, double *out);

// `1` when every coefficient error is within its bound, else `0`.
//
// # Safety
// `job` is a live handle; `out` is writable.
enum DsStatus ds_job_bounds_hold(const struct DsJob *job, int32_t *out);

// Full result as JSON with decimal strings; release with [`ds_string_free`].
//
// # Safety
// `job` is a live handle; `out` is writable.
enum DsStatus ds_job_result_json(const struct DsJob *job, char **out);

// The sampled trace as JSON; release with [`ds_string_free`].
//
// # Safety
// `job` is a live handle; `out` is writable.
enum DsStatus ds_job_trace_json(const struct DsJob *job, char **out);

// # Safety
// `job` comes from this library or is null; it is not used afterwards.
void ds_job_free(struct DsJob *job);

// Run the recursion on a trace given as JSON (the format of
// [`ds_job_trace_json`]).
//
// # Safety
// `op` is a live handle; `trace_json` is a nul-terminated string; `out`
// holds `cap` doubles; `len` is writable.
enum DsStatus ds_recover_trace_json(const struct DsOperator *op,
                                    const char *trace_json,
                                    double *out,
                                    size_t cap,
                                    size_t *len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DYNSAMPLE_H */
