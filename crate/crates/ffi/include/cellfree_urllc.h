#ifndef CELLFREE_URLLC_H
#define CELLFREE_URLLC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status code returned by every fallible function.
typedef enum CfuStatus {
  CFU_STATUS_OK = 0,
  CFU_STATUS_NULL_POINTER = 1,
  CFU_STATUS_INVALID_CONFIG = 2,
  CFU_STATUS_INVALID_ARGUMENT = 3,
  CFU_STATUS_NUMERICAL = 4,
  CFU_STATUS_IO = 5,
  CFU_STATUS_PARSE = 6,
  CFU_STATUS_INVALID_UTF8 = 7,
  CFU_STATUS_OUT_OF_RANGE = 8,
  CFU_STATUS_BUFFER_TOO_SMALL = 9,
  CFU_STATUS_PANIC = 10,
} CfuStatus;

// Opaque run configuration.
typedef struct CfuConfig CfuConfig;

// Opaque result set of one experiment.
typedef struct CfuResults CfuResults;

// Per-tuple summary. Statistics without samples are NaN.
typedef struct CfuTupleSummary {
  double gu_rate_95_bps;
  double uav_rate_95_bps;
  double gu_median_power_w;
  double uav_median_power_w;
  uint64_t runs;
  uint64_t converged;
  uint64_t failed;
  double mean_iterations;
  uint64_t max_iterations;
  uint64_t runs_with_ascent_violations;
} CfuTupleSummary;

// One user's outcome in one run.
typedef struct CfuUserRecord {
  uint64_t tuple;
  uint64_t scenario;
  uint64_t user;
  // 0 for a ground user, 1 for a UAV.
  uint8_t is_uav;
  double rate_bps;
  double power_w;
} CfuUserRecord;

// Finite-blocklength rate parameters.
typedef struct CfuRateParams {
  double bandwidth_hz;
  uint32_t coherence_len;
  uint32_t pilot_len;
  double tx_duration_s;
  double block_error_prob;
} CfuRateParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message describing the last failure on this thread, or null. The pointer
// stays valid until the next call into this library on the same thread.
const char *cfu_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *cfu_version(void);

// Creates a configuration holding the default parameters.
//
// # Safety
// `out` must be a valid pointer.
enum CfuStatus cfu_config_new(struct CfuConfig **out);

// Creates a configuration from a TOML file applied on top of the defaults.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum CfuStatus cfu_config_load(const char *path, struct CfuConfig **out);

// Sets one dotted configuration key, e.g. `"gu.count"` to `"30"`.
//
// # Safety
// `cfg` must come from `cfu_config_new`/`cfu_config_load`; `key` and `value`
// must be NUL-terminated strings.
enum CfuStatus cfu_config_set(struct CfuConfig *cfg, const char *key, const char *value);

// Checks the configuration for inconsistent settings.
//
// # Safety
// `cfg` must be a live configuration handle.
enum CfuStatus cfu_config_validate(const struct CfuConfig *cfg);

// Releases a configuration. Null is ignored.
//
// # Safety
// `cfg` must be null or a handle not yet freed.
void cfu_config_free(struct CfuConfig *cfg);

// Runs the configured sweep. `parallel` selects the thread pool; both modes
// give identical results.
//
// # Safety
// `cfg` must be a live configuration handle and `out` a valid pointer.
enum CfuStatus cfu_run(const struct CfuConfig *cfg, bool parallel, struct CfuResults **out);

// Releases a result set. Null is ignored.
//
// # Safety
// `res` must be null or a handle not yet freed.
void cfu_results_free(struct CfuResults *res);

// Number of sweep tuples in the result set.
//
// # Safety
// `res` must be a live result handle and `out` a valid pointer.
enum CfuStatus cfu_results_tuple_count(const struct CfuResults *res, size_t *out);

// Copies the name of tuple `index` (e.g. `cf-pzf-icba-sum-dl`) into `buf`
// including the terminating NUL. `needed` receives the required buffer size;
// `CFU_STATUS_BUFFER_TOO_SMALL` is returned when `buf_len` is smaller.
//
// # Safety
// `res` must be a live result handle, `needed` a valid pointer, and `buf`
// writable for `buf_len` bytes (or null when `buf_len` is 0).
enum CfuStatus cfu_results_tuple_name(const struct CfuResults *res,
                                      size_t index,
                                      char *buf,
                                      size_t buf_len,
                                      size_t *needed);

// Index of the tuple with the given name.
//
// # Safety
// `res` must be a live result handle, `name` a NUL-terminated string and
// `out` a valid pointer.
enum CfuStatus cfu_results_tuple_index(const struct CfuResults *res, const char *name, size_t *out);

// Summary statistics of tuple `index`.
//
// # Safety
// `res` must be a live result handle and `out` a valid pointer.
enum CfuStatus cfu_results_summary(const struct CfuResults *res,
                                   size_t index,
                                   struct CfuTupleSummary *out);

// Number of per-user records, ordered by (tuple, scenario, user).
//
// # Safety
// `res` must be a live result handle and `out` a valid pointer.
enum CfuStatus cfu_results_record_count(const struct CfuResults *res, size_t *out);

// Per-user record `index`.
//
// # Safety
// `res` must be a live result handle and `out` a valid pointer.
enum CfuStatus cfu_results_record(const struct CfuResults *res,
                                  size_t index,
                                  struct CfuUserRecord *out);

// Writes `results.csv`, `summary.json` and the per-tuple ECDF files into `dir`,
// creating it if needed.
//
// # Safety
// `res` must be a live result handle and `dir` a NUL-terminated string.
enum CfuStatus cfu_results_write(const struct CfuResults *res, const char *dir);

// Fills `out` with the default rate parameters (20 MHz, τc = 200, τp = 32,
// T = 50 µs, ε = 1e-5).
//
// # Safety
// `out` must be a valid pointer.
enum CfuStatus cfu_rate_params_default(struct CfuRateParams *out);

// Finite-blocklength rate in bit/s at linear SINR `sinr`.
//
// # Safety
// `params` and `out` must be valid pointers.
enum CfuStatus cfu_urllc_rate(const struct CfuRateParams *params, double sinr, double *out);

// Shannon part of the rate in bit/s.
//
// # Safety
// `params` and `out` must be valid pointers.
enum CfuStatus cfu_shannon_rate(const struct CfuRateParams *params, double sinr, double *out);

// Dispersion penalty in bit/s.
//
// # Safety
// `params` and `out` must be valid pointers.
enum CfuStatus cfu_dispersion(const struct CfuRateParams *params, double sinr, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CELLFREE_URLLC_H */
