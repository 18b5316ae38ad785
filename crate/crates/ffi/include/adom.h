/* C interface for the decentralized optimization benchmark library. */

#ifndef ADOM_H
#define ADOM_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status code returned by every fallible function.
 */
typedef enum AdomStatus {
  AdomStatus_Ok = 0,
  AdomStatus_NullPointer = 1,
  AdomStatus_InvalidUtf8 = 2,
  AdomStatus_ConfigError = 3,
  AdomStatus_OracleError = 4,
  AdomStatus_NetworkError = 5,
  AdomStatus_RunError = 6,
  AdomStatus_IoError = 7,
  AdomStatus_OutOfRange = 8,
} AdomStatus;

/**
 * Opaque handle to a parsed run configuration.
 */
typedef struct AdomConfig AdomConfig;

/**
 * Opaque handle to a finished run and its metric trace.
 */
typedef struct AdomTrace AdomTrace;

/**
 * One row of the metric trace. `lyapunov` is NaN when the potential was not
 * tracked (inexact oracle or non-quadratic objective).
 */
typedef struct AdomTraceRow {
  uint64_t iter;
  uint64_t comm_rounds;
  double dist_sq;
  double consensus_err;
  double func_gap;
  double lyapunov;
} AdomTraceRow;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the message of the most recent error on this thread into `buf`
 * (NUL-terminated, truncated to `len`). Returns the full message length.
 *
 * # Safety
 * `buf` must point to `len` writable bytes, or be NULL (query mode).
 */
uintptr_t adom_last_error_message(char *buf, uintptr_t len);

/**
 * Parses the config file at `path` into a new handle stored in `*out`.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum AdomStatus adom_config_load(const char *path, struct AdomConfig **out);

/**
 * Frees a config handle. NULL is a no-op.
 *
 * # Safety
 * `cfg` must come from [`adom_config_load`] and not be freed twice.
 */
void adom_config_free(struct AdomConfig *cfg);

/**
 * Executes the configured run and stores a trace handle in `*out`.
 *
 * # Safety
 * `cfg` must be a live config handle and `out` a valid pointer.
 */
enum AdomStatus adom_run_execute(const struct AdomConfig *cfg, struct AdomTrace **out);

/**
 * Number of recorded rows (iterations + 1).
 *
 * # Safety
 * `trace` must be a live trace handle.
 */
uintptr_t adom_trace_len(const struct AdomTrace *trace);

/**
 * Copies row `idx` into `*row`.
 *
 * # Safety
 * `trace` must be a live trace handle and `row` a valid pointer.
 */
enum AdomStatus adom_trace_row(const struct AdomTrace *trace,
                               uintptr_t idx,
                               struct AdomTraceRow *row);

/**
 * Condition number chi = lambda_max / lambda_min_plus of the schedule used.
 *
 * # Safety
 * `trace` must be a live trace handle.
 */
double adom_trace_chi(const struct AdomTrace *trace);

/**
 * Frees a trace handle. NULL is a no-op.
 *
 * # Safety
 * `trace` must come from [`adom_run_execute`] and not be freed twice.
 */
void adom_trace_free(struct AdomTrace *trace);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ADOM_H */
