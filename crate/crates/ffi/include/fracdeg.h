#ifndef FRACDEG_H
#define FRACDEG_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every call.
 */
typedef enum FdStatus {
  FD_STATUS_OK = 0,
  FD_STATUS_NULL_POINTER = 1,
  FD_STATUS_INVALID_UTF8 = 2,
  /**
   * Malformed or inconsistent configuration, including a schema mismatch.
   */
  FD_STATUS_CONFIG = 3,
  /**
   * Argument outside the domain of the computation.
   */
  FD_STATUS_DOMAIN = 4,
  FD_STATUS_UNSUPPORTED = 5,
  /**
   * Quadrature, optimizer, time step or stability failure.
   */
  FD_STATUS_NUMERICAL = 6,
  FD_STATUS_IO = 7,
  /**
   * Index or buffer size out of range.
   */
  FD_STATUS_OUT_OF_RANGE = 8,
  FD_STATUS_PANIC = 9,
} FdStatus;

/**
 * A validated `problem/v1` configuration.
 */
typedef struct FdProblem FdProblem;

typedef struct FdSweepResult FdSweepResult;

/**
 * The 17 stored samples of one solve.
 */
typedef struct FdTrajectory FdTrajectory;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the next call.
 */
const char *fd_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *fd_version(void);

/**
 * `G_d(α)`, the constant of the d-dimensional Lévy measure.
 *
 * # Safety
 * `out` must be valid for one `double` write.
 */
enum FdStatus fd_levy_coefficient(size_t d, double alpha, double *out);

/**
 * Parses and validates a `problem/v1` JSON document.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be valid for one pointer write.
 */
enum FdStatus fd_problem_from_json(const char *json, struct FdProblem **out);

/**
 * # Safety
 * `problem` must come from [`fd_problem_from_json`] and not be used afterwards.
 */
void fd_problem_free(struct FdProblem *problem);

/**
 * Solves the problem and keeps the 17 evenly spaced samples.
 *
 * # Safety
 * `problem` must be a live handle; `out` must be valid for one pointer write.
 */
enum FdStatus fd_solve(const struct FdProblem *problem, struct FdTrajectory **out);

/**
 * # Safety
 * `traj` must come from [`fd_solve`] and not be used afterwards.
 */
void fd_trajectory_free(struct FdTrajectory *traj);

/**
 * Number of stored samples and cells per sample (the padded grid).
 *
 * # Safety
 * `traj` must be a live handle; the out pointers must be valid for one write each.
 */
enum FdStatus fd_trajectory_shape(const struct FdTrajectory *traj, size_t *samples, size_t *cells);

/**
 * Left edge and cell width of the padded grid.
 *
 * # Safety
 * `traj` must be a live handle; the out pointers must be valid for one write each.
 */
enum FdStatus fd_trajectory_grid(const struct FdTrajectory *traj, double *x0, double *dx);

/**
 * Copies sample `index` into `values` (capacity `len`) and its time into `time`.
 *
 * # Safety
 * `traj` must be a live handle, `values` valid for `len` writes and `time` for one.
 */
enum FdStatus fd_trajectory_sample(const struct FdTrajectory *traj,
                                   size_t index,
                                   double *time,
                                   double *values,
                                   size_t len);

/**
 * Runs a `sweep-config/v1` JSON document.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be valid for one pointer write.
 */
enum FdStatus fd_sweep_run(const char *json, struct FdSweepResult **out);

/**
 * # Safety
 * `result` must come from [`fd_sweep_run`] and not be used afterwards.
 */
void fd_sweep_free(struct FdSweepResult *result);

/**
 * Whether every verdict of the sweep passed.
 *
 * # Safety
 * `result` must be a live handle; `passed` must be valid for one write.
 */
enum FdStatus fd_sweep_passed(const struct FdSweepResult *result, bool *passed);

/**
 * The `sweep-result/v1` JSON document; release it with [`fd_string_free`].
 *
 * # Safety
 * `result` must be a live handle; `out` must be valid for one pointer write.
 */
enum FdStatus fd_sweep_to_json(const struct FdSweepResult *result, char **out);

/**
 * # Safety
 * `s` must come from this library and not be used afterwards.
 */
void fd_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FRACDEG_H */
