#ifndef RIIS_FSI_H
#define RIIS_FSI_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every call.
 */
typedef enum RiisStatus {
  RIIS_STATUS_OK = 0,
  RIIS_STATUS_NULL_POINTER = 1,
  RIIS_STATUS_INVALID_ARGUMENT = 2,
  /**
   * Invalid configuration or unparsable input file.
   */
  RIIS_STATUS_CONFIG = 3,
  RIIS_STATUS_IO = 4,
  /**
   * The linear solver failed to converge or broke down.
   */
  RIIS_STATUS_SOLVER = 5,
  /**
   * Geometry or valve-integral failure.
   */
  RIIS_STATUS_GEOMETRY = 6,
  /**
   * Any other runtime failure.
   */
  RIIS_STATUS_RUNTIME = 7,
  /**
   * The run already reached its end time.
   */
  RIIS_STATUS_FINISHED = 8,
  RIIS_STATUS_PANIC = 9,
} RiisStatus;

/**
 * Opaque simulation handle.
 */
typedef struct RiisSimulation RiisSimulation;

/**
 * One completed step; mirrors the time-series CSV columns.
 */
typedef struct RiisStepRecord {
  double t;
  double c;
  double cdot;
  double orifice_area;
  double flux;
  double dp_probe;
  double f_fluid;
  double f_elastic;
  double denom;
  double rhs;
  uint64_t iters;
  double res;
} RiisStepRecord;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty after a success.
 * Valid until the next call on the same thread.
 */
const char *riis_last_error_message(void);

/**
 * Create a simulation from a TOML configuration file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a writable pointer.
 */
enum RiisStatus riis_simulation_from_file(const char *path, struct RiisSimulation **out);

/**
 * Create a simulation from TOML text; relative paths resolve against the
 * working directory.
 *
 * # Safety
 * `toml` must be a NUL-terminated string and `out` a writable pointer.
 */
enum RiisStatus riis_simulation_from_toml(const char *toml, struct RiisSimulation **out);

/**
 * Release a simulation; null is ignored.
 *
 * # Safety
 * `sim` must be null or a handle from this library not yet freed.
 */
void riis_simulation_free(struct RiisSimulation *sim);

/**
 * Advance one step and optionally copy its record.
 *
 * # Safety
 * `sim` must be a live handle; `record` null or writable.
 */
enum RiisStatus riis_simulation_step(struct RiisSimulation *sim, struct RiisStepRecord *record);

/**
 * Run to the end time, writing all outputs into `output_dir`.
 *
 * # Safety
 * `sim` must be a live handle and `output_dir` a NUL-terminated string.
 */
enum RiisStatus riis_simulation_run(struct RiisSimulation *sim, const char *output_dir);

/**
 * Current time, opening coefficient and rate; null outputs are skipped.
 *
 * # Safety
 * `sim` must be a live handle; outputs null or writable.
 */
enum RiisStatus riis_simulation_state(const struct RiisSimulation *sim,
                                      double *t,
                                      double *c,
                                      double *cdot);

/**
 * Builtin inlet and outlet pressures in pascal at time `t` in seconds.
 *
 * # Safety
 * `p_in` and `p_out` must be writable.
 */
enum RiisStatus riis_builtin_pressures(double t, double *p_in, double *p_out);

/**
 * One RK4 step of `c'' = rhs - beta c'` with `rhs` frozen, in place.
 *
 * # Safety
 * `c` and `cdot` must be valid read-write pointers.
 */
enum RiisStatus riis_valve_rk4(double *c, double *cdot, double rhs, double beta, double dt);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RIIS_FSI_H */
