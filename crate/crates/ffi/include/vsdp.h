#ifndef VSDP_H
#define VSDP_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum VsdpStatus {
  VSDP_STATUS_OK = 0,
  VSDP_STATUS_NULL_POINTER = 1,
  VSDP_STATUS_INVALID_INPUT = 2,
  VSDP_STATUS_DIMENSION_MISMATCH = 3,
  VSDP_STATUS_NON_FINITE = 4,
  VSDP_STATUS_INFEASIBLE = 5,
  // An iterative routine stopped before meeting its tolerance. Outputs
  // hold the last iterate.
  VSDP_STATUS_NO_CONVERGENCE = 6,
  VSDP_STATUS_PARSE = 7,
  VSDP_STATUS_IO = 8,
  VSDP_STATUS_BUDGET = 9,
  // Output buffer shorter than the result.
  VSDP_STATUS_BUFFER_TOO_SMALL = 10,
  // A Rust panic was caught at the boundary.
  VSDP_STATUS_INTERNAL = 11,
} VsdpStatus;

// A symbol-level model plus measurements for one block.
typedef struct VsdpSystem VsdpSystem;

// Options for `vsdp_demod_sdp`. Zero fields select the defaults.
typedef struct VsdpSolverOptions {
  double gap_tol;
  size_t max_iter;
} VsdpSolverOptions;

// Solver statistics from `vsdp_demod_sdp`.
typedef struct VsdpSolveInfo {
  size_t iterations;
  double gap;
  bool converged;
} VsdpSolveInfo;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *vsdp_version(void);

// Message for the last failed call on this thread; empty after a success.
// The pointer stays valid until the next call on the same thread.
const char *vsdp_last_error(void);

// Parses a system from its text form.
//
// # Safety
// `text` must be a NUL-terminated string and `out` a valid pointer.
enum VsdpStatus vsdp_system_from_text(const char *text, struct VsdpSystem **out);

// Loads a system file.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum VsdpStatus vsdp_system_load(const char *path, struct VsdpSystem **out);

// Simulates one block on a fresh channel draw with the default link
// parameters. `ebn0_db = +inf` gives a noiseless block. The transmitted
// symbols go to `d_true` (at least `nb` entries, may be null).
//
// # Safety
// `preset` must be a NUL-terminated string, `out` a valid pointer and
// `d_true` either null or writable for `len` entries.
enum VsdpStatus vsdp_simulate(const char *preset,
                              double ebn0_db,
                              uint64_t seed,
                              uint64_t trial,
                              int8_t *d_true,
                              size_t len,
                              struct VsdpSystem **out);

// Writes the text form into `buf` (NUL-terminated). `needed` receives the
// full size including the terminator, so callers can size a second call.
//
// # Safety
// `sys` must be a live handle, `buf` writable for `cap` bytes (or null when
// `cap` is 0) and `needed` null or valid.
enum VsdpStatus vsdp_system_to_text(const struct VsdpSystem *sys,
                                    char *buf,
                                    size_t cap,
                                    size_t *needed);

// Number of symbols per block; 0 for a null handle.
//
// # Safety
// `sys` must be null or a live handle.
size_t vsdp_system_nb(const struct VsdpSystem *sys);

// Number of correlator outputs per block; 0 for a null handle.
//
// # Safety
// `sys` must be null or a live handle.
size_t vsdp_system_nr(const struct VsdpSystem *sys);

// # Safety
// `sys` must be null or a handle not yet freed.
void vsdp_system_free(struct VsdpSystem *sys);

// SDP-relaxation detector. On `VsdpStatus::NoConvergence` the outputs
// still hold the decisions from the last iterate.
//
// # Safety
// `sys` must be a live handle, `opts` and `info` null or valid, `d_hat`
// writable for `len` entries.
enum VsdpStatus vsdp_demod_sdp(const struct VsdpSystem *sys,
                               const struct VsdpSolverOptions *opts,
                               int8_t *d_hat,
                               size_t len,
                               struct VsdpSolveInfo *info);

// Exhaustive minimum-residual detector.
//
// # Safety
// `sys` must be a live handle, `d_hat` writable for `len` entries and
// `residual` null or valid.
enum VsdpStatus vsdp_demod_ml(const struct VsdpSystem *sys,
                              int8_t *d_hat,
                              size_t len,
                              double *residual);

// Smallest eigenvalue of the symmetric `n × n` row-major matrix `data`.
// Asymmetric input is rejected.
//
// # Safety
// `data` must be readable for `n·n` doubles and `out` valid.
enum VsdpStatus vsdp_lambda_min(const double *data, size_t n, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* VSDP_H */
