#ifndef SPEEDLIMIT_H
#define SPEEDLIMIT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SlStatus {
  SL_STATUS_OK = 0,
  SL_STATUS_NULL_POINTER = 1,
  // Invalid parameters, dimensions or configuration text.
  SL_STATUS_INVALID_ARGUMENT = 2,
  // Integration or linear-algebra failure.
  SL_STATUS_NUMERIC = 3,
  // The requested bound does not apply to this system.
  SL_STATUS_APPLICABILITY = 4,
  // A Rust panic was caught at the boundary.
  SL_STATUS_PANIC = 5,
} SlStatus;

typedef struct SlSystem SlSystem;

typedef struct SlTrajectory SlTrajectory;

// Integrated functionals over the horizon, SI units.
typedef struct SlActions {
  double horizon;
  double sigma;
  double upsilon;
  double phi;
  double sigma_sys;
  double sigma_env;
} SlActions;

typedef struct SlBoundResult {
  double lhs;
  double rhs;
  double slack;
  double tolerance;
  // Power of k_B carried by `lhs`, `rhs` and `slack`.
  double kb_power;
  bool satisfied;
} SlBoundResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or an empty string.
// The pointer stays valid until the next call into this library on the
// same thread.
const char *sl_last_error(void);

// NUL-terminated library version.
const char *sl_version(void);

// Underdamped particle in the minimum-entropy trap `4kT/(2-t)^2 + γ/(2-t)`.
//
// # Safety
// `out` must be a valid pointer.
enum SlStatus sl_system_trap_paper(double mass,
                                   double friction,
                                   double kb,
                                   double temperature,
                                   double horizon,
                                   struct SlSystem **out);

// Underdamped particle in a harmonic trap of fixed stiffness.
//
// # Safety
// `out` must be a valid pointer.
enum SlStatus sl_system_trap_constant(double mass,
                                      double friction,
                                      double kb,
                                      double temperature,
                                      double stiffness,
                                      double horizon,
                                      struct SlSystem **out);

// Series RLC circuit whose inductance ramps linearly from `l_start` to
// `l_end` over the horizon.
//
// # Safety
// `out` must be a valid pointer.
enum SlStatus sl_system_rlc_linear(double resistance,
                                   double capacitance,
                                   double l_start,
                                   double l_end,
                                   double kb,
                                   double temperature,
                                   double horizon,
                                   struct SlSystem **out);

// System described by a TOML run configuration (same format as the CLI).
//
// # Safety
// `toml` must be a NUL-terminated string and `out` a valid pointer.
enum SlStatus sl_system_from_config(const char *toml, struct SlSystem **out);

// Phase-space dimension, or 0 for a null handle.
//
// # Safety
// `system` must be null or a live handle.
size_t sl_system_dim(const struct SlSystem *system);

// # Safety
// `system` must be null or a handle not yet freed.
void sl_system_free(struct SlSystem *system);

// Integrates the moment equations with `steps` RK4 steps. When both
// `mean` and `cov` are null the start is the equilibrium of the t = 0
// drift; otherwise both must hold `dim` and `dim * dim` entries.
//
// # Safety
// `system` must be a live handle, `out` a valid pointer and the arrays
// null or of the stated size.
enum SlStatus sl_propagate(const struct SlSystem *system,
                           const double *mean,
                           const double *cov,
                           size_t steps,
                           struct SlTrajectory **out);

// Number of stored states (`steps + 1`), or 0 for a null handle.
//
// # Safety
// `traj` must be null or a live handle.
size_t sl_trajectory_len(const struct SlTrajectory *traj);

// Copies the time, mean and covariance of state `index`. Any output
// pointer may be null.
//
// # Safety
// `traj` must be a live handle; non-null outputs must hold 1, `dim` and
// `dim * dim` doubles.
enum SlStatus sl_trajectory_state(const struct SlTrajectory *traj,
                                  size_t index,
                                  double *time,
                                  double *mean,
                                  double *cov);

// # Safety
// `traj` must be a live handle and `out` a valid pointer.
enum SlStatus sl_trajectory_actions(const struct SlTrajectory *traj, struct SlActions *out);

// Evaluates a bound by name, e.g. `"MASTER"` or `"ALPHA_FAMILY(1,0.5)"`.
// A non-positive `tolerance` selects the library default.
//
// # Safety
// `traj` must be a live handle, `kind` NUL-terminated and `out` valid.
enum SlStatus sl_evaluate_bound(const struct SlTrajectory *traj,
                                const char *kind,
                                double tolerance,
                                struct SlBoundResult *out);

// Transition-time lower bounds for an underdamped trajectory.
//
// # Safety
// `traj` must be a live handle; outputs must be valid pointers.
enum SlStatus sl_tau_bounds(const struct SlTrajectory *traj, double *tau24, double *tau25);

// # Safety
// `traj` must be null or a handle not yet freed.
void sl_trajectory_free(struct SlTrajectory *traj);

// Closed-form 2-Wasserstein distance between two Gaussians. A non-null
// `mobility` (`dim` positive entries) selects the weighted metric.
//
// # Safety
// Arrays must hold `dim` or `dim * dim` doubles; `out` must be valid.
enum SlStatus sl_w2_gaussian(size_t dim,
                             const double *mean0,
                             const double *cov0,
                             const double *mean1,
                             const double *cov1,
                             const double *mobility,
                             double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SPEEDLIMIT_H */
