#ifndef DIVIMARK_H
#define DIVIMARK_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define DM_PICTURE_SCHRODINGER 0

#define DM_PICTURE_HEISENBERG 1

#define DM_CRITERION_P 0

#define DM_CRITERION_CP 1

// Result code of every exported function.
typedef enum DmStatus {
  DM_STATUS_OK = 0,
  DM_STATUS_NULL_POINTER = 1,
  DM_STATUS_INVALID_ARGUMENT = 2,
  DM_STATUS_SINGULAR = 3,
  DM_STATUS_ANALYSIS_FAILED = 4,
  DM_STATUS_PANIC = 5,
} DmStatus;

// Opaque sampled trajectory.
typedef struct DmTrajectory DmTrajectory;

// Divisibility verdict. `first_violation_time` is meaningful only when
// `has_violation` is set.
typedef struct DmVerdict {
  bool divisible;
  bool has_violation;
  double first_violation_time;
  double worst_value;
} DmVerdict;

// Left rates `gamma_*` and right rates `xi_*` of the phase-covariant model.
typedef struct DmRates {
  double gamma_plus;
  double gamma_minus;
  double gamma_z;
  double xi_plus;
  double xi_minus;
  double xi_z;
} DmRates;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Samples a built-in model (`phcov`, `dephrot1`, `dephrot2`, `dephasing`,
// `depolarizing`) on `steps` uniform points of `[t_start, t_end]`.
//
// # Safety
// `name` must be a NUL-terminated string and `out_handle` a valid pointer.
enum DmStatus dm_trajectory_new_builtin(const char *name,
                                        double t_start,
                                        double t_end,
                                        size_t steps,
                                        struct DmTrajectory **out_handle);

// Releases a trajectory. Null is ignored.
//
// # Safety
// `handle` must come from [`dm_trajectory_new_builtin`] and not be freed twice.
void dm_trajectory_free(struct DmTrajectory *handle);

// # Safety
// Pointers must be valid.
enum DmStatus dm_trajectory_len(const struct DmTrajectory *handle, size_t *out_len);

// Time and row-major 4×4 Bloch matrix of sample `index`.
//
// # Safety
// `out_matrix` must point to 16 writable doubles.
enum DmStatus dm_trajectory_sample(const struct DmTrajectory *handle,
                                   size_t index,
                                   double *out_time,
                                   double *out_matrix);

// P or CP divisibility in the Schrödinger or Heisenberg picture.
//
// # Safety
// Pointers must be valid.
enum DmStatus dm_divisibility(const struct DmTrajectory *handle,
                              uint32_t picture_code,
                              uint32_t criterion_code,
                              struct DmVerdict *out_verdict);

// `N_S` or `N_H` of the trajectory.
//
// # Safety
// Pointers must be valid.
enum DmStatus dm_nm_measure(const struct DmTrajectory *handle,
                            uint32_t picture_code,
                            double *out_value);

// Rates of the phase-covariant counterexample at time `t`.
//
// # Safety
// `out_rates` must be valid.
enum DmStatus dm_phcov_rates(double t, struct DmRates *out_rates);

// # Safety
// `effect_a4` must point to 4 doubles.
enum DmStatus dm_sharpness(const double *effect_a4, double *out_value);

// Incompatibility of the binary POVMs `(M, 𝟙−M)` and `(N, 𝟙−N)` under
// mixing with the trivial POVM `(p0 𝟙, p1 𝟙)`.
//
// # Safety
// `m_a4`, `n_a4` must point to 4 doubles each.
enum DmStatus dm_incompat_p(const double *m_a4,
                            const double *n_a4,
                            double p0,
                            double p1,
                            double *out_value);

// Incompatibility under mixing with the completely depolarized POVMs.
//
// # Safety
// `m_a4`, `n_a4` must point to 4 doubles each.
enum DmStatus dm_incompat_steer(const double *m_a4, const double *n_a4, double *out_value);

// Smallest eigenvalue of the Choi matrix of a row-major Bloch matrix.
//
// # Safety
// `bloch_matrix` must point to 16 doubles.
enum DmStatus dm_choi_min_eigenvalue(const double *bloch_matrix, double *out_value);

// Message of the last failed call on this thread, empty after a success.
// Valid until the next call on the same thread.
const char *dm_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *dm_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DIVIMARK_H */
