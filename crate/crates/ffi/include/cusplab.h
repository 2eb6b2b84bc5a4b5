#ifndef CUSPLAB_H
#define CUSPLAB_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CusplabStatus {
  CUSPLAB_STATUS_OK = 0,
  CUSPLAB_STATUS_NULL_POINTER = 1,
  CUSPLAB_STATUS_INVALID_ARGUMENT = 2,
  CUSPLAB_STATUS_INVALID_PROFILE = 3,
  CUSPLAB_STATUS_MESH = 4,
  // Quadrature or conjugate gradient missed its tolerance.
  CUSPLAB_STATUS_NOT_CONVERGED = 5,
  CUSPLAB_STATUS_EXTRAPOLATION = 6,
  CUSPLAB_STATUS_NUMERICAL = 7,
  CUSPLAB_STATUS_PANIC = 8,
} CusplabStatus;

typedef enum CusplabLawKind {
  CUSPLAB_LAW_KIND_POWER = 0,
  CUSPLAB_LAW_KIND_LOG = 1,
  CUSPLAB_LAW_KIND_BOUNDED = 2,
} CusplabLawKind;

typedef enum CusplabRegime {
  CUSPLAB_REGIME_REAL_SHOCK = 0,
  CUSPLAB_REGIME_SMOOTH_LANDING = 1,
  CUSPLAB_REGIME_UNRESOLVED = 2,
} CusplabRegime;

// Cusp or flat-band gap profile.
typedef struct CusplabProfile CusplabProfile;

// Integrated approach of a rigid body toward contact.
typedef struct CusplabTrajectory CusplabTrajectory;

// `coefficient · ε^exponent`, `coefficient · |ln ε|`, or a bounded energy.
typedef struct CusplabLaw {
  enum CusplabLawKind kind;
  double coefficient;
  // Zero unless `kind` is `Power`.
  double exponent;
} CusplabLaw;

typedef struct CusplabSolveOptions {
  // Elements across the unit height.
  size_t n_across;
  // Cell growth factor along the strip, at least 1.
  double grading;
  double tol;
  // Width of the fixed block attached at the strip entrance.
  double d_width;
} CusplabSolveOptions;

typedef struct CusplabEnergy {
  double energy;
  size_t iterations;
  double residual;
} CusplabEnergy;

typedef struct CusplabSample {
  double t;
  double epsilon;
  double velocity;
} CusplabSample;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or null. The pointer stays
// valid until the next call into this library from the same thread.
const char *cusplab_last_error_message(void);

// Static, NUL-terminated version string.
const char *cusplab_version(void);

// Power cusp `κ|ξ|^{1+α} + ε` on `[δ, 0]`.
//
// # Safety
// `out` must be valid for one pointer write.
enum CusplabStatus cusplab_profile_power(double kappa,
                                         double alpha,
                                         double epsilon,
                                         double delta,
                                         struct CusplabProfile **out);

// Profile whose solid is flat on `[δ′, 0)`.
//
// # Safety
// `out` must be valid for one pointer write.
enum CusplabStatus cusplab_profile_flat(double kappa,
                                        double alpha,
                                        double epsilon,
                                        double delta,
                                        double delta_prime,
                                        struct CusplabProfile **out);

// # Safety
// `profile` is null or came from a `cusplab_profile_*` constructor and was not freed.
void cusplab_profile_free(struct CusplabProfile *profile);

// Strip length `ℓ_ε`; `+∞` when `ε = 0`.
//
// # Safety
// `profile` is a live handle and `out` is valid for one write.
enum CusplabStatus cusplab_strip_length(const struct CusplabProfile *profile, double *out);

// Leading-order energy law of the profile.
//
// # Safety
// `profile` is a live handle and `out` is valid for one write.
enum CusplabStatus cusplab_energy_leading(const struct CusplabProfile *profile,
                                          struct CusplabLaw *out);

// Closed-form lower bound on the energy (α > 2 or flat band).
//
// # Safety
// `profile` is a live handle and `out` is valid for one write.
enum CusplabStatus cusplab_lower_bound(const struct CusplabProfile *profile, double *out);

// Defaults used by the command-line tool.
struct CusplabSolveOptions cusplab_solve_options_default(void);

// Finite-element Dirichlet energy for a profile with `ε > 0`.
//
// # Safety
// `profile` is a live handle, `options` is null (defaults) or readable, and
// `out` is valid for one write.
enum CusplabStatus cusplab_solve_energy(const struct CusplabProfile *profile,
                                        const struct CusplabSolveOptions *options,
                                        struct CusplabEnergy *out);

// Contact regime predicted from the profile's energy law.
//
// # Safety
// `profile` is a live handle and `out` is valid for one write.
enum CusplabStatus cusplab_classify(const struct CusplabProfile *profile, enum CusplabRegime *out);

// Integrates the approach with added mass `m_f = ρ_f · law(ε)` from `ε*` down to `eps_stop`.
// A bounded law needs a finite `coefficient` as its limit.
//
// # Safety
// `law` is readable and `out` is valid for one pointer write.
enum CusplabStatus cusplab_collide(double m_s,
                                   double rho_f,
                                   double eps_star,
                                   double v0,
                                   const struct CusplabLaw *law,
                                   double eps_stop,
                                   double rtol,
                                   struct CusplabTrajectory **out);

// # Safety
// `trajectory` is null or came from `cusplab_collide` and was not freed.
void cusplab_trajectory_free(struct CusplabTrajectory *trajectory);

// Number of accepted samples, including the initial state.
//
// # Safety
// `trajectory` is a live handle and `out` is valid for one write.
enum CusplabStatus cusplab_trajectory_len(const struct CusplabTrajectory *trajectory, size_t *out);

// # Safety
// `trajectory` is a live handle and `out` is valid for one write.
enum CusplabStatus cusplab_trajectory_sample(const struct CusplabTrajectory *trajectory,
                                             size_t index,
                                             struct CusplabSample *out);

// Touchdown time and speed; `NotConverged` when the stop gap was not reached.
//
// # Safety
// `trajectory` is a live handle; `time`, `speed` and `regime_out` are valid for one write each.
enum CusplabStatus cusplab_trajectory_touchdown(const struct CusplabTrajectory *trajectory,
                                                double *time,
                                                double *speed,
                                                enum CusplabRegime *regime_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CUSPLAB_H */
