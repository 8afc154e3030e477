#ifndef FRETSIM_H
#define FRETSIM_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result of a call. Values mirror the process exit codes of the command-line
 tool where they overlap.
 */
typedef enum FretsimStatus {
  FRETSIM_STATUS_OK = 0,
  /*
   Argument outside the model's domain, or an unmet precondition.
   */
  FRETSIM_STATUS_INVALID_ARGUMENT = 2,
  /*
   Malformed input data.
   */
  FRETSIM_STATUS_FORMAT = 3,
  /*
   Fit or quadrature failure, non-monotone curve.
   */
  FRETSIM_STATUS_NUMERICAL = 4,
  /*
   Value outside the range covered by a calibration curve.
   */
  FRETSIM_STATUS_OUT_OF_RANGE = 5,
  FRETSIM_STATUS_NULL_POINTER = 6,
  /*
   A Rust panic was caught at the boundary.
   */
  FRETSIM_STATUS_INTERNAL = 7,
} FretsimStatus;

typedef struct FretsimCurve FretsimCurve;

typedef struct FretsimHistogram FretsimHistogram;

/*
 Donor/acceptor model with its depth distribution.
 */
typedef struct FretsimModel FretsimModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failed call on this thread, or NULL. Valid until the
 next failing call on the same thread.
 */
const char *fretsim_last_error(void);

/*
 NV ensemble under a WSe₂ monolayer.

 # Safety
 `model` must be a valid pointer to writable storage for one handle.
 */
enum FretsimStatus fretsim_model_new_default(struct FretsimModel **model);

/*
 Model with explicit constants; `distance_exponent` is 4 or 6.

 # Safety
 `model` must be a valid pointer to writable storage for one handle.
 */
enum FretsimStatus fretsim_model_new(double foerster_radius_nm,
                                     double bulk_lifetime_ns,
                                     uint32_t distance_exponent,
                                     double depth_mean_nm,
                                     double depth_sigma_nm,
                                     struct FretsimModel **model);

/*
 # Safety
 `model` must be NULL or a handle from a `fretsim_model_new*` call that has
 not been freed.
 */
void fretsim_model_free(struct FretsimModel *model);

/*
 # Safety
 `model` must be a live handle and `lifetime_ns` writable.
 */
enum FretsimStatus fretsim_quenched_lifetime(const struct FretsimModel *model,
                                             double z_nm,
                                             double *lifetime_ns);

/*
 # Safety
 `model` must be a live handle and `efficiency` writable.
 */
enum FretsimStatus fretsim_fret_efficiency(const struct FretsimModel *model,
                                           double z_nm,
                                           double *efficiency);

/*
 Photon histogram of the donor ensemble on the default 4096 × 32 ps grid
 with the 326 ps instrument response. `with_acceptor` adds the WSe₂
 emission seen on a flake.

 # Safety
 `model` must be a live handle and `histogram` writable.
 */
enum FretsimStatus fretsim_simulate_decay(const struct FretsimModel *model,
                                          double photons,
                                          uint64_t seed,
                                          bool with_acceptor,
                                          struct FretsimHistogram **histogram);

/*
 # Safety
 `histogram` must be NULL or a live handle.
 */
void fretsim_histogram_free(struct FretsimHistogram *histogram);

/*
 Number of time bins.

 # Safety
 `histogram` must be NULL or a live handle.
 */
size_t fretsim_histogram_len(const struct FretsimHistogram *histogram);

/*
 Copies `min(len, bins)` counts into `counts`.

 # Safety
 `histogram` must be a live handle and `counts` must point to `len`
 writable `uint32_t`.
 */
enum FretsimStatus fretsim_histogram_counts(const struct FretsimHistogram *histogram,
                                            uint32_t *counts,
                                            size_t len);

/*
 Gated mono-exponential lifetime (3 ns head cut, 1 % tail) of a histogram.

 # Safety
 `histogram` must be a live handle; `value_ns` and `sigma_ns` writable.
 */
enum FretsimStatus fretsim_effective_lifetime(const struct FretsimHistogram *histogram,
                                              double *value_ns,
                                              double *sigma_ns);

/*
 Effective lifetime against Förster radius on `points` radii in
 `[r_min_nm, r_max_nm]`, for the model's bulk lifetime and depth profile.

 # Safety
 `model` must be a live handle and `curve` writable.
 */
enum FretsimStatus fretsim_curve_new(const struct FretsimModel *model,
                                     double r_min_nm,
                                     double r_max_nm,
                                     size_t points,
                                     struct FretsimCurve **curve);

/*
 # Safety
 `curve` must be NULL or a live handle.
 */
void fretsim_curve_free(struct FretsimCurve *curve);

/*
 Förster radius whose effective lifetime is `tau_eff_ns`, with the
 uncertainty propagated from `sigma_ns`.

 # Safety
 `curve` must be a live handle; `radius_nm` and `radius_sigma_nm` writable.
 */
enum FretsimStatus fretsim_invert_radius(const struct FretsimCurve *curve,
                                         double tau_eff_ns,
                                         double sigma_ns,
                                         double *radius_nm,
                                         double *radius_sigma_nm);

/*
 Dwell time in seconds to collect `photons` at `count_rate_cps`.

 # Safety
 `seconds` must be writable.
 */
enum FretsimStatus fretsim_photon_budget(double count_rate_cps, double photons, double *seconds);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FRETSIM_H */
