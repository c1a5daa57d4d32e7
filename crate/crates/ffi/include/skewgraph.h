#ifndef SKEWGRAPH_H
#define SKEWGRAPH_H

#include <stddef.h>
#include <stdint.h>

typedef enum SgPotential {
  SG_POTENTIAL_CONSTANT = 0,
  SG_POTENTIAL_COSINE = 1,
  SG_POTENTIAL_NEG_LOG_DERIV = 2,
} SgPotential;

typedef enum SgStatus {
  SG_STATUS_OK = 0,
  SG_STATUS_NULL_POINTER = 1,
  SG_STATUS_INVALID_ARGUMENT = 2,
  SG_STATUS_PARSE = 3,
  SG_STATUS_CONFIG = 4,
  SG_STATUS_VALIDATION = 5,
  SG_STATUS_NUMERICAL = 6,
  SG_STATUS_DOMAIN = 7,
  SG_STATUS_UNSUPPORTED = 8,
  SG_STATUS_IO = 9,
  SG_STATUS_PANIC = 10,
} SgStatus;

/*
 Opaque system handle.
 */
typedef struct SgSystem SgSystem;

/*
 Fibre attractor `[lo, hi]` with its extrapolated width.
 */
typedef struct SgFiber {
  double lo;
  double hi;
  double limit_width;
  /*
   1 when the fibre is a non-degenerate interval.
   */
  uint8_t is_bone;
} SgFiber;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Library version as a static NUL-terminated string.
 */
const char *sg_version(void);

/*
 Message for the last failed call on this thread; empty after a success.
 Valid until the next call on the same thread.
 */
const char *sg_last_error_message(void);

/*
 The reference two-band system.
 */
enum SgStatus sg_system_default(struct SgSystem **out);

/*
 A system from the text of a TOML run configuration.

 # Safety
 `config` must be a NUL-terminated string.
 */
enum SgStatus sg_system_from_config(const char *config, struct SgSystem **out);

/*
 Copy of `sys` with band-0 `f₀` perturbed by `eta`.
 */
enum SgStatus sg_system_perturb(const struct SgSystem *sys, double eta, struct SgSystem **out);

/*
 Releases a handle; null is ignored.

 # Safety
 `sys` must come from this library and must not be used afterwards.
 */
void sg_system_free(struct SgSystem *sys);

enum SgStatus sg_system_band_count(const struct SgSystem *sys, size_t *out);

/*
 Runs the structural checks; `passed` receives 1 when every required
 check holds.
 */
enum SgStatus sg_system_validate(const struct SgSystem *sys, uint8_t *passed);

/*
 `f_t(x)` (order 0) or its first or second `x`-derivative on `band`.
 */
enum SgStatus sg_fiber_eval(const struct SgSystem *sys,
                            size_t band,
                            double t,
                            double x,
                            uint8_t order,
                            double *out);

/*
 Attractor of `band` over the baker point `(t, s)` from a depth-`depth`
 pullback. A double carries about 26 base-4 digits of past, so deeper
 pullbacks see a tail of zero digits; use `sg_pullback_fiber_digits` for
 random points at depth beyond that.
 */
enum SgStatus sg_pullback_fiber(const struct SgSystem *sys,
                                size_t band,
                                double t,
                                double s,
                                size_t depth,
                                struct SgFiber *out);

/*
 As `sg_pullback_fiber` over a digit-coded base point: `past[k]` is the
 digit `d_{k+1}` of the pre-orbit, `future` the base-4 digits of `t₀`.

 # Safety
 `past` and `future` must point to `n_past` and `n_future` readable bytes.
 */
enum SgStatus sg_pullback_fiber_digits(const struct SgSystem *sys,
                                       size_t band,
                                       const uint8_t *past,
                                       size_t n_past,
                                       const uint8_t *future,
                                       size_t n_future,
                                       size_t depth,
                                       struct SgFiber *out);

/*
 Transfer-operator pressure of a base potential at one resolution.
 `param` is the constant or the cosine amplitude and is ignored for
 `SG_POTENTIAL_NEG_LOG_DERIV`.
 */
enum SgStatus sg_transfer_pressure(enum SgPotential kind,
                                   double param,
                                   size_t resolution,
                                   double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SKEWGRAPH_H */
