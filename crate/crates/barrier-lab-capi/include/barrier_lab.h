#ifndef BARRIER_LAB_H
#define BARRIER_LAB_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Success.
 */
#define BL_OK 0

/**
 * Invalid parameter or domain error.
 */
#define BL_ERR_PARAMETER 2

/**
 * Numeric failure (quadrature, solver, Monte Carlo setup).
 */
#define BL_ERR_NUMERIC 3

/**
 * A required pointer argument was null.
 */
#define BL_ERR_NULL 4

/**
 * Piecewise-power cutoff with wall layers.
 */
#define BL_PROFILE_PIECEWISE 0

/**
 * Piecewise-power cutoff without wall layers.
 */
#define BL_PROFILE_PIECEWISE_BARE 1

/**
 * Smooth arctan example profile.
 */
#define BL_PROFILE_ARCTAN 2

/**
 * Quadratic model barrier (chibar = |x| / eps inside the core).
 */
#define BL_PROFILE_QUADRATIC 3

/**
 * Constant profile; `chibar` gives the level.
 */
#define BL_PROFILE_CONSTANT 4

/**
 * Start at an interior point given by `x`.
 */
#define BL_START_INTERIOR 0

/**
 * Start on the positive side of the membrane (0+).
 */
#define BL_START_PLUS 1

/**
 * Start on the negative side of the membrane (0-).
 */
#define BL_START_MINUS 2

/**
 * Opaque diffusivity-shape handle.
 */
typedef struct BlShape BlShape;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copy the last error message on this thread into `buf` (capacity `len`,
 * always NUL-terminated, truncating if needed). Returns the untruncated
 * message length in bytes.
 *
 * # Safety
 * `buf` must be valid for writes of `len` bytes (or null / len == 0, in
 * which case nothing is written).
 */
size_t bl_last_error(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *bl_version(void);

/**
 * Create a shape handle. `profile` is one of the `BL_PROFILE_*` constants;
 * `chibar` is used only by `BL_PROFILE_CONSTANT`. On success writes the
 * handle through `out` and returns `BL_OK`; the handle must be released
 * with `bl_shape_free`.
 *
 * # Safety
 * `out` must be a valid pointer to a `*mut BlShape`.
 */
int32_t bl_shape_new(double eps,
                     double kappa_eps,
                     double kappa_t,
                     double alpha,
                     double k,
                     double t_plus,
                     int32_t profile,
                     double chibar,
                     struct BlShape **out);

/**
 * Release a shape handle. Passing null is a no-op.
 *
 * # Safety
 * `shape` must be null or a handle returned by `bl_shape_new` that has not
 * already been freed.
 */
void bl_shape_free(struct BlShape *shape);

/**
 * Evaluate the cutoff profile chibar at `x`.
 *
 * # Safety
 * `shape` must be a live handle; `out` must be a valid f64 pointer.
 */
int32_t bl_chibar(const struct BlShape *shape, double x, double *out);

/**
 * Evaluate the diffusivity a(x) = kappa_eps + kappa_T chibar(x)^2.
 *
 * # Safety
 * `shape` must be a live handle; `out` must be a valid f64 pointer.
 */
int32_t bl_diffusivity(const struct BlShape *shape, double x, double *out);

/**
 * Steady heat flux through the slab for the boundary data (T_plus, 0).
 *
 * # Safety
 * `shape` must be a live handle; `out` must be a valid f64 pointer.
 */
int32_t bl_flux(const struct BlShape *shape, double *out);

/**
 * Stationary temperature at the `n` grid points `xs` (strictly increasing,
 * spanning exactly [-1, 1]); writes `n` temperatures to `out_temps`.
 *
 * # Safety
 * `shape` must be a live handle; `xs` and `out_temps` must be valid for
 * `n` f64 reads / writes respectively.
 */
int32_t bl_stationary_profile(const struct BlShape *shape,
                              const double *xs,
                              size_t n,
                              double *out_temps);

/**
 * Exact probability that the diffusion started at `x0` exits `[x1, x2]`
 * through the left end, from the scale function.
 *
 * # Safety
 * `shape` must be a live handle; `out` must be a valid f64 pointer.
 */
int32_t bl_exit_prob_exact(const struct BlShape *shape,
                           double x0,
                           double x1,
                           double x2,
                           double *out);

/**
 * Monte Carlo exit-left frequency of the time-changed diffusion on
 * [-1, 1]. Writes the estimate and its standard error.
 *
 * # Safety
 * `shape` must be a live handle; `out_estimate` and `out_std_error` must
 * be valid f64 pointers.
 */
int32_t bl_mc_exit_left(const struct BlShape *shape,
                        double x0,
                        uint64_t n_paths,
                        double h,
                        uint64_t seed,
                        double *out_estimate,
                        double *out_std_error);

/**
 * Closed-form probability that semipermeable-membrane Brownian motion hits
 * `a` before `b`. `start_kind` is a `BL_START_*` constant; `start_x` is
 * read only for `BL_START_INTERIOR`.
 *
 * # Safety
 * `out` must be a valid f64 pointer.
 */
int32_t bl_hit_prob_membrane(double a,
                             double b,
                             int32_t start_kind,
                             double start_x,
                             double beta_plus,
                             double beta_minus,
                             double *out);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* BARRIER_LAB_H */
