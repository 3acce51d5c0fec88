#ifndef PERTDESIGN_H
#define PERTDESIGN_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

typedef enum pd_status {
  PD_STATUS_OK = 0,
  PD_STATUS_NULL_POINTER = 1,
  PD_STATUS_INVALID_ARGUMENT = 2,
  PD_STATUS_CONFIG = 3,
  PD_STATUS_NON_FINITE = 4,
  PD_STATUS_DIVERGED = 5,
  PD_STATUS_IO = 6,
  PD_STATUS_FINISHED = 7,
  PD_STATUS_PANIC = 99,
} pd_status;

typedef enum pd_policy {
  PD_POLICY_DESIGNED = 0,
  PD_POLICY_PRBS = 1,
  PD_POLICY_ZERO = 2,
} pd_policy;

typedef enum pd_constraint_status {
  PD_CONSTRAINT_STATUS_FEASIBLE = 0,
  PD_CONSTRAINT_STATUS_DEGENERATE = 1,
  PD_CONSTRAINT_STATUS_PROJECTED = 2,
} pd_constraint_status;

/**
 * Opaque experiment handle.
 */
typedef struct pd_experiment pd_experiment;

/**
 * Opaque load sensitivity handle.
 */
typedef struct pd_sensitivity pd_sensitivity;

typedef struct pd_limits {
  double d_min;
  double d_max;
  double yd_min;
  double yd_max;
} pd_limits;

typedef struct pd_step {
  uint64_t t;
  double r;
  double u;
  double d;
  double u_tilde;
  double y_tilde;
  double delta;
  double delta_next;
  double mse_next;
} pd_step;

typedef struct pd_constraint {
  double g1;
  double h;
  double d_lo;
  double d_hi;
  enum pd_constraint_status status;
} pd_constraint;

typedef struct pd_design {
  double d;
  double d_m;
  /**
   * 1 when the lower endpoint was chosen.
   */
  int32_t chose_lower;
  int32_t output_active;
} pd_design;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *pd_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *pd_version(void);

/**
 * Limits `d in [-d_max, d_max]`, `delta in [-yd_max, yd_max]`; `yd_max` may be
 * `INFINITY`.
 */
struct pd_limits pd_limits_symmetric(double d_max, double yd_max);

/**
 * Benchmark experiment with the given output bound, policy and run seed.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum pd_status pd_experiment_new_default(double yd_max,
                                         enum pd_policy policy,
                                         uint64_t seed,
                                         struct pd_experiment **out);

/**
 * Experiment from a TOML configuration text.
 *
 * # Safety
 * `toml` must be a NUL-terminated string; `out` must be writable.
 */
enum pd_status pd_experiment_new_from_toml(const char *toml,
                                           uint64_t seed,
                                           struct pd_experiment **out);

/**
 * Advances one sample. Returns `PD_STATUS_FINISHED` once all configured
 * steps have run.
 *
 * # Safety
 * `exp` must come from a `pd_experiment_new_*` call; `out` may be null.
 */
enum pd_status pd_experiment_step(struct pd_experiment *exp, struct pd_step *out);

/**
 * Samples processed so far.
 *
 * # Safety
 * `exp` must be a live handle or null (which yields 0).
 */
uint64_t pd_experiment_time(const struct pd_experiment *exp);

/**
 * Copies the current estimate `[b, a, c]` into `buf`. `len` must be at least
 * the parameter count, which is always written to `written`.
 *
 * # Safety
 * `buf` must hold `len` doubles; `written` must be writable.
 */
enum pd_status pd_experiment_theta(const struct pd_experiment *exp,
                                   double *buf,
                                   uintptr_t len,
                                   uintptr_t *written);

/**
 * # Safety
 * `exp` must be null or a handle not yet freed.
 */
void pd_experiment_free(struct pd_experiment *exp);

/**
 * Load sensitivity of `B/A` under controller `L/M`, truncated to `horizon`.
 * Coefficient arrays start at `q^0`.
 *
 * # Safety
 * Each array must hold the given number of doubles; `out` must be writable.
 */
enum pd_status pd_sensitivity_new(const double *b,
                                  uintptr_t nb,
                                  const double *a,
                                  uintptr_t na,
                                  const double *l,
                                  uintptr_t nl,
                                  const double *m,
                                  uintptr_t nm,
                                  uintptr_t horizon,
                                  struct pd_sensitivity **out);

/**
 * Sensitivity of the built-in benchmark plant and PI controller.
 *
 * # Safety
 * `out` must be writable.
 */
enum pd_status pd_sensitivity_benchmark(uintptr_t horizon, struct pd_sensitivity **out);

/**
 * Truncation horizon, or 0 for a null handle.
 *
 * # Safety
 * `s` must be a live handle or null.
 */
uintptr_t pd_sensitivity_horizon(const struct pd_sensitivity *s);

/**
 * 1 if the closed-loop denominator is stable, 0 if not, -1 for null.
 *
 * # Safety
 * `s` must be a live handle or null.
 */
int32_t pd_sensitivity_is_stable(const struct pd_sensitivity *s);

/**
 * Copies `g_1..g_k` into `buf`, which must hold `horizon` values.
 *
 * # Safety
 * `buf` must hold `len` doubles.
 */
enum pd_status pd_sensitivity_impulse(const struct pd_sensitivity *s, double *buf, uintptr_t len);

/**
 * Feasible interval for the next perturbation. `history[0]` is the most
 * recent applied perturbation; entries beyond the horizon are ignored.
 *
 * # Safety
 * `history` must hold `len` doubles; `out` must be writable.
 */
enum pd_status pd_constraint_bounds(const struct pd_sensitivity *s,
                                    const double *history,
                                    uintptr_t len,
                                    struct pd_limits limits,
                                    struct pd_constraint *out);

/**
 * Closed-form one-step design. `r12` and `xi` both hold `n` values.
 *
 * # Safety
 * `r12` and `xi` must hold `n` doubles; `out` must be writable.
 */
enum pd_status pd_design_step(double r11,
                              const double *r12,
                              const double *xi,
                              uintptr_t n,
                              double u_hat,
                              struct pd_constraint bounds,
                              struct pd_limits limits,
                              struct pd_design *out);

/**
 * # Safety
 * `s` must be null or a handle not yet freed.
 */
void pd_sensitivity_free(struct pd_sensitivity *s);

/**
 * Number of estimated parameters `nb + na + nc` for the given orders.
 */
uintptr_t pd_num_params(uintptr_t nb, uintptr_t na, uintptr_t nc);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PERTDESIGN_H */
