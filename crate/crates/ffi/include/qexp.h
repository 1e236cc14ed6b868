#ifndef QEXP_H
#define QEXP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

/**
 * Result of every fallible call.
 */
typedef enum QexpStatus {
  QEXP_STATUS_OK = 0,
  QEXP_STATUS_NULL_POINTER = 1,
  QEXP_STATUS_DOMAIN = 2,
  QEXP_STATUS_DIMENSION_MISMATCH = 3,
  QEXP_STATUS_UNDEFINED_GRADIENT = 4,
  QEXP_STATUS_INSUFFICIENT_DATA = 5,
  QEXP_STATUS_CONFIG = 6,
  QEXP_STATUS_FORMAT = 7,
  QEXP_STATUS_IO = 8,
  QEXP_STATUS_PANIC = 9,
} QexpStatus;

/**
 * A trained agent restored from a run directory.
 */
typedef struct QexpAgent QexpAgent;

/**
 * A policy distribution with fixed parameters.
 */
typedef struct QexpDistribution QexpDistribution;

/**
 * One classic-control episode in progress.
 */
typedef struct QexpEnv QexpEnv;

/**
 * Seeded random stream. `purpose` separates independent streams drawn
 * from the same seed.
 */
typedef struct QexpRng QexpRng;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the most recent failure on this thread, or an empty string.
 * The pointer stays valid until the next failing call on the same thread.
 */
const char *qexp_last_error(void);

/**
 * Deformed exponential `exp_q(x)`; `+inf` or `0` where the base leaves the
 * domain.
 */
double qexp_exp_q(double x, double q);

/**
 * Deformed logarithm `ln_q(x)` for `x > 0`.
 *
 * # Safety
 * `out` must be valid for one write.
 */
enum QexpStatus qexp_ln_q(double x, double q, double *out);

/**
 * Euclidean projection of `values / temperature` onto the simplex.
 *
 * # Safety
 * `values` and `out` must each hold `n` doubles.
 */
enum QexpStatus qexp_sparsemax(const double *values, uintptr_t n, double temperature, double *out);

struct QexpRng *qexp_rng_new(uint64_t seed, uint32_t purpose);

/**
 * # Safety
 * `rng` must come from [`qexp_rng_new`] and not be used afterwards; null is
 * ignored.
 */
void qexp_rng_free(struct QexpRng *rng);

/**
 * Uniform draw on `[0, 1)`.
 *
 * # Safety
 * `rng` must be a live handle and `out` valid for one write.
 */
enum QexpStatus qexp_rng_uniform(struct QexpRng *rng, double *out);

/**
 * Diagonal Gaussian with location `mu` and standard deviations `sigma`.
 *
 * # Safety
 * `mu` and `sigma` must hold `dim` doubles; `out` must be valid for one
 * write.
 */
enum QexpStatus qexp_gaussian_new(uintptr_t dim,
                                  const double *mu,
                                  const double *sigma,
                                  struct QexpDistribution **out);

/**
 * `tanh` of a diagonal Gaussian.
 *
 * # Safety
 * As [`qexp_gaussian_new`].
 */
enum QexpStatus qexp_squashed_gaussian_new(uintptr_t dim,
                                           const double *mu,
                                           const double *sigma,
                                           struct QexpDistribution **out);

/**
 * Diagonal-scale multivariate Student's t with `nu` degrees of freedom.
 *
 * # Safety
 * As [`qexp_gaussian_new`].
 */
enum QexpStatus qexp_student_t_new(uintptr_t dim,
                                   const double *mu,
                                   const double *sigma,
                                   double nu,
                                   struct QexpDistribution **out);

/**
 * Diagonal-scale q-Gaussian, `q < 3`; bounded support for `q < 1`.
 *
 * # Safety
 * As [`qexp_gaussian_new`].
 */
enum QexpStatus qexp_q_gaussian_new(uintptr_t dim,
                                    const double *mu,
                                    const double *sigma,
                                    double q,
                                    struct QexpDistribution **out);

/**
 * Independent Beta(`alpha`, `beta`) coordinates rescaled to `[low, high]`.
 *
 * # Safety
 * All four arrays must hold `dim` doubles; `out` must be valid for one
 * write.
 */
enum QexpStatus qexp_beta_new(uintptr_t dim,
                              const double *alpha,
                              const double *beta,
                              const double *low,
                              const double *high,
                              struct QexpDistribution **out);

/**
 * # Safety
 * `d` must come from a `*_new` constructor and not be used afterwards;
 * null is ignored.
 */
void qexp_distribution_free(struct QexpDistribution *d);

/**
 * Action dimension, or 0 for a null handle.
 *
 * # Safety
 * `d` must be a live handle or null.
 */
uintptr_t qexp_distribution_dim(const struct QexpDistribution *d);

/**
 * Log-density at `action`; `-inf` outside a bounded support.
 *
 * # Safety
 * `action` must hold `dim` doubles and `out` be valid for one write.
 */
enum QexpStatus qexp_distribution_log_prob(const struct QexpDistribution *d,
                                           const double *action,
                                           double *out);

/**
 * One exact draw written to `out`.
 *
 * # Safety
 * `out` must hold `dim` doubles; both handles must be live.
 */
enum QexpStatus qexp_distribution_sample(const struct QexpDistribution *d,
                                         struct QexpRng *rng,
                                         double *out);

/**
 * 1 when `action` has positive density, 0 otherwise (or on bad input).
 *
 * # Safety
 * `action` must hold `dim` doubles.
 */
int qexp_distribution_in_support(const struct QexpDistribution *d, const double *action);

/**
 * Environment by name (`mountain_car_cost`, `pendulum`,
 * `acrobot_continuous`), already reset from `rng`.
 *
 * # Safety
 * `name` must be a NUL-terminated string, `rng` a live handle and `out`
 * valid for one write.
 */
enum QexpStatus qexp_env_new(const char *name, struct QexpRng *rng, struct QexpEnv **out);

/**
 * # Safety
 * `env` must come from [`qexp_env_new`] and not be used afterwards; null
 * is ignored.
 */
void qexp_env_free(struct QexpEnv *env);

/**
 * # Safety
 * `env` must be a live handle or null (giving 0).
 */
uintptr_t qexp_env_obs_dim(const struct QexpEnv *env);

/**
 * # Safety
 * `env` must be a live handle or null (giving 0).
 */
uintptr_t qexp_env_action_dim(const struct QexpEnv *env);

/**
 * Current observation.
 *
 * # Safety
 * `obs` must hold `obs_dim` doubles.
 */
enum QexpStatus qexp_env_observe(const struct QexpEnv *env, double *obs);

/**
 * Starts a new episode.
 *
 * # Safety
 * Both handles must be live.
 */
enum QexpStatus qexp_env_reset(struct QexpEnv *env, struct QexpRng *rng);

/**
 * Applies `action` (clipped to the bounds). Writes the next observation,
 * reward and the two end-of-episode flags (0 or 1).
 *
 * # Safety
 * `action` must hold `action_dim` doubles, `obs` `obs_dim` doubles, and the
 * scalar outputs must be valid for one write each.
 */
enum QexpStatus qexp_env_step(struct QexpEnv *env,
                              const double *action,
                              double *obs,
                              double *reward,
                              int *terminated,
                              int *truncated);

/**
 * Loads the agent described by a TOML config with the networks of a
 * `checkpoint.txt` produced by `qexp train`.
 *
 * # Safety
 * Both paths must be NUL-terminated strings and `out` valid for one write.
 */
enum QexpStatus qexp_agent_load(const char *config_path,
                                const char *checkpoint_path,
                                struct QexpAgent **out);

/**
 * # Safety
 * `agent` must come from [`qexp_agent_load`] and not be used afterwards;
 * null is ignored.
 */
void qexp_agent_free(struct QexpAgent *agent);

/**
 * # Safety
 * `agent` must be a live handle or null (giving 0).
 */
uintptr_t qexp_agent_obs_dim(const struct QexpAgent *agent);

/**
 * # Safety
 * `agent` must be a live handle or null (giving 0).
 */
uintptr_t qexp_agent_action_dim(const struct QexpAgent *agent);

/**
 * Deterministic action for an observation. With a non-null `rng` the
 * action is sampled from the policy instead.
 *
 * # Safety
 * `obs` must hold `obs_dim` doubles and `action` `action_dim` doubles;
 * `rng` must be live or null.
 */
enum QexpStatus qexp_agent_act(const struct QexpAgent *agent,
                               const double *obs,
                               struct QexpRng *rng,
                               double *action);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QEXP_H */
