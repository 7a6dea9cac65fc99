#ifndef MAPLAB_H
#define MAPLAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  MAPLAB_STATUS_OK = 0,
  MAPLAB_STATUS_INVALID_ARGUMENT = 1,
  MAPLAB_STATUS_DIMENSION_MISMATCH = 2,
  MAPLAB_STATUS_NON_FINITE = 3,
  MAPLAB_STATUS_NULL_POINTER = 4,
  MAPLAB_STATUS_PANIC = 5,
} MaplabStatus;

/**
 * Data-misfit potential of a linear model with identity noise.
 */
typedef struct MaplabPotential MaplabPotential;

/**
 * Truncated diagonal Gaussian prior on ℓ^p.
 */
typedef struct MaplabPrior MaplabPrior;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, or NULL. The pointer
 * stays valid until the next call into this library from the same thread.
 */
const char *maplab_last_error_message(void);

/**
 * # Safety
 * `sigmas` must point to `len` doubles and `out` to writable storage.
 */
MaplabStatus maplab_prior_new(double p, const double *sigmas, size_t len, MaplabPrior **out_prior);

/**
 * # Safety
 * `prior` must come from `maplab_prior_new` and not be freed twice.
 */
void maplab_prior_free(MaplabPrior *prior);

/**
 * # Safety
 * `prior` must be a live handle or NULL (returns 0).
 */
size_t maplab_prior_dim(const MaplabPrior *prior);

/**
 * # Safety
 * `prior` must be a live handle and the out-pointers writable.
 */
MaplabStatus maplab_derived_constants(const MaplabPrior *prior,
                                      double *out_alpha,
                                      double *out_q,
                                      double *out_s);

/**
 * # Safety
 * `x` must point to `len` doubles.
 */
MaplabStatus maplab_lp_norm(const double *x, size_t len, double p, double *out_value);

/**
 * Cameron-Martin norm Σ x_j²/σ_j².
 *
 * # Safety
 * `x` must point to `len` doubles.
 */
MaplabStatus maplab_cm_norm_sq(const MaplabPrior *prior,
                               const double *x,
                               size_t len,
                               double *out_value);

/**
 * Φ(u) = ½‖y − A u‖² − ½‖y‖² for a row-major `rows × cols` matrix `a`.
 *
 * # Safety
 * `a` must point to `rows * cols` doubles and `y` to `rows` doubles.
 */
MaplabStatus maplab_potential_linear_new(size_t rows,
                                         size_t cols,
                                         const double *a,
                                         const double *y,
                                         MaplabPotential **out_potential);

/**
 * # Safety
 * `potential` must come from `maplab_potential_linear_new`.
 */
void maplab_potential_free(MaplabPotential *potential);

/**
 * # Safety
 * `u` must point to `len` doubles.
 */
MaplabStatus maplab_potential_phi(const MaplabPotential *potential,
                                  const double *u,
                                  size_t len,
                                  double *out_value);

/**
 * I(u) = Φ(u) + ½ Σ u_j²/σ_j².
 *
 * # Safety
 * `u` must point to `len` doubles.
 */
MaplabStatus maplab_om_value(const MaplabPotential *potential,
                             const MaplabPrior *prior,
                             const double *u,
                             size_t len,
                             double *out_value);

/**
 * Minimizes I from `x0`; the minimizer is written to `out_minimizer`
 * (`len` doubles).
 *
 * # Safety
 * `x0` and `out_minimizer` must point to `len` doubles.
 */
MaplabStatus maplab_minimize_om(const MaplabPotential *potential,
                                const MaplabPrior *prior,
                                const double *x0,
                                size_t len,
                                double tol,
                                size_t max_iter,
                                double *out_minimizer,
                                double *out_value,
                                bool *out_converged);

/**
 * Prior mass of the ℓ^p ball of radius `delta` around `center`, by Monte
 * Carlo with `n` samples.
 *
 * # Safety
 * `center` must point to `len` doubles.
 */
MaplabStatus maplab_ball_mass(const MaplabPrior *prior,
                              const double *center,
                              size_t len,
                              double delta,
                              size_t n,
                              uint64_t seed,
                              double *out_value,
                              double *out_std_error);

/**
 * # Safety
 * `z` must point to `len` doubles.
 */
MaplabStatus maplab_hilbert_ratio_bound(const MaplabPrior *prior,
                                        const double *z,
                                        size_t len,
                                        double delta,
                                        size_t n_index,
                                        double *out_value);

/**
 * # Safety
 * `z` must point to `len` doubles.
 */
MaplabStatus maplab_lp_ratio_bound(const MaplabPrior *prior,
                                   const double *z,
                                   size_t len,
                                   double delta,
                                   size_t k_index,
                                   double gamma,
                                   double *out_value);

/**
 * f(x) = Σ x_j²/ρ_j² − β L(x).
 *
 * # Safety
 * `rho` and `x` must point to `len` doubles.
 */
MaplabStatus maplab_convexify_f(double p,
                                const double *rho,
                                size_t len,
                                double gamma,
                                double beta,
                                const double *x,
                                double *out_value);

/**
 * β* = 2γ^{2−α} / (q ρ_1^α).
 *
 * # Safety
 * `rho` must point to `len` doubles.
 */
MaplabStatus maplab_beta_star(double p,
                              const double *rho,
                              size_t len,
                              double gamma,
                              double *out_value);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MAPLAB_H */
