#ifndef ENTLAB_H
#define ENTLAB_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Spin handling of the walk reservoir.
 */
typedef enum EntlabSpinMode {
  /**
   * One spin per scatterer, revisited on every crossing.
   */
  ENTLAB_SPIN_MODE_PERSISTENT = 0,
  /**
   * A new register spin on every scattering event.
   */
  ENTLAB_SPIN_MODE_FRESH = 1,
} EntlabSpinMode;

/**
 * Status code returned by every fallible call.
 */
typedef enum EntlabStatus {
  ENTLAB_STATUS_OK = 0,
  ENTLAB_STATUS_NULL_ARGUMENT = 1,
  ENTLAB_STATUS_INVALID_ARGUMENT = 2,
  /**
   * Term count passed the configured cap during evolution.
   */
  ENTLAB_STATUS_STATE_EXPLOSION = 3,
  /**
   * The requested free evolution is not resolvable on this grid.
   */
  ENTLAB_STATUS_GRID_ALIASING = 4,
  ENTLAB_STATUS_PANIC = 5,
} EntlabStatus;

/**
 * Free wave packet on a uniform momentum grid.
 */
typedef struct EntlabPacket EntlabPacket;

/**
 * Discrete scatterer walk with live state: step, reverse, inspect.
 */
typedef struct EntlabWalk EntlabWalk;

/**
 * Refocusing run summary.
 */
typedef struct EntlabRefocusReport {
  double fidelity;
  uint64_t mirrors;
  double max_alpha;
  double conjugation_distance;
} EntlabRefocusReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread. The pointer stays
 * valid until the next failing call on the same thread; never freed by the
 * caller.
 */
const char *entlab_last_error_message(void);

/**
 * Library version as a static null-terminated string; never freed.
 */
const char *entlab_version(void);

/**
 * Creates a walk on a regular array with identical scatterers and the
 * particle starting in cell 0 moving right. On success writes the handle to
 * `out`; release with `entlab_walk_free`.
 *
 * # Safety
 * `out` must be a valid pointer to writable handle storage.
 */
enum EntlabStatus entlab_walk_new_regular(double transparency,
                                          double chi_ll,
                                          double chi_lr,
                                          double flip_angle,
                                          enum EntlabSpinMode spin_mode,
                                          uint64_t horizon,
                                          struct EntlabWalk **out);

/**
 * Releases a walk handle. Null is accepted and ignored.
 *
 * # Safety
 * `walk` must be null or a handle from `entlab_walk_new_regular` that has
 * not been freed yet.
 */
void entlab_walk_free(struct EntlabWalk *walk);

/**
 * Advances the walk by one scattering step. Fails once the construction
 * horizon is exhausted.
 *
 * # Safety
 * `walk` must be a live handle from `entlab_walk_new_regular`.
 */
enum EntlabStatus entlab_walk_step(struct EntlabWalk *walk);

/**
 * Reverses the walk in place. `complete` true flips velocities, spins and
 * conjugates amplitudes, so continued stepping retraces the history;
 * false flips velocities and spins only.
 *
 * # Safety
 * `walk` must be a live handle from `entlab_walk_new_regular`.
 */
enum EntlabStatus entlab_walk_reverse(struct EntlabWalk *walk, bool complete);

/**
 * Number of steps taken so far.
 *
 * # Safety
 * `walk` must be a live handle; `out` must point to writable storage.
 */
enum EntlabStatus entlab_walk_tau(const struct EntlabWalk *walk, int64_t *out);

/**
 * Entanglement entropy of the particle, in bits, at the current step.
 *
 * # Safety
 * `walk` must be a live handle; `out` must point to writable storage.
 */
enum EntlabStatus entlab_walk_entropy_bits(const struct EntlabWalk *walk, double *out);

/**
 * Number of stored basis terms in the grand state.
 *
 * # Safety
 * `walk` must be a live handle; `out` must point to writable storage.
 */
enum EntlabStatus entlab_walk_term_count(const struct EntlabWalk *walk, uint64_t *out);

/**
 * Creates a Gaussian packet (mass and hbar 1) on an `n`-point grid with
 * position spacing `dx` and width `sigma_x`. Release with
 * `entlab_packet_free`.
 *
 * # Safety
 * `out` must be a valid pointer to writable handle storage.
 */
enum EntlabStatus entlab_packet_new_gaussian(uint64_t n,
                                             double dx,
                                             double sigma_x,
                                             struct EntlabPacket **out);

/**
 * Releases a packet handle. Null is accepted and ignored.
 *
 * # Safety
 * `packet` must be null or a handle from `entlab_packet_new_gaussian` that
 * has not been freed yet.
 */
void entlab_packet_free(struct EntlabPacket *packet);

/**
 * Plans the conjugating mirror array for spreading time `tau` and phase
 * budget `epsilon`: mirror count and the worst residual quadratic phase.
 *
 * # Safety
 * `packet` must be a live handle; `out_count` and `out_max_alpha` must
 * point to writable storage.
 */
enum EntlabStatus entlab_packet_plan_mirrors(const struct EntlabPacket *packet,
                                             double tau,
                                             double epsilon,
                                             uint64_t *out_count,
                                             double *out_max_alpha);

/**
 * Runs the full refocusing cycle (spread, piecewise conjugation, spread)
 * and writes its summary.
 *
 * # Safety
 * `packet` must be a live handle; `out` must point to writable storage.
 */
enum EntlabStatus entlab_packet_refocus(const struct EntlabPacket *packet,
                                        double tau,
                                        double epsilon,
                                        struct EntlabRefocusReport *out);

/**
 * One randomized check of the Schur-product entropy bound: entropies in
 * bits before and after applying a random Gramian decoherence matrix to a
 * random state of the given dimension.
 *
 * # Safety
 * `out_s_before` and `out_s_after` must point to writable storage.
 */
enum EntlabStatus entlab_lemma_trial(uint64_t dim,
                                     uint64_t seed,
                                     double *out_s_before,
                                     double *out_s_after);

/**
 * Radiation dephasing kernel at separation `u` (units of v_F over the
 * frequency cutoff) for a given strength prefactor; real and imaginary
 * parts written separately.
 *
 * # Safety
 * `out_re` and `out_im` must point to writable storage.
 */
enum EntlabStatus entlab_kernel_phi(double u, double prefactor, double *out_re, double *out_im);

/**
 * Entropy in bits of a Gaussian packet under `iterations` repeated
 * applications of the radiation dephasing channel. Writes `iterations + 1`
 * values (the initial entropy first) into `out`.
 *
 * # Safety
 * `out` must point to writable storage for at least `iterations + 1`
 * doubles.
 */
enum EntlabStatus entlab_brems_entropy_series(uint64_t points,
                                              double dx,
                                              double sigma,
                                              double k0,
                                              double prefactor,
                                              uint64_t iterations,
                                              double *out);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* ENTLAB_H */
