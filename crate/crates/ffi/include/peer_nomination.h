#ifndef PEER_NOMINATION_H
#define PEER_NOMINATION_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum PnStatus {
  PN_STATUS_OK = 0,
  PN_STATUS_NULL_POINTER = 1,
  PN_STATUS_INVALID_INSTANCE = 2,
  PN_STATUS_INVALID_PARAMETER = 3,
  PN_STATUS_INVALID_PROFILE = 4,
  PN_STATUS_INFEASIBLE = 5,
  PN_STATUS_UNREACHABLE_TARGET = 6,
  PN_STATUS_BUFFER_TOO_SMALL = 7,
  PN_STATUS_PANIC = 8,
  PN_STATUS_OTHER = 9,
} PnStatus;

/**
 * An m-regular review assignment.
 */
typedef struct PnAssignment PnAssignment;

/**
 * One complete ranking per reviewer over their pool.
 */
typedef struct PnProfile PnProfile;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *pn_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *pn_version(void);

/**
 * Random m-regular assignment on `n` agents.
 *
 * # Safety
 * `out` must be a valid pointer; the handle written there must be released
 * with [`pn_assignment_free`].
 */
enum PnStatus pn_assignment_generate(size_t n, size_t m, uint64_t seed, struct PnAssignment **out);

/**
 * Assignment from `n * m` reviewee indices, reviewer by reviewer.
 *
 * # Safety
 * `pools` must point to `n * m` readable values and `out` must be valid.
 */
enum PnStatus pn_assignment_from_pools(size_t n,
                                       size_t m,
                                       const uint32_t *pools,
                                       struct PnAssignment **out);

/**
 * Copies the sorted pool of `reviewer` into `buf`.
 *
 * # Safety
 * `assignment` must be a live handle and `buf` must hold `len` values.
 */
enum PnStatus pn_assignment_pool(const struct PnAssignment *assignment,
                                 size_t reviewer,
                                 uint32_t *buf,
                                 size_t len);

/**
 * # Safety
 * `assignment` must be null or a handle not yet freed.
 */
void pn_assignment_free(struct PnAssignment *assignment);

/**
 * Every reviewer ranks their pool by true rank (lower index first).
 *
 * # Safety
 * `assignment` must be a live handle and `out` a valid pointer.
 */
enum PnStatus pn_profile_truthful(const struct PnAssignment *assignment, struct PnProfile **out);

/**
 * Mallows-noisy reviews with dispersion `phi` in `[0, 1]`.
 *
 * # Safety
 * `assignment` must be a live handle and `out` a valid pointer.
 */
enum PnStatus pn_profile_mallows(const struct PnAssignment *assignment,
                                 double phi,
                                 uint64_t seed,
                                 struct PnProfile **out);

/**
 * Profile from `n * m` reviewee indices, each reviewer's ranking best first.
 *
 * # Safety
 * `rankings` must point to `n * m` readable values; other pointers as above.
 */
enum PnStatus pn_profile_from_rankings(const struct PnAssignment *assignment,
                                       const uint32_t *rankings,
                                       struct PnProfile **out);

/**
 * # Safety
 * `profile` must be null or a handle not yet freed.
 */
void pn_profile_free(struct PnProfile *profile);

/**
 * Runs PeerNomination once. `accepted[j - 1]` is set to 1 when agent `j` is
 * selected and 0 otherwise; `size` receives the number selected.
 *
 * # Safety
 * Handles must be live; `accepted` must hold `len >= n` bytes; `size` valid.
 */
enum PnStatus pn_run(const struct PnAssignment *assignment,
                     const struct PnProfile *profile,
                     size_t k,
                     double epsilon,
                     uint64_t seed,
                     uint8_t *accepted,
                     size_t len,
                     size_t *size);

/**
 * Exact selection probability of every agent.
 *
 * # Safety
 * Handles must be live and `probs` must hold `len >= n` values.
 */
enum PnStatus pn_exact_probabilities(const struct PnAssignment *assignment,
                                     const struct PnProfile *profile,
                                     size_t k,
                                     double epsilon,
                                     double *probs,
                                     size_t len);

/**
 * Analytic expected selection size under truthful reviews.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum PnStatus pn_expected_size(size_t n, size_t m, size_t k, double epsilon, double *out);

/**
 * Analytic expected recall of the true top `k`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum PnStatus pn_expected_recall(size_t n, size_t m, size_t k, double epsilon, double *out);

/**
 * Analytic acceptance probability of the agent of true rank `r`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum PnStatus pn_acceptance_probability(size_t n,
                                        size_t m,
                                        size_t k,
                                        double epsilon,
                                        size_t r,
                                        double *out);

/**
 * Slack whose analytic expected size is within `tolerance` of `target`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum PnStatus pn_calibrate_epsilon(size_t n,
                                   size_t m,
                                   size_t k,
                                   double target,
                                   double tolerance,
                                   double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PEER_NOMINATION_H */
