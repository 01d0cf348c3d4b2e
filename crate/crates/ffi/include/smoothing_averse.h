#ifndef SMOOTHING_AVERSE_H
#define SMOOTHING_AVERSE_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum SaStatus {
  SA_STATUS_OK = 0,
  SA_STATUS_NULL_POINTER = 1,
  // Malformed model, belief, index or length.
  SA_STATUS_INVALID_ARGUMENT = 2,
  // Argument outside the domain of the operation.
  SA_STATUS_DOMAIN = 3,
  // Every likelihood vanished at the given observation.
  SA_STATUS_DEGENERATE = 4,
  // A size guard refused the instance.
  SA_STATUS_GUARD = 5,
  // Unparseable JSON or an unreadable file.
  SA_STATUS_PARSE = 6,
  SA_STATUS_NUMERICAL = 7,
  // A Rust panic was caught at the boundary.
  SA_STATUS_PANIC = 8,
} SaStatus;

// Kind tag of [`SaObservation`].
typedef enum SaObservationKind {
  SA_OBSERVATION_KIND_SYMBOL = 0,
  SA_OBSERVATION_KIND_SCALAR = 1,
} SaObservationKind;

// Opaque controlled hidden Markov model.
typedef struct SaHmm SaHmm;

// Opaque solved grid policy.
typedef struct SaPolicy SaPolicy;

// A measurement: `symbol` is read for discrete models, `value` for
// scalar Gaussian ones.
typedef struct SaObservation {
  enum SaObservationKind kind;
  size_t symbol;
  double value;
} SaObservation;

// Entropy terms of one filter step, in nats.
typedef struct SaStageReward {
  double h_post;
  double h_pred;
  double h_trans;
  double r_tilde;
} SaStageReward;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Why the most recent call on this thread failed; empty after a
// successful call. The pointer stays valid until the next call into this
// library on the same thread.
const char *sa_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *sa_version(void);

// Parses and validates a model from its JSON document.
//
// # Safety
// `json` must be a NUL-terminated string and `out` a valid pointer.
enum SaStatus sa_hmm_from_json(const char *json, struct SaHmm **out);

// Releases a model. Null is ignored.
//
// # Safety
// `hmm` must come from [`sa_hmm_from_json`] and not be used afterwards.
void sa_hmm_free(struct SaHmm *hmm);

// # Safety
// `hmm` must be a live handle and `out` a valid pointer.
enum SaStatus sa_hmm_n_states(const struct SaHmm *hmm, size_t *out);

// # Safety
// `hmm` must be a live handle and `out` a valid pointer.
enum SaStatus sa_hmm_n_controls(const struct SaHmm *hmm, size_t *out);

// One filter step: predict `belief` under control `u`, then correct by
// `y`. Writes `n_states` doubles to `out_belief`.
//
// # Safety
// `belief` and `out_belief` must each hold `n_states` doubles.
enum SaStatus sa_filter_update(const struct SaHmm *hmm,
                               const double *belief,
                               size_t n_states,
                               size_t u,
                               struct SaObservation y,
                               double *out_belief);

// Realised stage reward `h_post - h_pred + h_trans` of one filter step.
//
// # Safety
// `belief` must hold `n_states` doubles and `out` be a valid pointer.
enum SaStatus sa_stage_reward(const struct SaHmm *hmm,
                              const double *belief,
                              size_t n_states,
                              size_t u,
                              struct SaObservation y,
                              struct SaStageReward *out);

// Smoother entropy of an open-loop control sequence by exhaustive
// enumeration. Discrete emissions only; large instances return
// [`SaStatus::Guard`].
//
// # Safety
// `controls` must hold `n_controls` entries (it may be null when zero).
enum SaStatus sa_smoother_entropy_enumeration(const struct SaHmm *hmm,
                                              const size_t *controls,
                                              size_t n_controls,
                                              double *out);

// Loads a policy artifact written by `smoothing-averse solve`.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum SaStatus sa_policy_load(const char *path, struct SaPolicy **out);

// Releases a policy. Null is ignored.
//
// # Safety
// `policy` must come from [`sa_policy_load`] and not be used afterwards.
void sa_policy_free(struct SaPolicy *policy);

// # Safety
// `policy` must be a live handle and `out` a valid pointer.
enum SaStatus sa_policy_horizon(const struct SaPolicy *policy, size_t *out);

// Control chosen at time `t` for `belief`, via the nearest grid point.
//
// # Safety
// `belief` must hold `n_states` doubles and `out_control` be valid.
enum SaStatus sa_policy_lookup(const struct SaPolicy *policy,
                               const double *belief,
                               size_t n_states,
                               size_t t,
                               size_t *out_control);

// Shannon entropy in nats of a probability vector.
//
// # Safety
// `probs` must hold `n` doubles and `out` be a valid pointer.
enum SaStatus sa_discrete_entropy(const double *probs, size_t n, double *out);

// Differential entropy in nats of a 3-dimensional Gaussian with the given
// row-major covariance.
//
// # Safety
// `cov` must hold 9 doubles and `out` be a valid pointer.
enum SaStatus sa_gaussian_entropy3(const double *cov, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SMOOTHING_AVERSE_H */
