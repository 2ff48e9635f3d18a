/* C interface to the meta-RL benchmark library.
 *
 * Coarse-grained calls exchange JSON documents: the caller passes a UTF-8
 * request string and receives a malloc'd UTF-8 response to release with
 * metarl_string_free(). All functions return METARL_OK on success; on any
 * other status, metarl_last_error() describes the failure (thread-local).
 */
#ifndef METARL_H
#define METARL_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum metarl_status {
  METARL_OK = 0,
  METARL_INVALID_ARGUMENT = 1,
  METARL_PROTOCOL_VIOLATION = 2,
  METARL_NUMERICAL_FAILURE = 3,
  METARL_IO_ERROR = 4,
  METARL_UNKNOWN_ERROR = 5
} metarl_status;

/* Message for the most recent failure on this thread ("" if none). The
 * returned pointer stays valid until the next library call on the thread. */
const char* metarl_last_error(void);

/* Releases strings returned through response out-parameters. */
void metarl_string_free(char* s);

/* Evaluates an agent (or a policy checkpoint) over seeded task instances.
 * Request: {"task": "bandit:k=5,n=10", "agent": "ucb1", "params": {...},
 *           "instances": 1000, "seed": 0, "cache_dir": "", ...}
 * Agent "policy" additionally needs "checkpoint" (and optional "argmax").
 * Response: full evaluation report with per-instance totals. */
metarl_status metarl_eval(const char* request_json, char** response_json);

/* Tunes hyperparameters on the disjoint tuning seed set.
 * Request adds "grid": [{...}, ...]; response reports every grid point and
 * the best parameters by mean. */
metarl_status metarl_grid_search(const char* request_json, char** response_json);

/* Trains a recurrent policy with the trust-region outer loop.
 * Request: {"task": ..., "iterations": N, "seed": ..., "out_dir": ...,
 *           optional overrides for batch/width/gamma/lambda/...}.
 * Response: learning-curve summary plus the checkpoint path. */
metarl_status metarl_train(const char* request_json, char** response_json);

/* Behavior-clones the index policy on bandit tasks.
 * Request: {"task": "bandit:k=5,n=10", "trials": N, "epochs": E, ...}.
 * Response: loss curve, teacher score, checkpoint path. */
metarl_status metarl_distill(const char* request_json, char** response_json);

/* Builds comparison tables from evaluation reports.
 * Request: {"reports": [<report>, ...], "format": "csv"|"text"}; reports are
 * grouped into rows by task and highlighted by significance.
 * Response: {"csv": ..., "text": ...}. */
metarl_status metarl_report(const char* request_json, char** response_json);

/* Step-at-a-time access to a trained policy. */
typedef struct metarl_policy metarl_policy;

metarl_status metarl_policy_load(const char* checkpoint_path, metarl_policy** out);
void metarl_policy_free(metarl_policy* policy);

/* Starts a fresh trial: clears the recurrent state and reseeds sampling. */
metarl_status metarl_policy_reset(metarl_policy* policy, uint64_t seed);

/* Feeds one observation and returns the chosen action.
 * observation: family-specific integer payload (empty for bandits, {state}
 * for tabular tasks, 9 cell codes + heading for mazes). prev_action may be
 * -1 on the first step of a trial. argmax != 0 disables sampling. */
metarl_status metarl_policy_act(metarl_policy* policy, const int32_t* observation,
                                int32_t observation_len, int32_t prev_action,
                                double prev_reward, int32_t prev_done, int32_t argmax,
                                int32_t* action_out);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* METARL_H */
