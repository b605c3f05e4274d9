/* C interface to the hitl training library.
 *
 * Objects are opaque handles created and destroyed through this API. Every
 * fallible call returns a hitl_status; on failure hitl_last_error() holds a
 * message for the calling thread until its next failing call. Strings the
 * library allocates are released with hitl_string_free().
 */
#ifndef HITL_H
#define HITL_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(HITL_BUILDING)
#    define HITL_API __declspec(dllexport)
#  else
#    define HITL_API __declspec(dllimport)
#  endif
#else
#  define HITL_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum hitl_status {
  HITL_OK = 0,
  HITL_E_INVALID_ARGUMENT = 1,
  HITL_E_INVALID_STATE = 2,
  HITL_E_OUT_OF_BOUNDS = 3,
  HITL_E_INDEX_OUT_OF_RANGE = 4,
  HITL_E_FEEDBACK_DIVERGENCE = 5,
  HITL_E_SESSION_CLOSED = 6,
  HITL_E_SINK_UNAVAILABLE = 7,
  HITL_E_EMPTY_INPUT = 8,
  HITL_E_BAD_WINDOW = 9,
  HITL_E_IO = 10,
  HITL_E_MALFORMED_DOCUMENT = 11,
  HITL_E_VERSION_MISMATCH = 12,
  HITL_E_INVALID_CONFIG = 13,
  HITL_E_ILLEGAL_TRANSITION = 14,
  HITL_E_UNKNOWN_SESSION = 15,
  HITL_E_NOT_AWAITING = 16,
  HITL_E_INVALID_DECISION = 17,
  HITL_E_SESSION_LIMIT = 18,
  HITL_E_ABORTED = 19,
  HITL_E_INTERNAL = 99
} hitl_status;

typedef enum hitl_algorithm {
  HITL_ALGO_Q = 0,
  HITL_ALGO_SARSA = 1
} hitl_algorithm;

typedef enum hitl_feedback_kind {
  HITL_FEEDBACK_LIVE = 0,
  HITL_FEEDBACK_ALWAYS_ACCEPT = 1,
  HITL_FEEDBACK_DISTANCE = 2,
  HITL_FEEDBACK_MISTAKE = 3,
  HITL_FEEDBACK_REPLAY = 4
} hitl_feedback_kind;

typedef enum hitl_action {
  HITL_UP = 0,
  HITL_DOWN = 1,
  HITL_LEFT = 2,
  HITL_RIGHT = 3
} hitl_action;

typedef enum hitl_outcome {
  HITL_OUTCOME_WIN = 0,
  HITL_OUTCOME_LOSE = 1,
  HITL_OUTCOME_TIMEOUT = 2
} hitl_outcome;

typedef struct hitl_config hitl_config;
typedef struct hitl_result hitl_result;
typedef struct hitl_server hitl_server;

typedef struct hitl_proposal {
  int episode;
  int step;
  int x;
  int y;
  hitl_action action;
  double q_row[4];
} hitl_proposal;

typedef struct hitl_decision {
  int accepted;        /* nonzero accepts */
  double human_reward; /* used only when rejecting; clamped to [-10, 10] */
} hitl_decision;

/* Return HITL_OK after filling *out; anything else aborts the run. */
typedef hitl_status (*hitl_feedback_fn)(void* user, const hitl_proposal* proposal,
                                        hitl_decision* out);

typedef struct hitl_episode {
  int index;
  int steps;
  double total_reward;
  hitl_outcome outcome;
  double epsilon_at_start;
  int explored_steps;
  int accepted_steps;
} hitl_episode;

typedef struct hitl_metrics {
  double avg_total_reward_per_episode;
  double success_rate;
  double loss_rate;
  double timeout_rate;
  double avg_steps_per_episode;
  double exploration_rate;
  double mean_q_per_action[4];
} hitl_metrics;

typedef struct hitl_server_options {
  const char* address;       /* NULL means 127.0.0.1 */
  unsigned short port;       /* 0 picks a free port */
  const char* artifact_root; /* NULL keeps artifacts in memory */
  int max_live_sessions;     /* <= 0 means 1 */
} hitl_server_options;

HITL_API const char* hitl_version(void);
HITL_API const char* hitl_last_error(void);
HITL_API const char* hitl_status_name(hitl_status status);
HITL_API void hitl_string_free(char* s);

/* Configs start from the per-algorithm defaults. */
HITL_API hitl_status hitl_config_create(hitl_algorithm algorithm, hitl_config** out);
HITL_API hitl_status hitl_config_from_json(const char* text, hitl_config** out);
HITL_API hitl_status hitl_config_load(const char* path, hitl_config** out);
HITL_API hitl_status hitl_config_to_json(const hitl_config* config, char** out);
HITL_API hitl_status hitl_config_clone(const hitl_config* config, hitl_config** out);
HITL_API void hitl_config_destroy(hitl_config* config);

/* Switching algorithm also resets epsilon and its decay to that algorithm's defaults. */
HITL_API hitl_status hitl_config_set_algorithm(hitl_config* config, hitl_algorithm algorithm);
HITL_API hitl_status hitl_config_set_seed(hitl_config* config, uint64_t seed);
HITL_API hitl_status hitl_config_set_episodes(hitl_config* config, int episodes);
HITL_API hitl_status hitl_config_set_max_steps(hitl_config* config, int max_steps);
HITL_API hitl_status hitl_config_set_alpha(hitl_config* config, double alpha);
HITL_API hitl_status hitl_config_set_gamma(hitl_config* config, double gamma);
HITL_API hitl_status hitl_config_set_epsilon(hitl_config* config, double epsilon);
HITL_API hitl_status hitl_config_set_epsilon_decay(hitl_config* config, double decay);
HITL_API hitl_status hitl_config_set_epsilon_min(hitl_config* config, double epsilon_min);
/* Goal and lose cells are kept and must fit inside the new size. */
HITL_API hitl_status hitl_config_set_grid_size(hitl_config* config, int grid_size);
HITL_API hitl_status hitl_config_set_start(hitl_config* config, int x, int y);
HITL_API hitl_status hitl_config_set_random_start(hitl_config* config);
/* trace_path is required for HITL_FEEDBACK_REPLAY and ignored otherwise. */
HITL_API hitl_status hitl_config_set_feedback(hitl_config* config, hitl_feedback_kind kind,
                                              const char* trace_path);
HITL_API hitl_status hitl_config_validate(const hitl_config* config);

/* Trains and, when out_dir is non-NULL, writes the run's artifacts there.
 * Live configs need a callback; pass NULL otherwise. result may be NULL. */
HITL_API hitl_status hitl_train(const hitl_config* config, const char* out_dir,
                                hitl_feedback_fn feedback, void* user, hitl_result** result);

/* Re-runs a recorded run. config_path NULL means run_config.json next to the trace. */
HITL_API hitl_status hitl_replay(const char* trace_path, const char* config_path,
                                 const char* out_dir, hitl_result** result);

/* Runs both algorithms from one base config; writes out_dir/q, out_dir/sarsa and
 * out_dir/comparison.json. report_json may be NULL. */
HITL_API hitl_status hitl_compare(const hitl_config* base, const char* out_dir, char** report_json);

HITL_API void hitl_result_destroy(hitl_result* result);
HITL_API int hitl_result_episode_count(const hitl_result* result);
HITL_API hitl_status hitl_result_episode(const hitl_result* result, int index, hitl_episode* out);
HITL_API hitl_status hitl_result_metrics(const hitl_result* result, int window, hitl_metrics* out);
HITL_API int hitl_result_grid_size(const hitl_result* result);
HITL_API hitl_status hitl_result_q_value(const hitl_result* result, int state, hitl_action action,
                                         double* out);
HITL_API double hitl_result_final_epsilon(const hitl_result* result);

HITL_API hitl_status hitl_server_create(const hitl_server_options* options, hitl_server** out);
HITL_API unsigned short hitl_server_port(const hitl_server* server);
/* Blocks until hitl_server_stop() is called from another thread. */
HITL_API hitl_status hitl_server_run(hitl_server* server);
HITL_API hitl_status hitl_server_start(hitl_server* server);
HITL_API void hitl_server_stop(hitl_server* server);
HITL_API void hitl_server_destroy(hitl_server* server);

#ifdef __cplusplus
}
#endif

#endif /* HITL_H */
