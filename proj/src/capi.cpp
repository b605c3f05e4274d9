#include "hitl/hitl.h"

#include <cstring>
#include <filesystem>
#include <memory>
#include <new>
#include <string>

#include "hitl/compare.hpp"
#include "hitl/error.hpp"
#include "hitl/metrics.hpp"
#include "hitl/server.hpp"
#include "hitl/store.hpp"
#include "hitl/trainer.hpp"

struct hitl_config {
  hitl::RunConfig run;
};

struct hitl_result {
  hitl::TrainingResult result;
};

struct hitl_server {
  std::unique_ptr<hitl::Server> server;
};

namespace {

thread_local std::string g_last_error;

hitl_status record(hitl_status status, std::string message) {
  g_last_error = std::move(message);
  return status;
}

// Runs f, translating exceptions into status codes.
template <typename F>
hitl_status guarded(F&& f) noexcept {
  try {
    f();
    return HITL_OK;
  } catch (const hitl::Error& e) {
    return record(static_cast<hitl_status>(static_cast<int>(e.code())), e.what());
  } catch (const std::bad_alloc&) {
    return record(HITL_E_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return record(HITL_E_INTERNAL, e.what());
  } catch (...) {
    return record(HITL_E_INTERNAL, "unknown error");
  }
}

void require(const void* p, const char* what) {
  if (!p) hitl::fail(hitl::ErrorCode::InvalidArgument, std::string(what) + " must not be NULL");
}

char* duplicate(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

hitl::Algorithm to_algorithm(hitl_algorithm a) {
  switch (a) {
    case HITL_ALGO_Q: return hitl::Algorithm::InteractiveQ;
    case HITL_ALGO_SARSA: return hitl::Algorithm::InteractiveSarsa;
  }
  hitl::fail(hitl::ErrorCode::InvalidArgument, "unknown algorithm");
}

template <typename F>
hitl_status mutate(hitl_config* config, F&& f) noexcept {
  return guarded([&] {
    require(config, "config");
    hitl::RunConfig next = config->run;
    f(next);
    next.validate();
    config->run = std::move(next);
  });
}

// Forwards proposals to a C callback.
class CFeedback final : public hitl::FeedbackSource {
 public:
  CFeedback(hitl_feedback_fn fn, void* user) : fn_(fn), user_(user) {}

  hitl::FeedbackKind kind() const noexcept override { return hitl::FeedbackKind::Live; }

  hitl::FeedbackDecision decide(const hitl::Proposal& p, const hitl::FeedbackContext& ctx) override {
    hitl_proposal cp{};
    cp.episode = p.episode;
    cp.step = p.step;
    cp.x = p.state.x;
    cp.y = p.state.y;
    cp.action = static_cast<hitl_action>(hitl::action_code(p.action));
    const auto row = ctx.q.row(hitl::state_index(p.state, ctx.grid.grid_size));
    std::copy(row.begin(), row.end(), cp.q_row);
    hitl_decision d{1, 0.0};
    const hitl_status st = fn_(user_, &cp, &d);
    if (st == HITL_E_ABORTED) hitl::fail(hitl::ErrorCode::Aborted, "feedback callback aborted the run");
    if (st != HITL_OK) {
      hitl::fail(hitl::ErrorCode::SessionClosed,
                 "feedback callback returned " + std::string(hitl_status_name(st)));
    }
    return d.accepted ? hitl::FeedbackDecision::accept()
                      : hitl::FeedbackDecision::reject(d.human_reward);
  }

 private:
  hitl_feedback_fn fn_;
  void* user_;
};

void emit_bundle(const char* out_dir, const hitl::RunConfig& run, const hitl::TrainingResult& result) {
  if (out_dir) hitl::write_run_bundle(out_dir, run, result);
}

// Trains with a trace streamed into out_dir; partial artifacts survive a failure.
hitl::TrainingResult train_into(const hitl::RunConfig& run, hitl::FeedbackSource& source,
                                const char* out_dir) {
  hitl::TrainingResult result;
  std::unique_ptr<hitl::TraceFileWriter> trace;
  if (out_dir) {
    std::filesystem::create_directories(out_dir);
    trace = std::make_unique<hitl::TraceFileWriter>(std::filesystem::path(out_dir) /
                                                    hitl::bundle_file::kTrace);
  }
  try {
    hitl::run_training_into(run, source, hitl::Sinks{trace.get(), nullptr}, result);
  } catch (...) {
    trace.reset();
    try {
      emit_bundle(out_dir, run, result);
    } catch (...) {
    }
    throw;
  }
  trace.reset();
  emit_bundle(out_dir, run, result);
  return result;
}

}  // namespace

extern "C" {

const char* hitl_version(void) { return "1.0.0"; }

const char* hitl_last_error(void) { return g_last_error.c_str(); }

const char* hitl_status_name(hitl_status status) {
  if (status == HITL_OK) return "OK";
  if (status == HITL_E_INTERNAL) return "Internal";
  static thread_local std::string name;
  name = std::string(hitl::error_code_name(static_cast<hitl::ErrorCode>(status)));
  return name.c_str();
}

void hitl_string_free(char* s) { std::free(s); }

hitl_status hitl_config_create(hitl_algorithm algorithm, hitl_config** out) {
  return guarded([&] {
    require(out, "out");
    *out = new hitl_config{hitl::RunConfig::defaults(to_algorithm(algorithm))};
  });
}

hitl_status hitl_config_from_json(const char* text, hitl_config** out) {
  return guarded([&] {
    require(text, "text");
    require(out, "out");
    *out = new hitl_config{hitl::decode_run_config(text)};
  });
}

hitl_status hitl_config_load(const char* path, hitl_config** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new hitl_config{hitl::load_run_config(path)};
  });
}

hitl_status hitl_config_to_json(const hitl_config* config, char** out) {
  return guarded([&] {
    require(config, "config");
    require(out, "out");
    *out = duplicate(hitl::encode_run_config(config->run));
  });
}

hitl_status hitl_config_clone(const hitl_config* config, hitl_config** out) {
  return guarded([&] {
    require(config, "config");
    require(out, "out");
    *out = new hitl_config{config->run};
  });
}

void hitl_config_destroy(hitl_config* config) { delete config; }

hitl_status hitl_config_set_algorithm(hitl_config* config, hitl_algorithm algorithm) {
  return mutate(config, [&](hitl::RunConfig& r) {
    r.algorithm = to_algorithm(algorithm);
    const auto d = hitl::default_hyper(r.algorithm);
    r.hyper.epsilon_init = d.epsilon_init;
    r.hyper.epsilon_decay = d.epsilon_decay;
  });
}

hitl_status hitl_config_set_seed(hitl_config* config, uint64_t seed) {
  return mutate(config, [&](hitl::RunConfig& r) { r.seed = seed; });
}

hitl_status hitl_config_set_episodes(hitl_config* config, int episodes) {
  return mutate(config, [&](hitl::RunConfig& r) {
    if (episodes < 0) hitl::fail(hitl::ErrorCode::InvalidArgument, "episodes must not be negative");
    r.hyper.episodes = episodes;
  });
}

hitl_status hitl_config_set_max_steps(hitl_config* config, int max_steps) {
  return mutate(config, [&](hitl::RunConfig& r) {
    if (max_steps < 1) hitl::fail(hitl::ErrorCode::InvalidArgument, "max_steps must be at least 1");
    r.hyper.max_steps = max_steps;
    r.grid.max_steps = max_steps;
  });
}

hitl_status hitl_config_set_alpha(hitl_config* config, double alpha) {
  return mutate(config, [&](hitl::RunConfig& r) { r.hyper.alpha = alpha; });
}

hitl_status hitl_config_set_gamma(hitl_config* config, double gamma) {
  return mutate(config, [&](hitl::RunConfig& r) { r.hyper.gamma = gamma; });
}

hitl_status hitl_config_set_epsilon(hitl_config* config, double epsilon) {
  return mutate(config, [&](hitl::RunConfig& r) { r.hyper.epsilon_init = epsilon; });
}

hitl_status hitl_config_set_epsilon_decay(hitl_config* config, double decay) {
  return mutate(config, [&](hitl::RunConfig& r) { r.hyper.epsilon_decay = decay; });
}

hitl_status hitl_config_set_epsilon_min(hitl_config* config, double epsilon_min) {
  return mutate(config, [&](hitl::RunConfig& r) { r.hyper.epsilon_min = epsilon_min; });
}

hitl_status hitl_config_set_grid_size(hitl_config* config, int grid_size) {
  return mutate(config, [&](hitl::RunConfig& r) {
    if (grid_size < 1) hitl::fail(hitl::ErrorCode::InvalidArgument, "grid_size must be positive");
    r.grid.grid_size = grid_size;
  });
}

hitl_status hitl_config_set_start(hitl_config* config, int x, int y) {
  return mutate(config, [&](hitl::RunConfig& r) { r.grid.start_mode = hitl::StartMode::at({x, y}); });
}

hitl_status hitl_config_set_random_start(hitl_config* config) {
  return mutate(config, [&](hitl::RunConfig& r) { r.grid.start_mode = hitl::StartMode::uniform_random(); });
}

hitl_status hitl_config_set_feedback(hitl_config* config, hitl_feedback_kind kind,
                                     const char* trace_path) {
  return mutate(config, [&](hitl::RunConfig& r) {
    switch (kind) {
      case HITL_FEEDBACK_LIVE: r.feedback.kind = hitl::FeedbackKind::Live; break;
      case HITL_FEEDBACK_ALWAYS_ACCEPT: r.feedback.kind = hitl::FeedbackKind::AlwaysAccept; break;
      case HITL_FEEDBACK_DISTANCE: r.feedback.kind = hitl::FeedbackKind::DistanceOracle; break;
      case HITL_FEEDBACK_MISTAKE: r.feedback.kind = hitl::FeedbackKind::MistakeCorrecting; break;
      case HITL_FEEDBACK_REPLAY:
        if (!trace_path) hitl::fail(hitl::ErrorCode::InvalidConfig, "replay needs a trace path");
        r.feedback.kind = hitl::FeedbackKind::Replay;
        break;
      default: hitl::fail(hitl::ErrorCode::InvalidArgument, "unknown feedback kind");
    }
    r.feedback.trace_path = kind == HITL_FEEDBACK_REPLAY ? trace_path : "";
  });
}

hitl_status hitl_config_validate(const hitl_config* config) {
  return guarded([&] {
    require(config, "config");
    config->run.validate();
  });
}

hitl_status hitl_train(const hitl_config* config, const char* out_dir, hitl_feedback_fn feedback,
                       void* user, hitl_result** result) {
  return guarded([&] {
    require(config, "config");
    const hitl::RunConfig& run = config->run;
    run.validate();
    std::unique_ptr<hitl::FeedbackSource> source;
    if (run.feedback.kind == hitl::FeedbackKind::Live) {
      if (!feedback) {
        hitl::fail(hitl::ErrorCode::InvalidArgument, "live feedback needs a callback");
      }
      source = std::make_unique<CFeedback>(feedback, user);
    } else {
      source = hitl::make_feedback_source(run.feedback, run.grid, run.hyper.gamma);
    }
    auto trained = train_into(run, *source, out_dir);
    if (result) *result = new hitl_result{std::move(trained)};
  });
}

hitl_status hitl_replay(const char* trace_path, const char* config_path, const char* out_dir,
                        hitl_result** result) {
  return guarded([&] {
    require(trace_path, "trace_path");
    const std::filesystem::path trace(trace_path);
    const std::filesystem::path cfg_path =
        config_path ? std::filesystem::path(config_path)
                    : trace.parent_path() / hitl::bundle_file::kRunConfig;
    const hitl::RunConfig run = hitl::load_run_config(cfg_path);
    hitl::ReplaySource source(hitl::read_trace(trace));
    auto trained = train_into(run, source, out_dir);
    if (source.remaining() != 0) {
      hitl::fail(hitl::ErrorCode::FeedbackDivergence,
                 "run finished with " + std::to_string(source.remaining()) +
                     " trace entries left unused");
    }
    if (result) *result = new hitl_result{std::move(trained)};
  });
}

hitl_status hitl_compare(const hitl_config* base, const char* out_dir, char** report_json) {
  return guarded([&] {
    require(base, "base");
    const hitl::ComparisonRun cmp = hitl::compare_algorithms(base->run);
    const std::string report = hitl::encode_comparison(cmp.report);
    if (out_dir) {
      const std::filesystem::path dir(out_dir);
      hitl::write_run_bundle(dir / "q", cmp.left_config, cmp.left_result);
      hitl::write_run_bundle(dir / "sarsa", cmp.right_config, cmp.right_result);
      hitl::write_text_file(dir / hitl::bundle_file::kComparison, report);
    }
    if (report_json) *report_json = duplicate(report);
  });
}

void hitl_result_destroy(hitl_result* result) { delete result; }

int hitl_result_episode_count(const hitl_result* result) {
  return result ? static_cast<int>(result->result.episodes.size()) : 0;
}

hitl_status hitl_result_episode(const hitl_result* result, int index, hitl_episode* out) {
  return guarded([&] {
    require(result, "result");
    require(out, "out");
    const auto& eps = result->result.episodes;
    if (index < 0 || static_cast<std::size_t>(index) >= eps.size()) {
      hitl::fail(hitl::ErrorCode::IndexOutOfRange, "episode index out of range");
    }
    const auto& r = eps[static_cast<std::size_t>(index)];
    out->index = r.index;
    out->steps = r.steps;
    out->total_reward = r.total_reward;
    out->outcome = static_cast<hitl_outcome>(static_cast<int>(r.outcome));
    out->epsilon_at_start = r.epsilon_at_start;
    out->explored_steps = r.explored_steps;
    out->accepted_steps = r.accepted_steps;
  });
}

hitl_status hitl_result_metrics(const hitl_result* result, int window, hitl_metrics* out) {
  return guarded([&] {
    require(result, "result");
    require(out, "out");
    const hitl::MetricsReport m = hitl::build_report(result->result, window);
    out->avg_total_reward_per_episode = m.avg_total_reward_per_episode;
    out->success_rate = m.success_rate;
    out->loss_rate = m.loss_rate;
    out->timeout_rate = m.timeout_rate;
    out->avg_steps_per_episode = m.avg_steps_per_episode;
    out->exploration_rate = m.exploration_rate;
    std::copy(m.mean_q_per_action.begin(), m.mean_q_per_action.end(), out->mean_q_per_action);
  });
}

int hitl_result_grid_size(const hitl_result* result) {
  return result ? result->result.qtable.grid_size() : 0;
}

hitl_status hitl_result_q_value(const hitl_result* result, int state, hitl_action action, double* out) {
  return guarded([&] {
    require(result, "result");
    require(out, "out");
    *out = result->result.qtable.at(state, hitl::action_from_code(static_cast<int>(action)));
  });
}

double hitl_result_final_epsilon(const hitl_result* result) {
  return result ? result->result.final_epsilon : 0.0;
}

hitl_status hitl_server_create(const hitl_server_options* options, hitl_server** out) {
  return guarded([&] {
    require(out, "out");
    hitl::ServerOptions opts;
    if (options) {
      if (options->address) opts.address = options->address;
      opts.port = options->port;
      if (options->artifact_root) opts.artifact_root = options->artifact_root;
      if (options->max_live_sessions > 0) opts.max_live_sessions = options->max_live_sessions;
    }
    *out = new hitl_server{std::make_unique<hitl::Server>(opts)};
  });
}

unsigned short hitl_server_port(const hitl_server* server) {
  return server ? server->server->port() : 0;
}

hitl_status hitl_server_run(hitl_server* server) {
  return guarded([&] {
    require(server, "server");
    server->server->run();
  });
}

hitl_status hitl_server_start(hitl_server* server) {
  return guarded([&] {
    require(server, "server");
    server->server->start_background();
  });
}

void hitl_server_stop(hitl_server* server) {
  if (server) server->server->stop();
}

void hitl_server_destroy(hitl_server* server) { delete server; }

}  // extern "C"
