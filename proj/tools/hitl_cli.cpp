// Command-line front end. Talks to the library only through the C API.

#include <csignal>
#include <cstdio>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include <pthread.h>

#include "CLI11.hpp"
#include "hitl/hitl.h"

namespace {

struct ConfigDeleter {
  void operator()(hitl_config* c) const { hitl_config_destroy(c); }
};
struct ResultDeleter {
  void operator()(hitl_result* r) const { hitl_result_destroy(r); }
};
struct ServerDeleter {
  void operator()(hitl_server* s) const { hitl_server_destroy(s); }
};
using ConfigPtr = std::unique_ptr<hitl_config, ConfigDeleter>;
using ResultPtr = std::unique_ptr<hitl_result, ResultDeleter>;
using ServerPtr = std::unique_ptr<hitl_server, ServerDeleter>;

class CliFailure : public std::runtime_error {
 public:
  explicit CliFailure(hitl_status status)
      : std::runtime_error(std::string(hitl_status_name(status)) + ": " + hitl_last_error()),
        status_(status) {}
  int exit_code() const { return status_ == HITL_OK ? 0 : 2; }

 private:
  hitl_status status_;
};

void check(hitl_status status) {
  if (status != HITL_OK) throw CliFailure(status);
}

struct RunOptions {
  std::string algo = "q";
  std::string feedback;  // empty: always-accept, or whatever --config says
  std::string config_path;
  std::optional<int> episodes;
  std::optional<std::uint64_t> seed;
  std::optional<double> alpha;
  std::optional<double> gamma;
  std::optional<double> epsilon;
  std::optional<double> epsilon_decay;
  std::optional<double> epsilon_min;
  std::optional<int> grid_size;
  std::optional<int> max_steps;
  bool random_start = false;
  std::string out;
};

void add_hyper_options(CLI::App* cmd, RunOptions& o) {
  cmd->add_option("--episodes", o.episodes, "Number of training episodes");
  cmd->add_option("--seed", o.seed, "Random seed");
  cmd->add_option("--alpha", o.alpha, "Learning rate");
  cmd->add_option("--gamma", o.gamma, "Discount factor");
  cmd->add_option("--grid-size", o.grid_size, "Grid side length");
  cmd->add_option("--max-steps", o.max_steps, "Step limit per episode");
  cmd->add_option("--epsilon-min", o.epsilon_min, "Exploration floor");
  cmd->add_flag("--random-start", o.random_start, "Start each episode on a random non-terminal cell");
}

void apply_feedback(hitl_config* cfg, const std::string& spec) {
  if (spec == "always-accept") {
    check(hitl_config_set_feedback(cfg, HITL_FEEDBACK_ALWAYS_ACCEPT, nullptr));
  } else if (spec == "distance") {
    check(hitl_config_set_feedback(cfg, HITL_FEEDBACK_DISTANCE, nullptr));
  } else if (spec == "mistake") {
    check(hitl_config_set_feedback(cfg, HITL_FEEDBACK_MISTAKE, nullptr));
  } else if (spec == "live") {
    check(hitl_config_set_feedback(cfg, HITL_FEEDBACK_LIVE, nullptr));
  } else if (spec.rfind("replay:", 0) == 0) {
    check(hitl_config_set_feedback(cfg, HITL_FEEDBACK_REPLAY, spec.c_str() + 7));
  } else {
    throw CLI::ValidationError("--feedback", "unknown feedback source '" + spec + "'");
  }
}

ConfigPtr build_config(const RunOptions& o) {
  hitl_config* raw = nullptr;
  if (!o.config_path.empty()) {
    check(hitl_config_load(o.config_path.c_str(), &raw));
  } else {
    check(hitl_config_create(o.algo == "sarsa" ? HITL_ALGO_SARSA : HITL_ALGO_Q, &raw));
  }
  ConfigPtr cfg(raw);
  if (!o.feedback.empty()) {
    apply_feedback(cfg.get(), o.feedback);
  } else if (o.config_path.empty()) {
    apply_feedback(cfg.get(), "always-accept");
  }
  if (o.episodes) check(hitl_config_set_episodes(cfg.get(), *o.episodes));
  if (o.seed) check(hitl_config_set_seed(cfg.get(), *o.seed));
  if (o.alpha) check(hitl_config_set_alpha(cfg.get(), *o.alpha));
  if (o.gamma) check(hitl_config_set_gamma(cfg.get(), *o.gamma));
  if (o.epsilon) check(hitl_config_set_epsilon(cfg.get(), *o.epsilon));
  if (o.epsilon_decay) check(hitl_config_set_epsilon_decay(cfg.get(), *o.epsilon_decay));
  if (o.epsilon_min) check(hitl_config_set_epsilon_min(cfg.get(), *o.epsilon_min));
  if (o.grid_size) check(hitl_config_set_grid_size(cfg.get(), *o.grid_size));
  if (o.max_steps) check(hitl_config_set_max_steps(cfg.get(), *o.max_steps));
  if (o.random_start) check(hitl_config_set_random_start(cfg.get()));
  check(hitl_config_validate(cfg.get()));
  return cfg;
}

void print_summary(const char* label, const hitl_result* r) {
  const int n = hitl_result_episode_count(r);
  if (n == 0) {
    std::printf("%s: no episodes\n", label);
    return;
  }
  hitl_metrics m{};
  check(hitl_result_metrics(r, 10, &m));
  std::printf("%s: %d episodes\n", label, n);
  std::printf("  average total reward per episode  %.2f\n", m.avg_total_reward_per_episode);
  std::printf("  success rate                      %.0f%%\n", m.success_rate * 100.0);
  std::printf("  average steps per episode         %.2f\n", m.avg_steps_per_episode);
  std::printf("  exploration rate                  %.0f%%\n", m.exploration_rate * 100.0);
  std::printf("  mean Q  UP %.4f  DOWN %.4f  LEFT %.4f  RIGHT %.4f\n", m.mean_q_per_action[0],
              m.mean_q_per_action[1], m.mean_q_per_action[2], m.mean_q_per_action[3]);
}

const char* kActionNames[] = {"UP", "DOWN", "LEFT", "RIGHT"};

// Terminal stand-in for the human supervisor.
hitl_status prompt_human(void*, const hitl_proposal* p, hitl_decision* out) {
  std::printf("\nepisode %d step %d  at (%d,%d)  proposes %s   Q = [%.3f %.3f %.3f %.3f]\n",
              p->episode, p->step, p->x, p->y, kActionNames[p->action], p->q_row[0], p->q_row[1],
              p->q_row[2], p->q_row[3]);
  for (;;) {
    std::printf("accept [a] / reject with reward [-10,-1,1,10 or any number] / quit [q]: ");
    std::fflush(stdout);
    std::string line;
    if (!std::getline(std::cin, line) || line == "q") return HITL_E_ABORTED;
    if (line.empty() || line == "a" || line == "y") {
      out->accepted = 1;
      return HITL_OK;
    }
    try {
      std::size_t used = 0;
      double r = std::stod(line, &used);
      if (used == line.size()) {
        out->accepted = 0;
        out->human_reward = r < -10.0 ? -10.0 : (r > 10.0 ? 10.0 : r);
        return HITL_OK;
      }
    } catch (const std::exception&) {
    }
  }
}

int serve(const std::string& address, unsigned short port, const std::string& artifacts,
          int max_live) {
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  hitl_server_options opts{};
  opts.address = address.c_str();
  opts.port = port;
  opts.artifact_root = artifacts.empty() ? nullptr : artifacts.c_str();
  opts.max_live_sessions = max_live;
  hitl_server* raw = nullptr;
  check(hitl_server_create(&opts, &raw));
  ServerPtr server(raw);
  check(hitl_server_start(server.get()));
  std::printf("listening on http://%s:%u  (Ctrl-C to stop)\n", address.c_str(),
              hitl_server_port(server.get()));
  std::fflush(stdout);

  int sig = 0;
  sigwait(&signals, &sig);
  hitl_server_stop(server.get());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Human-in-the-loop Q-learning / SARSA workbench for a grid warehouse"};
  app.require_subcommand(1);

  RunOptions train;
  auto* train_cmd = app.add_subcommand("train", "Train one agent and write its run artifacts");
  train_cmd->add_option("--algo", train.algo, "Algorithm")
      ->check(CLI::IsMember({"q", "sarsa"}))
      ->capture_default_str();
  train_cmd->add_option("--feedback", train.feedback,
                        "always-accept (default) | distance | mistake | live | replay:<trace>");
  train_cmd->add_option("--config", train.config_path, "Start from a run_config.json");
  train_cmd->add_option("--epsilon", train.epsilon, "Initial exploration rate");
  train_cmd->add_option("--epsilon-decay", train.epsilon_decay, "Per-episode epsilon multiplier");
  add_hyper_options(train_cmd, train);
  train_cmd->add_option("--out", train.out, "Output directory")->required();

  RunOptions cmp;
  auto* compare_cmd = app.add_subcommand("compare", "Train both algorithms on one seed and compare");
  compare_cmd->add_option("--feedback", cmp.feedback,
                          "always-accept (default) | distance | mistake | replay:<trace>");
  add_hyper_options(compare_cmd, cmp);
  compare_cmd->add_option("--out", cmp.out, "Output directory")->required();

  std::string trace_path;
  std::string replay_config;
  std::string replay_out;
  auto* replay_cmd = app.add_subcommand("replay", "Re-run a recorded session from its feedback trace");
  replay_cmd->add_option("--trace", trace_path, "trace.ndjson to replay")->required();
  replay_cmd->add_option("--config", replay_config,
                         "Run config (default: run_config.json beside the trace)");
  replay_cmd->add_option("--out", replay_out, "Output directory")->required();

  std::string address = "127.0.0.1";
  unsigned short port = 8080;
  std::string artifacts;
  int max_live = 1;
  auto* serve_cmd = app.add_subcommand("serve", "Run the live session server");
  serve_cmd->add_option("--port", port, "TCP port")->capture_default_str();
  serve_cmd->add_option("--address", address, "Listen address")->capture_default_str();
  serve_cmd->add_option("--artifacts", artifacts, "Directory for finished session artifacts");
  serve_cmd->add_option("--max-live", max_live, "Concurrent live sessions allowed")
      ->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train_cmd) {
      ConfigPtr cfg = build_config(train);
      const bool live = train.feedback == "live";
      hitl_result* raw = nullptr;
      check(hitl_train(cfg.get(), train.out.c_str(), live ? prompt_human : nullptr, nullptr, &raw));
      ResultPtr result(raw);
      print_summary(train.algo == "sarsa" ? "interactive_sarsa" : "interactive_q", result.get());
      std::printf("artifacts written to %s\n", train.out.c_str());
    } else if (*compare_cmd) {
      if (cmp.feedback == "live") {
        throw CLI::ValidationError("--feedback", "live runs are compared as two separate sessions");
      }
      ConfigPtr cfg = build_config(cmp);
      char* report = nullptr;
      check(hitl_compare(cfg.get(), cmp.out.c_str(), &report));
      std::fputs(report, stdout);
      hitl_string_free(report);
    } else if (*replay_cmd) {
      hitl_result* raw = nullptr;
      check(hitl_replay(trace_path.c_str(), replay_config.empty() ? nullptr : replay_config.c_str(),
                        replay_out.c_str(), &raw));
      ResultPtr result(raw);
      print_summary("replay", result.get());
      std::printf("artifacts written to %s\n", replay_out.c_str());
    } else if (*serve_cmd) {
      return serve(address, port, artifacts, max_live);
    }
  } catch (const CliFailure& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return e.exit_code();
  } catch (const CLI::Error& e) {
    return app.exit(e);
  }
  return 0;
}
