#include "hitl/trainer.hpp"

#include <algorithm>
#include <string>

#include "hitl/error.hpp"

namespace hitl {

namespace {

double ingest_reward(const FeedbackDecision& d, double env_reward) {
  if (d.accepted) return env_reward;
  return std::clamp(*d.human_reward, -kHumanRewardLimit, kHumanRewardLimit);
}

FeedbackDecision checked(FeedbackDecision d) {
  if (!d.accepted) {
    if (!d.human_reward) fail(ErrorCode::InvalidDecision, "rejection without a human reward");
    d.human_reward = std::clamp(*d.human_reward, -kHumanRewardLimit, kHumanRewardLimit);
  } else {
    d.human_reward.reset();
  }
  return d;
}

Outcome outcome_of(Terminal t) {
  switch (t) {
    case Terminal::Win: return Outcome::Win;
    case Terminal::Lose: return Outcome::Lose;
    case Terminal::None: break;
  }
  return Outcome::Timeout;
}

// Shared per-step bookkeeping: proposal, decision, trace, execution.
struct StepDriver {
  QTable& q;
  const GridConfig& grid;
  int episode;
  FeedbackSource& feedback;
  Sinks sinks;
  EpisodeRecord& rec;

  struct Executed {
    Proposal proposal;
    FeedbackDecision decision;
    StepOutcome outcome;
    double reward = 0.0;
  };

  Executed propose_and_execute(int t, Position s, const ActionChoice& choice) {
    Executed ex;
    ex.proposal = Proposal{episode, t, s, choice.action};
    if (sinks.observer) {
      sinks.observer->on_proposal(ex.proposal, choice.explored,
                                  q.row(state_index(s, grid.grid_size)));
    }
    ex.decision = checked(feedback.decide(ex.proposal, FeedbackContext{q, grid}));
    if (sinks.observer) sinks.observer->on_decision(ex.proposal, ex.decision);
    if (sinks.trace) {
      sinks.trace->record(FeedbackTraceEntry{episode, t, s, choice.action, ex.decision});
    }
    ex.outcome = step(s, choice.action, grid);
    ex.reward = ingest_reward(ex.decision, ex.outcome.reward);

    ++rec.steps;
    rec.total_reward += ex.reward;
    if (choice.explored) ++rec.explored_steps;
    if (ex.decision.accepted) ++rec.accepted_steps;
    return ex;
  }

  void finish_step(const Executed& ex, bool explored, double delta) {
    if (!sinks.observer) return;
    StepEvent e;
    e.episode = episode;
    e.step = ex.proposal.step;
    e.state = ex.proposal.state;
    e.action = ex.proposal.action;
    e.explored = explored;
    e.decision = ex.decision;
    e.reward_used = ex.reward;
    e.outcome = ex.outcome;
    e.delta = delta;
    sinks.observer->on_step(e, q);
  }
};

void check_epsilon(double epsilon) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) fail(ErrorCode::InvalidArgument, "epsilon must be in [0,1]");
}

}  // namespace

std::string_view algorithm_name(Algorithm a) noexcept {
  return a == Algorithm::InteractiveQ ? "interactive_q" : "interactive_sarsa";
}

Algorithm algorithm_from_name(std::string_view name) {
  if (name == "interactive_q" || name == "q") return Algorithm::InteractiveQ;
  if (name == "interactive_sarsa" || name == "sarsa") return Algorithm::InteractiveSarsa;
  fail(ErrorCode::InvalidConfig, "unknown algorithm '" + std::string(name) + "'");
}

HyperParams default_hyper(Algorithm a) noexcept {
  HyperParams h;
  if (a == Algorithm::InteractiveSarsa) {
    h.epsilon_init = 0.99;
    h.epsilon_decay = 0.98;
  }
  return h;
}

RunConfig RunConfig::defaults(Algorithm a) {
  RunConfig r;
  r.algorithm = a;
  r.hyper = default_hyper(a);
  return r;
}

void RunConfig::validate() const {
  grid.validate();
  hyper.validate();
  if (hyper.max_steps != grid.max_steps) {
    fail(ErrorCode::InvalidConfig, "hyper.max_steps (" + std::to_string(hyper.max_steps) +
                                       ") must equal grid.max_steps (" +
                                       std::to_string(grid.max_steps) + ")");
  }
  if (feedback.kind == FeedbackKind::Replay && feedback.trace_path.empty()) {
    fail(ErrorCode::InvalidConfig, "replay feedback needs a trace path");
  }
  if (std::abs(feedback.rejection_reward) > kHumanRewardLimit) {
    fail(ErrorCode::InvalidConfig, "rejection reward must lie in [-10, 10]");
  }
}

std::string_view outcome_name(Outcome o) noexcept {
  switch (o) {
    case Outcome::Win: return "win";
    case Outcome::Lose: return "lose";
    case Outcome::Timeout: return "timeout";
  }
  return "?";
}

Outcome outcome_from_name(std::string_view name) {
  if (name == "win") return Outcome::Win;
  if (name == "lose") return Outcome::Lose;
  if (name == "timeout") return Outcome::Timeout;
  fail(ErrorCode::MalformedDocument, "unknown outcome '" + std::string(name) + "'");
}

EpisodeRecord run_episode_q(QTable& q, const GridConfig& grid, const HyperParams& hyper,
                            double epsilon, int episode_index, FeedbackSource& feedback, Rng& rng,
                            Sinks sinks) {
  check_epsilon(epsilon);
  EpisodeRecord rec;
  rec.index = episode_index;
  rec.epsilon_at_start = epsilon;
  StepDriver driver{q, grid, episode_index, feedback, sinks, rec};

  Position s = reset(grid, rng);
  Terminal end = Terminal::None;
  for (int t = 0; t < grid.max_steps; ++t) {
    if (sinks.observer) sinks.observer->on_step_boundary(episode_index, t);
    const int si = state_index(s, grid.grid_size);
    const ActionChoice choice = select_action(q.row(si), epsilon, rng);
    const auto ex = driver.propose_and_execute(t, s, choice);
    const double delta = q_update_qlearning(q, si, choice.action, ex.reward,
                                            state_index(ex.outcome.next, grid.grid_size),
                                            hyper.alpha, hyper.gamma);
    driver.finish_step(ex, choice.explored, delta);
    s = ex.outcome.next;
    end = ex.outcome.terminal;
    if (end != Terminal::None) break;
  }
  rec.outcome = outcome_of(end);
  if (sinks.trace) sinks.trace->flush();
  if (sinks.observer) sinks.observer->on_episode_end(rec, q);
  return rec;
}

EpisodeRecord run_episode_sarsa(QTable& q, const GridConfig& grid, const HyperParams& hyper,
                                double epsilon, int episode_index, FeedbackSource& feedback,
                                Rng& rng, Sinks sinks) {
  check_epsilon(epsilon);
  EpisodeRecord rec;
  rec.index = episode_index;
  rec.epsilon_at_start = epsilon;
  StepDriver driver{q, grid, episode_index, feedback, sinks, rec};

  Position s = reset(grid, rng);
  ActionChoice choice = select_action(q.row(state_index(s, grid.grid_size)), epsilon, rng);
  Terminal end = Terminal::None;
  for (int t = 0; t < grid.max_steps; ++t) {
    if (sinks.observer) sinks.observer->on_step_boundary(episode_index, t);
    const int si = state_index(s, grid.grid_size);
    const auto ex = driver.propose_and_execute(t, s, choice);
    const int next_si = state_index(ex.outcome.next, grid.grid_size);

    // Terminal rows are all zero, so no successor draw is spent there.
    ActionChoice next_choice;
    if (ex.outcome.terminal == Terminal::None) {
      next_choice = select_action(q.row(next_si), epsilon, rng);
    }
    const double delta = q_update_sarsa(q, si, choice.action, ex.reward, next_si,
                                        next_choice.action, hyper.alpha, hyper.gamma);
    driver.finish_step(ex, choice.explored, delta);
    s = ex.outcome.next;
    choice = next_choice;
    end = ex.outcome.terminal;
    if (end != Terminal::None) break;
  }
  rec.outcome = outcome_of(end);
  if (sinks.trace) sinks.trace->flush();
  if (sinks.observer) sinks.observer->on_episode_end(rec, q);
  return rec;
}

namespace {

// Keeps every entry in memory and forwards to the caller's sink.
class TeeTrace final : public TraceSink {
 public:
  explicit TeeTrace(TraceSink* downstream) : downstream_(downstream) {}

  void record(const FeedbackTraceEntry& e) override {
    log_.record(e);
    if (downstream_) downstream_->record(e);
  }
  void flush() override {
    if (downstream_) downstream_->flush();
  }

  // Moves the finished episode's entries onto the committed trace.
  void commit(std::vector<FeedbackTraceEntry>& committed) {
    auto staged = log_.take();
    committed.insert(committed.end(), staged.begin(), staged.end());
    log_ = TraceLog{};
  }

 private:
  TraceSink* downstream_;
  TraceLog log_;
};

}  // namespace

void run_training_into(const RunConfig& run, FeedbackSource& feedback, Sinks sinks,
                       TrainingResult& result) {
  run.validate();
  Rng rng(run.seed);
  result = TrainingResult{QTable(run.grid.grid_size), {}, {}, run.hyper.epsilon_init};
  result.episodes.reserve(static_cast<std::size_t>(run.hyper.episodes));

  TeeTrace tee(sinks.trace);
  Sinks inner{&tee, sinks.observer};
  double epsilon = run.hyper.epsilon_init;
  try {
    for (int k = 0; k < run.hyper.episodes; ++k) {
      EpisodeRecord rec =
          run.algorithm == Algorithm::InteractiveQ
              ? run_episode_q(result.qtable, run.grid, run.hyper, epsilon, k, feedback, rng, inner)
              : run_episode_sarsa(result.qtable, run.grid, run.hyper, epsilon, k, feedback, rng,
                                  inner);
      result.episodes.push_back(rec);
      tee.commit(result.trace);
      epsilon = decay_epsilon(epsilon, run.hyper.epsilon_decay, run.hyper.epsilon_min);
      result.final_epsilon = epsilon;
    }
  } catch (...) {
    try {
      tee.flush();
    } catch (...) {
    }
    throw;
  }
}

TrainingResult run_training(const RunConfig& run, FeedbackSource& feedback, Sinks sinks) {
  TrainingResult result;
  run_training_into(run, feedback, sinks, result);
  return result;
}

TrainingResult run_training(const RunConfig& run, Sinks sinks) {
  run.validate();
  auto source = make_feedback_source(run.feedback, run.grid, run.hyper.gamma);
  return run_training(run, *source, sinks);
}

}  // namespace hitl
