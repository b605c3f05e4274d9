#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "hitl/gridworld.hpp"
#include "hitl/interact.hpp"
#include "hitl/qcore.hpp"
#include "hitl/rng.hpp"

namespace hitl {

enum class Algorithm { InteractiveQ, InteractiveSarsa };

std::string_view algorithm_name(Algorithm a) noexcept;
// Accepts the canonical names and the CLI short forms "q" and "sarsa".
Algorithm algorithm_from_name(std::string_view name);

// Per-algorithm defaults used by the warehouse experiments.
HyperParams default_hyper(Algorithm a) noexcept;

struct RunConfig {
  Algorithm algorithm = Algorithm::InteractiveQ;
  HyperParams hyper;
  GridConfig grid;
  std::uint64_t seed = 0;
  FeedbackDescriptor feedback;

  static RunConfig defaults(Algorithm a);

  // Also enforces hyper.max_steps == grid.max_steps.
  void validate() const;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

enum class Outcome { Win, Lose, Timeout };

std::string_view outcome_name(Outcome o) noexcept;
Outcome outcome_from_name(std::string_view name);

struct EpisodeRecord {
  int index = 0;
  int steps = 0;
  double total_reward = 0.0;  // sum of the rewards fed into updates
  Outcome outcome = Outcome::Timeout;
  double epsilon_at_start = 0.0;
  int explored_steps = 0;
  int accepted_steps = 0;

  friend bool operator==(const EpisodeRecord&, const EpisodeRecord&) = default;
};

struct StepEvent {
  int episode = 0;
  int step = 0;
  Position state;
  ActionType action = ActionType::Up;
  bool explored = false;
  FeedbackDecision decision;
  double reward_used = 0.0;
  StepOutcome outcome;
  double delta = 0.0;
};

// Hooks run on the training thread, in the order
// boundary -> proposal -> decision -> step (execution, update, advance).
class TrainingObserver {
 public:
  virtual ~TrainingObserver() = default;
  // May block (pause, throttle) or throw to abort the run.
  virtual void on_step_boundary(int /*episode*/, int /*step*/) {}
  virtual void on_proposal(const Proposal& /*p*/, bool /*explored*/, const QRow& /*row*/) {}
  virtual void on_decision(const Proposal& /*p*/, const FeedbackDecision& /*d*/) {}
  virtual void on_step(const StepEvent& /*e*/, const QTable& /*q*/) {}
  virtual void on_episode_end(const EpisodeRecord& /*rec*/, const QTable& /*q*/) {}
};

struct Sinks {
  TraceSink* trace = nullptr;
  TrainingObserver* observer = nullptr;
};

struct TrainingResult {
  QTable qtable;
  std::vector<EpisodeRecord> episodes;
  std::vector<FeedbackTraceEntry> trace;
  double final_epsilon = 0.0;
};

EpisodeRecord run_episode_q(QTable& q, const GridConfig& grid, const HyperParams& hyper,
                            double epsilon, int episode_index, FeedbackSource& feedback, Rng& rng,
                            Sinks sinks = {});

// The successor action chosen for the update is the next step's proposal.
EpisodeRecord run_episode_sarsa(QTable& q, const GridConfig& grid, const HyperParams& hyper,
                                double epsilon, int episode_index, FeedbackSource& feedback,
                                Rng& rng, Sinks sinks = {});

// Fills `result` as episodes complete, so on a throw it holds every finished
// episode (and only their trace entries) with the trace sink flushed.
void run_training_into(const RunConfig& run, FeedbackSource& feedback, Sinks sinks,
                       TrainingResult& result);

TrainingResult run_training(const RunConfig& run, FeedbackSource& feedback, Sinks sinks = {});

// Builds the source from run.feedback; live descriptors are rejected.
TrainingResult run_training(const RunConfig& run, Sinks sinks = {});

}  // namespace hitl
