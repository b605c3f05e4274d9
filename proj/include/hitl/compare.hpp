#pragma once

#include <utility>

#include "hitl/metrics.hpp"
#include "hitl/trainer.hpp"

namespace hitl {

struct ComparisonRun {
  RunConfig left_config;
  RunConfig right_config;
  TrainingResult left_result;
  TrainingResult right_result;
  ComparisonReport report;
};

// Q-learning and SARSA configs that share everything with `base` except the
// per-algorithm exploration schedule.
std::pair<RunConfig, RunConfig> comparison_configs(const RunConfig& base);

// Both sides must share seed, grid and feedback, and the feedback may not be live.
ComparisonRun compare_algorithms(const RunConfig& left, const RunConfig& right,
                                 int window = kDefaultRewardWindow);
ComparisonRun compare_algorithms(const RunConfig& base, int window = kDefaultRewardWindow);

}  // namespace hitl
