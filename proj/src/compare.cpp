#include "hitl/compare.hpp"

#include "hitl/error.hpp"
#include "hitl/store.hpp"

namespace hitl {

std::pair<RunConfig, RunConfig> comparison_configs(const RunConfig& base) {
  auto with = [&](Algorithm a) {
    RunConfig run = base;
    const HyperParams defaults = default_hyper(a);
    run.algorithm = a;
    run.hyper.epsilon_init = defaults.epsilon_init;
    run.hyper.epsilon_decay = defaults.epsilon_decay;
    return run;
  };
  return {with(Algorithm::InteractiveQ), with(Algorithm::InteractiveSarsa)};
}

ComparisonRun compare_algorithms(const RunConfig& left, const RunConfig& right, int window) {
  if (left.seed != right.seed || !(left.grid == right.grid) || !(left.feedback == right.feedback)) {
    fail(ErrorCode::InvalidConfig, "compared runs must share seed, grid and feedback");
  }
  if (left.feedback.kind == FeedbackKind::Live) {
    fail(ErrorCode::InvalidConfig, "live runs are compared as two separate sessions");
  }
  ComparisonRun out;
  out.left_config = left;
  out.right_config = right;
  out.left_result = run_training(left);
  out.right_result = run_training(right);
  out.report.left_label = std::string(algorithm_name(left.algorithm));
  out.report.right_label = std::string(algorithm_name(right.algorithm));
  out.report.left = build_report(out.left_result, window);
  out.report.right = build_report(out.right_result, window);

  out.report.config_digest = config_digest(left) + config_digest(right);
  return out;
}

ComparisonRun compare_algorithms(const RunConfig& base, int window) {
  auto [q, sarsa] = comparison_configs(base);
  return compare_algorithms(q, sarsa, window);
}

}  // namespace hitl
