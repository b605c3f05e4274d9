#include "hitl/metrics.hpp"

#include <algorithm>

#include "hitl/error.hpp"

namespace hitl {

namespace {

void require(std::span<const EpisodeRecord> records) {
  if (records.empty()) fail(ErrorCode::EmptyInput, "no episode records");
}

double fraction_with(std::span<const EpisodeRecord> records, Outcome o) {
  require(records);
  const auto n = std::count_if(records.begin(), records.end(),
                               [o](const EpisodeRecord& r) { return r.outcome == o; });
  return static_cast<double>(n) / static_cast<double>(records.size());
}

}  // namespace

double success_rate(std::span<const EpisodeRecord> records) {
  return fraction_with(records, Outcome::Win);
}

double loss_rate(std::span<const EpisodeRecord> records) {
  return fraction_with(records, Outcome::Lose);
}

// Complement of the other two, so success + loss + timeout sums to exactly 1.
double timeout_rate(std::span<const EpisodeRecord> records) {
  return 1.0 - (success_rate(records) + loss_rate(records));
}

double mean_of(std::span<const double> values) {
  if (values.empty()) fail(ErrorCode::EmptyInput, "mean of an empty series");
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

double average_steps(std::span<const EpisodeRecord> records) {
  require(records);
  double sum = 0.0;
  for (const auto& r : records) sum += r.steps;
  return sum / static_cast<double>(records.size());
}

double average_total_reward(std::span<const EpisodeRecord> records) {
  require(records);
  double sum = 0.0;
  for (const auto& r : records) sum += r.total_reward;
  return sum / static_cast<double>(records.size());
}

double exploration_rate(std::span<const EpisodeRecord> records) {
  require(records);
  long long explored = 0;
  long long steps = 0;
  for (const auto& r : records) {
    explored += r.explored_steps;
    steps += r.steps;
  }
  if (steps == 0) fail(ErrorCode::EmptyInput, "records contain no steps");
  return static_cast<double>(explored) / static_cast<double>(steps);
}

std::vector<double> moving_average(std::span<const double> series, int window) {
  if (window < 1) fail(ErrorCode::BadWindow, "moving-average window must be at least 1");
  std::vector<double> out;
  out.reserve(series.size());
  for (std::size_t i = 0; i < series.size(); ++i) {
    const std::size_t lo = i + 1 >= static_cast<std::size_t>(window) ? i + 1 - window : 0;
    double sum = 0.0;
    for (std::size_t j = lo; j <= i; ++j) sum += series[j];
    out.push_back(sum / static_cast<double>(i - lo + 1));
  }
  return out;
}

MetricsReport build_report(std::span<const EpisodeRecord> records, const QTable& q, int window) {
  require(records);
  MetricsReport m;
  m.window = window;
  m.avg_total_reward_per_episode = average_total_reward(records);
  m.success_rate = success_rate(records);
  m.loss_rate = loss_rate(records);
  m.timeout_rate = timeout_rate(records);
  m.avg_steps_per_episode = average_steps(records);
  m.exploration_rate = exploration_rate(records);
  for (const auto& r : records) {
    m.steps_series.push_back(r.steps);
    m.reward_series.push_back(r.total_reward);
    m.epsilon_series.push_back(r.epsilon_at_start);
  }
  m.reward_moving_avg = moving_average(m.reward_series, window);
  m.mean_q_per_action = mean_q_per_action(q);
  return m;
}

MetricsReport build_report(const TrainingResult& result, int window) {
  return build_report(result.episodes, result.qtable, window);
}

}  // namespace hitl
