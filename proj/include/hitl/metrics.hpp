#pragma once

#include <span>
#include <string>
#include <vector>

#include "hitl/qcore.hpp"
#include "hitl/trainer.hpp"

namespace hitl {

inline constexpr int kDefaultRewardWindow = 10;

// Rates are fractions in [0,1]; percent formatting is left to presentation.
struct MetricsReport {
  double avg_total_reward_per_episode = 0.0;
  double success_rate = 0.0;
  double loss_rate = 0.0;
  double timeout_rate = 0.0;
  double avg_steps_per_episode = 0.0;
  double exploration_rate = 0.0;
  int window = kDefaultRewardWindow;
  std::vector<int> steps_series;
  std::vector<double> reward_series;
  std::vector<double> reward_moving_avg;
  std::vector<double> epsilon_series;
  QRow mean_q_per_action{};

  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

struct ComparisonReport {
  std::string left_label;
  MetricsReport left;
  std::string right_label;
  MetricsReport right;
  std::string config_digest;
};

// All of these throw EmptyInput on an empty record list.
double success_rate(std::span<const EpisodeRecord> records);
double loss_rate(std::span<const EpisodeRecord> records);
double timeout_rate(std::span<const EpisodeRecord> records);
double average_steps(std::span<const EpisodeRecord> records);
double average_total_reward(std::span<const EpisodeRecord> records);
// Also EmptyInput when the records contain no steps at all.
double exploration_rate(std::span<const EpisodeRecord> records);

double mean_of(std::span<const double> values);

// Element i averages values[max(0, i-window+1) .. i]. Throws BadWindow for window < 1.
std::vector<double> moving_average(std::span<const double> series, int window);

MetricsReport build_report(std::span<const EpisodeRecord> records, const QTable& q,
                           int window = kDefaultRewardWindow);
MetricsReport build_report(const TrainingResult& result, int window = kDefaultRewardWindow);

}  // namespace hitl
