#pragma once

#include <array>
#include <span>
#include <vector>

#include "hitl/gridworld.hpp"
#include "hitl/rng.hpp"

namespace hitl {

using QRow = std::array<double, kNumActions>;

// Dense [state][action] table, rows in state_index order.
class QTable {
 public:
  explicit QTable(int grid_size = 4);

  int grid_size() const noexcept { return grid_size_; }
  int num_states() const noexcept { return grid_size_ * grid_size_; }

  double at(int state, ActionType a) const;
  double& at(int state, ActionType a);
  QRow row(int state) const;
  double row_max(int state) const;

  std::span<const double> values() const noexcept { return values_; }
  std::span<double> values() noexcept { return values_; }

  friend bool operator==(const QTable&, const QTable&) = default;

 private:
  void check(int state) const;

  int grid_size_;
  std::vector<double> values_;
};

struct HyperParams {
  double alpha = 0.001;
  double gamma = 0.89;
  double epsilon_init = 0.97;
  double epsilon_decay = 0.99;
  double epsilon_min = 0.01;
  int episodes = 100;
  int max_steps = 120;

  // Throws InvalidConfig.
  void validate() const;

  friend bool operator==(const HyperParams&, const HyperParams&) = default;
};

struct ActionChoice {
  ActionType action = ActionType::Up;
  bool explored = false;
};

// Lowest action code wins ties.
ActionType greedy_action(const QRow& row) noexcept;

// One draw decides exploration; an exploring choice spends a second draw on
// the action itself.
ActionChoice select_action(const QRow& row, double epsilon, Rng& rng);

// Both updates touch only Q(s,a) and return the applied delta.
double q_update_qlearning(QTable& q, int s, ActionType a, double r, int s_next, double alpha,
                          double gamma);
double q_update_sarsa(QTable& q, int s, ActionType a, double r, int s_next, ActionType a_next,
                      double alpha, double gamma);

double decay_epsilon(double epsilon, double decay, double epsilon_min) noexcept;

QRow mean_q_per_action(const QTable& q) noexcept;

// Value iteration on the deterministic grid MDP. Terminal rows stay zero.
QTable solve_optimal_q(const GridConfig& cfg, double gamma, double tolerance = 1e-12);

// Largest |Q| reachable with rewards bounded by max_abs_reward.
inline double q_value_bound(double max_abs_reward, double gamma) noexcept {
  return max_abs_reward / (1.0 - gamma);
}

}  // namespace hitl
