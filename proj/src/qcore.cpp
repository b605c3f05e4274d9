#include "hitl/qcore.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "hitl/error.hpp"

namespace hitl {

QTable::QTable(int grid_size) : grid_size_(grid_size) {
  if (grid_size < 1) fail(ErrorCode::InvalidArgument, "grid_size must be positive");
  values_.assign(static_cast<std::size_t>(num_states()) * kNumActions, 0.0);
}

void QTable::check(int state) const {
  if (state < 0 || state >= num_states()) {
    fail(ErrorCode::IndexOutOfRange, "state " + std::to_string(state) + " out of range [0," +
                                         std::to_string(num_states()) + ")");
  }
}

double QTable::at(int state, ActionType a) const {
  check(state);
  return values_[static_cast<std::size_t>(state) * kNumActions + action_code(a)];
}

double& QTable::at(int state, ActionType a) {
  check(state);
  return values_[static_cast<std::size_t>(state) * kNumActions + action_code(a)];
}

QRow QTable::row(int state) const {
  check(state);
  QRow r;
  std::copy_n(values_.begin() + static_cast<std::ptrdiff_t>(state) * kNumActions, kNumActions,
              r.begin());
  return r;
}

double QTable::row_max(int state) const {
  QRow r = row(state);
  return *std::max_element(r.begin(), r.end());
}

void HyperParams::validate() const {
  auto bad = [](const std::string& what) { fail(ErrorCode::InvalidConfig, what); };
  if (!(alpha >= 0.0 && alpha <= 1.0)) bad("alpha must be in [0,1]");
  if (!(gamma >= 0.0 && gamma < 1.0)) bad("gamma must be in [0,1)");
  if (!(epsilon_init >= 0.0 && epsilon_init <= 1.0)) bad("epsilon must be in [0,1]");
  if (!(epsilon_decay > 0.0 && epsilon_decay <= 1.0)) bad("epsilon_decay must be in (0,1]");
  if (!(epsilon_min >= 0.0 && epsilon_min <= 1.0)) bad("epsilon_min must be in [0,1]");
  if (epsilon_min > epsilon_init) bad("epsilon_min must not exceed epsilon");
  if (episodes < 0) bad("episodes must not be negative");
  if (max_steps < 1) bad("max_steps must be at least 1");
}

ActionType greedy_action(const QRow& row) noexcept {
  int best = 0;
  for (int k = 1; k < kNumActions; ++k) {
    if (row[k] > row[best]) best = k;
  }
  return static_cast<ActionType>(best);
}

ActionChoice select_action(const QRow& row, double epsilon, Rng& rng) {
  if (rng.uniform() < epsilon) {
    int code = std::min(static_cast<int>(rng.uniform() * kNumActions), kNumActions - 1);
    return {static_cast<ActionType>(code), true};
  }
  return {greedy_action(row), false};
}

double q_update_qlearning(QTable& q, int s, ActionType a, double r, int s_next, double alpha,
                          double gamma) {
  const double target = r + gamma * q.row_max(s_next);
  double& cell = q.at(s, a);
  const double delta = alpha * (target - cell);
  cell += delta;
  return delta;
}

double q_update_sarsa(QTable& q, int s, ActionType a, double r, int s_next, ActionType a_next,
                      double alpha, double gamma) {
  const double target = r + gamma * q.at(s_next, a_next);
  double& cell = q.at(s, a);
  const double delta = alpha * (target - cell);
  cell += delta;
  return delta;
}

double decay_epsilon(double epsilon, double decay, double epsilon_min) noexcept {
  return std::max(epsilon_min, epsilon * decay);
}

QRow mean_q_per_action(const QTable& q) noexcept {
  QRow sums{};
  for (int s = 0; s < q.num_states(); ++s) {
    for (int k = 0; k < kNumActions; ++k) {
      sums[k] += q.values()[static_cast<std::size_t>(s) * kNumActions + k];
    }
  }
  for (double& v : sums) v /= q.num_states();
  return sums;
}

QTable solve_optimal_q(const GridConfig& cfg, double gamma, double tolerance) {
  if (!(gamma >= 0.0 && gamma < 1.0)) fail(ErrorCode::InvalidArgument, "gamma must be in [0,1)");
  if (!(tolerance > 0.0)) fail(ErrorCode::InvalidArgument, "tolerance must be positive");
  cfg.validate();

  QTable q(cfg.grid_size);
  for (;;) {
    QTable next(cfg.grid_size);
    double change = 0.0;
    for (int s = 0; s < q.num_states(); ++s) {
      const Position p = position_of(s, cfg.grid_size);
      if (cfg.is_terminal(p)) continue;
      for (ActionType a : kAllActions) {
        const StepOutcome o = step(p, a, cfg);
        const double bootstrap =
            o.terminal == Terminal::None ? q.row_max(state_index(o.next, cfg.grid_size)) : 0.0;
        const double v = o.reward + gamma * bootstrap;
        next.at(s, a) = v;
        change = std::max(change, std::abs(v - q.at(s, a)));
      }
    }
    q = std::move(next);
    if (change < tolerance) return q;
  }
}

}  // namespace hitl
