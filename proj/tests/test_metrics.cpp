#include "doctest.h"

#include <random>
#include <vector>

#include "hitl/error.hpp"
#include "hitl/metrics.hpp"

using namespace hitl;

namespace {

EpisodeRecord ep(int i, Outcome o, int steps, double reward, int explored = 0) {
  EpisodeRecord r;
  r.index = i;
  r.outcome = o;
  r.steps = steps;
  r.total_reward = reward;
  r.explored_steps = explored;
  r.accepted_steps = steps;
  r.epsilon_at_start = 0.5;
  return r;
}

template <class F>
ErrorCode code_of(F fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode{};
}

}  // namespace

TEST_CASE("success rate") {
  std::vector<EpisodeRecord> r{ep(0, Outcome::Win, 4, 10), ep(1, Outcome::Win, 5, 10),
                               ep(2, Outcome::Lose, 2, -10), ep(3, Outcome::Win, 6, 10)};
  CHECK(success_rate(r) == 0.75);
  CHECK(loss_rate(r) == 0.25);
  CHECK(timeout_rate(r) == 0.0);
  std::vector<EpisodeRecord> t{ep(0, Outcome::Timeout, 120, 0), ep(1, Outcome::Timeout, 120, 0)};
  CHECK(success_rate(t) == 0.0);
  CHECK(timeout_rate(t) == 1.0);
  std::vector<EpisodeRecord> w{ep(0, Outcome::Win, 4, 10)};
  CHECK(success_rate(w) == 1.0);
  CHECK(code_of([] { success_rate({}); }) == ErrorCode::EmptyInput);
}

TEST_CASE("rates sum to one exactly") {
  std::mt19937_64 gen(8);
  std::uniform_int_distribution<int> outcome(0, 2), len(1, 200);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<EpisodeRecord> r;
    const int n = len(gen);
    for (int i = 0; i < n; ++i) r.push_back(ep(i, static_cast<Outcome>(outcome(gen)), 3, 0));
    CHECK(success_rate(r) + loss_rate(r) + timeout_rate(r) == 1.0);
    CHECK(timeout_rate(r) >= 0.0);
  }
}

TEST_CASE("average steps and reward") {
  CHECK(average_steps(std::vector{ep(0, Outcome::Win, 10, 0), ep(1, Outcome::Win, 14, 0)}) == 12);
  CHECK(average_steps(std::vector{ep(0, Outcome::Timeout, 120, 0)}) == 120);
  CHECK(mean_of(std::vector<double>{16, 17, 15.39}) == doctest::Approx(16.13).epsilon(1e-12));
  CHECK(average_total_reward(std::vector{ep(0, Outcome::Win, 1, 10), ep(1, Outcome::Win, 1, 10),
                                         ep(2, Outcome::Lose, 1, -10),
                                         ep(3, Outcome::Win, 1, 10)}) == 5.0);
  CHECK(average_total_reward(std::vector{ep(0, Outcome::Timeout, 120, 0)}) == 0.0);
  std::vector<EpisodeRecord> mixed;
  for (int i = 0; i < 75; ++i) mixed.push_back(ep(i, Outcome::Win, 3, 10));
  for (int i = 75; i < 100; ++i) mixed.push_back(ep(i, Outcome::Timeout, 120, 0));
  CHECK(average_total_reward(mixed) == 7.5);
  CHECK(code_of([] { average_steps({}); }) == ErrorCode::EmptyInput);
}

TEST_CASE("moving average") {
  CHECK(moving_average(std::vector<double>{0, 10, 20}, 2) == std::vector<double>{0, 5, 15});
  const std::vector<double> s{3, -1, 4, 1, -5, 9};
  CHECK(moving_average(s, 1) == s);
  CHECK(moving_average(std::vector<double>(50, 2.5), 10) == std::vector<double>(50, 2.5));
  CHECK(moving_average(std::vector<double>{}, 3).empty());
  CHECK(code_of([&] { moving_average(s, 0); }) == ErrorCode::BadWindow);

  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> d(-10, 10);
  std::vector<double> x(80);
  for (auto& v : x) v = d(gen);
  for (int w : {1, 3, 10, 200}) {
    const auto m = moving_average(x, w);
    REQUIRE(m.size() == x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      const std::size_t lo = i + 1 >= static_cast<std::size_t>(w) ? i + 1 - w : 0;
      double sum = 0;
      for (std::size_t k = lo; k <= i; ++k) sum += x[k];
      CHECK(m[i] == doctest::Approx(sum / static_cast<double>(i - lo + 1)).epsilon(1e-12));
    }
  }
}

TEST_CASE("exploration rate") {
  std::vector<EpisodeRecord> r{ep(0, Outcome::Win, 60, 10, 20), ep(1, Outcome::Win, 40, 10, 10)};
  CHECK(exploration_rate(r) == 0.3);
  CHECK(exploration_rate(std::vector{ep(0, Outcome::Win, 5, 10, 0)}) == 0.0);
  CHECK(exploration_rate(std::vector{ep(0, Outcome::Win, 5, 10, 5)}) == 1.0);
  CHECK(code_of([] { exploration_rate(std::vector{ep(0, Outcome::Win, 0, 0)}); }) ==
        ErrorCode::EmptyInput);

  for (double eps : {0.0, 1.0}) {
    auto run = RunConfig::defaults(Algorithm::InteractiveQ);
    run.hyper.epsilon_init = eps;
    run.hyper.epsilon_min = eps;
    run.hyper.episodes = 5;
    run.hyper.max_steps = run.grid.max_steps = 20;
    CHECK(exploration_rate(run_training(run).episodes) == eps);
  }
}

TEST_CASE("build_report") {
  TrainingResult empty;
  CHECK(code_of([&] { build_report(empty); }) == ErrorCode::EmptyInput);

  auto run = RunConfig::defaults(Algorithm::InteractiveQ);
  run.hyper.alpha = 0.0;
  run.seed = 4;
  const auto result = run_training(run);
  const auto m = build_report(result);
  CHECK(m.mean_q_per_action == QRow{0, 0, 0, 0});
  CHECK(m.steps_series.size() == result.episodes.size());
  CHECK(m.reward_series.size() == result.episodes.size());
  CHECK(m.reward_moving_avg.size() == result.episodes.size());
  CHECK(m.epsilon_series.size() == result.episodes.size());
  CHECK(m.window == 10);
  CHECK(m.success_rate == success_rate(result.episodes));
  for (double v : {m.success_rate, m.loss_rate, m.timeout_rate, m.exploration_rate}) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
  int total = 0;
  for (int s : m.steps_series) total += s;
  CHECK(m.avg_steps_per_episode == static_cast<double>(total) / 100.0);
}
