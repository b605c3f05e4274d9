#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <random>

#include "hitl/error.hpp"
#include "hitl/qcore.hpp"
#include "reference.hpp"

using namespace hitl;

TEST_CASE("select_action") {
  Rng rng(3);
  auto c = select_action({0, 0, 0, 1}, 0.0, rng);
  CHECK(c.action == ActionType::Right);
  CHECK_FALSE(c.explored);
  CHECK(rng.draws() == 1);

  c = select_action({0, 0, 0, 0}, 0.0, rng);
  CHECK(c.action == ActionType::Up);
  CHECK(rng.draws() == 2);

  SUBCASE("forced exploration consumes two draws and covers all actions") {
    int counts[4] = {};
    Rng r(11);
    for (int i = 0; i < 4000; ++i) {
      const auto before = r.draws();
      const auto e = select_action({5, 1, 2, 3}, 1.0, r);
      CHECK(e.explored);
      CHECK(r.draws() - before == 2);
      ++counts[action_code(e.action)];
    }
    for (int k : counts) CHECK(k > 850);
  }

  SUBCASE("greedy selection is a pure function of the row") {
    std::mt19937_64 gen(5);
    std::uniform_real_distribution<double> d(-5, 5);
    for (int i = 0; i < 200; ++i) {
      QRow row{d(gen), d(gen), d(gen), d(gen)};
      Rng a(i), b(i * 7 + 1);
      const auto x = select_action(row, 0.0, a);
      CHECK(x.action == select_action(row, 0.0, b).action);
      CHECK(x.action == greedy_action(row));
      CHECK(row[action_code(x.action)] == *std::max_element(row.begin(), row.end()));
    }
  }
}

TEST_CASE("Q-learning update arithmetic") {
  QTable q;
  CHECK(q_update_qlearning(q, 0, ActionType::Right, 10.0, 1, 0.001, 0.89) ==
        doctest::Approx(0.01).epsilon(1e-12));
  CHECK(std::abs(q.at(0, ActionType::Right) - 0.01) < 1e-12);

  QTable q2;
  q2.at(5, ActionType::Down) = 2.0;
  CHECK(std::abs(q_update_qlearning(q2, 1, ActionType::Down, 0.0, 5, 0.001, 0.89) - 0.00178) <
        1e-15);

  QTable q3;
  q3.at(6, ActionType::Down) = 10.0;
  CHECK(q_update_qlearning(q3, 6, ActionType::Down, 10.0, 10, 0.5, 0.89) == 0.0);
  CHECK(q3.at(6, ActionType::Down) == 10.0);

  CHECK_THROWS_AS(q_update_qlearning(q, 16, ActionType::Up, 0, 0, 0.1, 0.9), Error);
}

TEST_CASE("SARSA update arithmetic") {
  QTable q;
  for (auto a : kAllActions) {
    QTable z;
    CHECK(std::abs(q_update_sarsa(z, 0, ActionType::Right, 10.0, 1, a, 0.001, 0.89) - 0.01) <
          1e-12);
  }
  q.at(5, ActionType::Down) = 2.0;
  q.at(5, ActionType::Up) = 5.0;
  CHECK(std::abs(q_update_sarsa(q, 1, ActionType::Down, 0.0, 5, ActionType::Down, 0.001, 0.89) -
                 0.00178) < 1e-15);

  QTable r;
  r.at(3, ActionType::Left) = 4.0;
  const auto before = r;
  CHECK(q_update_sarsa(r, 2, ActionType::Right, 7.0, 3, ActionType::Left, 0.0, 0.89) == 0.0);
  CHECK(r == before);
  try {
    q_update_sarsa(r, 0, ActionType::Up, 0, -1, ActionType::Up, 0.1, 0.9);
    FAIL("bad index accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::IndexOutOfRange);
  }
}

TEST_CASE("updates touch one cell, agree on argmax successors and keep the band") {
  std::mt19937_64 gen(2024);
  std::uniform_real_distribution<double> val(-90.0, 90.0), rew(-10.0, 10.0), alpha(0.0, 1.0);
  std::uniform_int_distribution<int> st(0, 15), act(0, 3);
  const double bound = q_value_bound(10.0, 0.89);
  QTable q;
  for (auto& v : q.values()) v = val(gen);
  for (int i = 0; i < 20000; ++i) {
    const int s = st(gen), s2 = st(gen);
    const auto a = static_cast<ActionType>(act(gen));
    const double r = rew(gen), al = alpha(gen);

    QTable qa = q, qb = q;
    const double dq = q_update_qlearning(qa, s, a, r, s2, al, 0.89);
    const double ds = q_update_sarsa(qb, s, a, r, s2, greedy_action(q.row(s2)), al, 0.89);
    CHECK(dq == ds);
    CHECK(qa == qb);
    int changed = 0;
    for (std::size_t k = 0; k < q.values().size(); ++k)
      if (qa.values()[k] != q.values()[k]) ++changed;
    CHECK(changed <= 1);
    q = qa;
    for (double v : q.values()) REQUIRE(std::abs(v) <= bound);
  }
}

TEST_CASE("decay_epsilon") {
  CHECK(decay_epsilon(0.97, 0.99, 0.01) == doctest::Approx(0.9603).epsilon(1e-15));
  CHECK(decay_epsilon(0.011, 0.5, 0.01) == 0.01);
  CHECK(decay_epsilon(0.37, 1.0, 0.0) == 0.37);
}

TEST_CASE("mean_q_per_action") {
  QTable q;
  CHECK(mean_q_per_action(q) == QRow{0, 0, 0, 0});
  q.at(0, ActionType::Right) = 16;
  CHECK(mean_q_per_action(q) == QRow{0, 0, 0, 1});
  for (auto& v : q.values()) v = -2.5;
  CHECK(mean_q_per_action(q) == QRow{-2.5, -2.5, -2.5, -2.5});
}

TEST_CASE("HyperParams validation") {
  HyperParams h;
  CHECK_NOTHROW(h.validate());
  h.epsilon_min = 0.99;
  CHECK_THROWS_AS(h.validate(), Error);
  h = {};
  h.gamma = 1.0;
  CHECK_THROWS_AS(h.validate(), Error);
  h = {};
  h.episodes = 0;
  CHECK_NOTHROW(h.validate());
  h.episodes = -1;
  CHECK_THROWS_AS(h.validate(), Error);
}

TEST_CASE("value iteration oracle") {
  const GridConfig cfg;
  const QTable qs = solve_optimal_q(cfg, 0.89);
  CHECK(qs.at(state_index({2, 1}, 4), ActionType::Down) == doctest::Approx(10.0));
  CHECK(qs.at(state_index({0, 2}, 4), ActionType::Right) == doctest::Approx(-10.0));
  CHECK(qs.row_max(0) == doctest::Approx(0.89 * 0.89 * 0.89 * 10.0).epsilon(1e-12));

  SUBCASE("Bellman fixed point") {
    for (auto p : nonterminal_cells(cfg)) {
      for (auto a : kAllActions) {
        const auto o = step(p, a, cfg);
        const double boot = o.terminal == Terminal::None
                                ? qs.row_max(state_index(o.next, 4))
                                : 0.0;
        CHECK(std::abs(qs.at(state_index(p, 4), a) - (o.reward + 0.89 * boot)) < 1e-10);
      }
    }
    for (Position t : {Position{2, 2}, Position{1, 2}, Position{3, 2}})
      CHECK(qs.row(state_index(t, 4)) == QRow{0, 0, 0, 0});
  }

  SUBCASE("greedy path length equals the breadth-first distance") {
    const auto dist = ref::bfs_distances();
    for (auto p : nonterminal_cells(cfg)) {
      Position s = p;
      int steps = 0;
      while (!cfg.is_terminal(s) && steps < 50) {
        s = apply_action(s, greedy_action(qs.row(state_index(s, 4))), cfg);
        ++steps;
      }
      CHECK(s == cfg.win_pos);
      CHECK(steps == dist[state_index(p, 4)]);
    }
  }
}
