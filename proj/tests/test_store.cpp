#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <random>

#include "hitl/error.hpp"
#include "hitl/store.hpp"
#include "json.hpp"
#include "test_support.hpp"

using namespace hitl;

namespace {

template <class F>
ErrorCode code_of(F fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode{};
}

QTableDocument random_document(std::mt19937_64& gen) {
  std::uniform_int_distribution<int> size(1, 7), alg(0, 1);
  std::uniform_real_distribution<double> val(-90.91, 90.91), unit(0.0, 1.0);
  QTableDocument doc;
  doc.algorithm = static_cast<Algorithm>(alg(gen));
  doc.seed = gen();
  doc.run_id = "0123456789abcdef";
  doc.hyper.alpha = unit(gen);
  doc.hyper.gamma = unit(gen) * 0.999;
  doc.hyper.epsilon_init = unit(gen);
  doc.hyper.epsilon_min = doc.hyper.epsilon_init * unit(gen);
  doc.hyper.epsilon_decay = 1.0 - unit(gen) * 0.5;
  doc.hyper.episodes = size(gen) * 100;
  doc.hyper.max_steps = size(gen) * 17;
  doc.q = QTable(size(gen));
  for (auto& v : doc.q.values()) {
    switch (gen() % 5) {
      case 0: v = 0.0; break;
      case 1: v = std::nextafter(val(gen), 100.0); break;
      case 2: v = val(gen) * 1e-300; break;
      default: v = val(gen);
    }
  }
  return doc;
}

std::string replace(std::string s, const std::string& from, const std::string& to) {
  const auto pos = s.find(from);
  REQUIRE(pos != std::string::npos);
  return s.replace(pos, from.size(), to);
}

EpisodeRecord rec(int i, Outcome o, int steps, double reward, double eps) {
  return EpisodeRecord{i, steps, reward, o, eps, steps / 2, steps - 1};
}

}  // namespace

TEST_CASE("Q-table documents round-trip exactly") {
  std::mt19937_64 gen(2718);
  test::TempDir dir;
  for (int i = 0; i < 300; ++i) {
    const auto doc = random_document(gen);
    const auto text = encode_qtable(doc);
    CHECK(decode_qtable(text) == doc);
    CHECK(encode_qtable(decode_qtable(text)) == text);
    if (i % 50 == 0) {
      save_qtable(doc, dir.path / "q.json");
      CHECK(load_qtable(dir.path / "q.json") == doc);
    }
  }
  QTableDocument zero;
  CHECK(decode_qtable(encode_qtable(zero)) == zero);

  QTableDocument single;
  q_update_qlearning(single.q, 0, ActionType::Right, 10.0, 1, 0.001, 0.89);
  const auto back = decode_qtable(encode_qtable(single));
  CHECK(back.q.at(0, ActionType::Right) == single.q.at(0, ActionType::Right));
}

TEST_CASE("malformed Q-table documents are rejected") {
  QTableDocument doc;
  const auto text = encode_qtable(doc);

  CHECK(code_of([&] { decode_qtable(text.substr(0, text.size() / 2)); }) ==
        ErrorCode::MalformedDocument);
  CHECK(code_of([] { decode_qtable(""); }) == ErrorCode::MalformedDocument);
  CHECK(code_of([] { decode_qtable("[1,2,3]"); }) == ErrorCode::MalformedDocument);
  CHECK(code_of([&] { decode_qtable(replace(text, "\"format_version\": 1", "\"format_version\": 2")); }) ==
        ErrorCode::VersionMismatch);
  CHECK(code_of([&] { decode_qtable(replace(text, "\"RIGHT\"", "\"EAST\"")); }) ==
        ErrorCode::MalformedDocument);
  CHECK(code_of([&] { decode_qtable(replace(text, "\"grid_size\": 4", "\"grid_size\": 5")); }) ==
        ErrorCode::MalformedDocument);

  auto j = nlohmann::json::parse(text);
  j["q"].erase(j["q"].begin());
  CHECK(j["q"].size() == 15);
  CHECK(code_of([&] { decode_qtable(j.dump()); }) == ErrorCode::MalformedDocument);

  j = nlohmann::json::parse(text);
  j["q"][3] = {0.0, 0.0, 0.0};
  CHECK(code_of([&] { decode_qtable(j.dump()); }) == ErrorCode::MalformedDocument);

  j = nlohmann::json::parse(text);
  j["q"][3][1] = "x";
  CHECK(code_of([&] { decode_qtable(j.dump()); }) == ErrorCode::MalformedDocument);

  test::TempDir dir;
  CHECK(code_of([&] { load_qtable(dir.path / "absent.json"); }) == ErrorCode::IOFailure);
  CHECK(code_of([&] { save_qtable(doc, dir.path / "no" / "such" / "dir" / "q.json"); }) ==
        ErrorCode::IOFailure);
}

TEST_CASE("episode log") {
  std::vector<EpisodeRecord> records;
  double eps = 0.97;
  for (int i = 0; i < 100; ++i) {
    records.push_back(rec(i, static_cast<Outcome>(i % 3), 1 + i % 120, (i % 7) - 3.25, eps));
    eps = decay_epsilon(eps, 0.99, 0.01);
  }
  const auto text = encode_episode_log(records);
  CHECK(text.rfind("episode,steps,total_reward,outcome,epsilon,explored_steps,accepted_steps\n", 0) ==
        0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 101);
  CHECK(decode_episode_log(text) == records);

  test::TempDir dir;
  write_episode_log(records, dir.path / "e.csv");
  CHECK(read_episode_log(dir.path / "e.csv") == records);

  CHECK(code_of([&] { decode_episode_log(replace(text, ",win,", ",draw,")); }) ==
        ErrorCode::MalformedDocument);
  CHECK(code_of([&] { decode_episode_log("episode,steps\n1,2\n"); }) ==
        ErrorCode::MalformedDocument);
  CHECK(code_of([&] { decode_episode_log(text + "1,2,3\n"); }) == ErrorCode::MalformedDocument);
}

TEST_CASE("run config documents") {
  for (auto alg : {Algorithm::InteractiveQ, Algorithm::InteractiveSarsa}) {
    auto run = RunConfig::defaults(alg);
    run.seed = 0xfedcba9876543210ull;
    run.feedback.kind = FeedbackKind::MistakeCorrecting;
    run.feedback.rejection_reward = -2.5;
    run.grid.start_mode = StartMode::uniform_random();
    CHECK(decode_run_config(encode_run_config(run)) == run);
    run.grid.start_mode = StartMode::at({3, 1});
    CHECK(decode_run_config(encode_run_config(run)) == run);
    CHECK(config_digest(run).size() == 16);
  }

  const auto sparse = decode_run_config(R"({"algorithm":"interactive_sarsa","seed":3})");
  CHECK(sparse.hyper == default_hyper(Algorithm::InteractiveSarsa));
  CHECK(sparse.seed == 3);

  const auto mirrored = decode_run_config(R"({"algorithm":"q","hyper":{"max_steps":30}})");
  CHECK(mirrored.grid.max_steps == 30);

  CHECK(code_of([] { decode_run_config(R"({"format_version":9})"); }) == ErrorCode::VersionMismatch);
  CHECK(code_of([] { decode_run_config(R"({"algorithm":"dqn"})"); }) == ErrorCode::InvalidConfig);
  CHECK(code_of([] {
          decode_run_config(R"({"grid":{"win_pos":{"x":1,"y":2}}})");
        }) == ErrorCode::InvalidConfig);
  CHECK(code_of([] { decode_run_config("{"); }) == ErrorCode::MalformedDocument);

  auto a = RunConfig::defaults(Algorithm::InteractiveQ);
  auto b = a;
  b.seed = 1;
  CHECK(config_digest(a) != config_digest(b));
  CHECK(config_digest(a) == config_digest(decode_run_config(encode_run_config(a))));
}

TEST_CASE("metrics documents") {
  auto run = RunConfig::defaults(Algorithm::InteractiveQ);
  run.feedback.kind = FeedbackKind::DistanceOracle;
  const auto result = run_training(run);
  const auto m = build_report(result);
  const auto text = encode_metrics(m, config_digest(run), run.algorithm, run.seed);
  CHECK(decode_metrics(text) == m);
  CHECK(code_of([&] { decode_metrics(replace(text, "\"format_version\": 1", "\"format_version\": 0")); }) ==
        ErrorCode::VersionMismatch);
}

TEST_CASE("run bundle") {
  auto run = RunConfig::defaults(Algorithm::InteractiveSarsa);
  run.seed = 12;
  run.feedback.kind = FeedbackKind::DistanceOracle;
  const auto result = run_training(run);
  test::TempDir dir;
  write_run_bundle(dir.path, run, result);

  const auto files = encode_run_bundle(run, result);
  CHECK(files.size() == 6);
  for (const auto& f : files) CHECK(read_text_file(dir.path / f.name) == f.contents);

  const auto bundle = load_run_bundle(dir.path);
  CHECK(bundle.config == run);
  CHECK(bundle.episodes == result.episodes);
  CHECK(bundle.trace == result.trace);
  CHECK(bundle.qtable.q == result.qtable);
  REQUIRE(bundle.metrics);
  CHECK(*bundle.metrics == build_report(bundle.episodes, bundle.qtable.q));

  SUBCASE("every document names the same run") {
    const auto id = config_digest(run);
    CHECK(bundle.run_id == id);
    CHECK(bundle.qtable.run_id == id);
    const auto metrics = nlohmann::json::parse(read_text_file(dir.path / "metrics.json"));
    CHECK(metrics["run_id"] == id);
    CHECK(metrics["seed"] == run.seed);
  }

  SUBCASE("a Q-table from another run is refused") {
    auto other = run;
    other.seed = 13;
    save_qtable(make_qtable_document(other, result.qtable), dir.path / "qtable.json");
    CHECK(code_of([&] { load_run_bundle(dir.path); }) == ErrorCode::MalformedDocument);
  }

  SUBCASE("no finished episode, no metrics files") {
    TrainingResult none{QTable(4), {}, {}, 0.97};
    CHECK(encode_run_bundle(run, none).size() == 4);
  }
}

TEST_CASE("series CSV") {
  std::vector<EpisodeRecord> r{rec(0, Outcome::Win, 4, 10, 0.5), rec(1, Outcome::Lose, 2, -10, 0.25)};
  const auto m = build_report(r, QTable(4), 2);
  CHECK(encode_series_csv(r, m) ==
        "episode,steps,total_reward,moving_avg,epsilon,explored_steps\n"
        "0,4,10,10,0.5,2\n"
        "1,2,-10,0,0.25,1\n");
}
