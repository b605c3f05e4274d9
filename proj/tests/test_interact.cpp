#include "doctest.h"

#include <chrono>
#include <filesystem>
#include <thread>

#include "hitl/error.hpp"
#include "hitl/interact.hpp"
#include "test_support.hpp"

using namespace hitl;

namespace {

FeedbackDecision ask(FeedbackSource& src, Position p, ActionType a) {
  const GridConfig grid;
  const QTable q;
  return src.decide(Proposal{0, 0, p, a}, FeedbackContext{q, grid});
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode{};
}

}  // namespace

TEST_CASE("decision invariants") {
  CHECK_NOTHROW(FeedbackDecision::accept().validate());
  CHECK_NOTHROW(FeedbackDecision::reject(-10).validate());
  CHECK(code_of([] { FeedbackDecision{false, std::nullopt, false}.validate(); }) ==
        ErrorCode::InvalidDecision);
  CHECK(code_of([] { FeedbackDecision::reject(10.5).validate(); }) == ErrorCode::InvalidDecision);
  CHECK(code_of([] { FeedbackDecision{true, 1.0, false}.validate(); }) ==
        ErrorCode::InvalidDecision);
}

TEST_CASE("simulated oracles") {
  AlwaysAccept always;
  DistanceOracle distance;
  auto mistake = build_mistake_correcting(GridConfig{}, 0.89);

  CHECK(ask(always, {3, 3}, ActionType::Left).accepted);
  CHECK(ask(distance, {0, 0}, ActionType::Right) == FeedbackDecision::accept());
  CHECK(ask(distance, {1, 1}, ActionType::Down) == FeedbackDecision::reject(-1));
  CHECK(ask(distance, {0, 0}, ActionType::Up) == FeedbackDecision::reject(-1));
  CHECK(ask(*mistake, {2, 1}, ActionType::Down).accepted);
  CHECK(ask(*mistake, {0, 2}, ActionType::Right) == FeedbackDecision::reject(-1));

  const GridConfig grid;
  for (auto p : nonterminal_cells(grid)) {
    const auto best = greedy_action(mistake->optimal().row(state_index(p, 4)));
    CHECK(ask(*mistake, p, best).accepted);
    for (auto a : kAllActions) {
      const auto d = ask(distance, p, a);
      if (grid.is_lose(apply_action(p, a, grid))) CHECK_FALSE(d.accepted);
      CHECK(d.accepted == (!grid.is_lose(apply_action(p, a, grid)) &&
                           manhattan(apply_action(p, a, grid), grid.win_pos) <
                               manhattan(p, grid.win_pos)));
    }
  }
}

TEST_CASE("mistake_correcting accepts every tied optimum") {
  auto mistake = build_mistake_correcting(GridConfig{}, 0.89);
  // From (0,0) both RIGHT and DOWN start a four-step path.
  CHECK(ask(*mistake, {0, 0}, ActionType::Right).accepted);
  CHECK(ask(*mistake, {0, 0}, ActionType::Down).accepted);
  CHECK_FALSE(ask(*mistake, {0, 0}, ActionType::Up).accepted);
}

TEST_CASE("replay source") {
  std::vector<FeedbackTraceEntry> entries{
      {0, 0, {0, 0}, ActionType::Right, FeedbackDecision::accept()},
      {0, 1, {1, 0}, ActionType::Down, FeedbackDecision::reject(-3)},
  };
  ReplaySource replay(entries);
  const GridConfig grid;
  const QTable q;
  CHECK(replay.decide({0, 0, {0, 0}, ActionType::Right}, {q, grid}).accepted);
  CHECK(replay.decide({0, 1, {1, 0}, ActionType::Down}, {q, grid}) ==
        FeedbackDecision::reject(-3));
  CHECK(replay.remaining() == 0);
  CHECK(code_of([&] { replay.decide({0, 2, {1, 1}, ActionType::Down}, {q, grid}); }) ==
        ErrorCode::FeedbackDivergence);

  ReplaySource other(entries);
  CHECK(code_of([&] { other.decide({0, 0, {0, 0}, ActionType::Left}, {q, grid}); }) ==
        ErrorCode::FeedbackDivergence);
}

TEST_CASE("live feedback rendezvous") {
  const GridConfig grid;
  const QTable q;

  SUBCASE("submit without a pending proposal") {
    LiveFeedback live;
    CHECK(code_of([&] { live.submit(FeedbackDecision::accept()); }) == ErrorCode::NotAwaiting);
  }

  SUBCASE("decision from another thread") {
    LiveFeedback live;
    std::thread human([&] {
      while (!live.pending()) std::this_thread::sleep_for(std::chrono::milliseconds(1));
      CHECK(code_of([&] { live.submit({false, std::nullopt, false}); }) ==
            ErrorCode::InvalidDecision);
      live.submit(FeedbackDecision::reject(-10));
    });
    const auto d = live.decide({0, 0, {0, 0}, ActionType::Up}, {q, grid});
    human.join();
    CHECK(d == FeedbackDecision::reject(-10));
    CHECK_FALSE(live.pending());
  }

  SUBCASE("close while waiting") {
    LiveFeedback live;
    std::thread closer([&] {
      while (!live.pending()) std::this_thread::sleep_for(std::chrono::milliseconds(1));
      live.close();
    });
    CHECK(code_of([&] { live.decide({0, 0, {0, 0}, ActionType::Up}, {q, grid}); }) ==
          ErrorCode::SessionClosed);
    closer.join();
  }

  SUBCASE("timeout auto-accepts") {
    LiveFeedback live(std::chrono::milliseconds(20));
    const auto d = live.decide({0, 0, {0, 0}, ActionType::Up}, {q, grid});
    CHECK(d.accepted);
    CHECK(d.auto_accepted);
  }
}

TEST_CASE("trace encoding round-trips") {
  const FeedbackTraceEntry e{0, 0, {0, 0}, ActionType::Up, FeedbackDecision::accept()};
  CHECK(encode_trace_entry(e) ==
        R"({"episode":0,"step":0,"state":{"x":0,"y":0},"action":"UP","accepted":true,"human_reward":null})");
  CHECK(decode_trace_entry(encode_trace_entry(e)) == e);

  const FeedbackTraceEntry r{3, 7, {1, 3}, ActionType::Left, FeedbackDecision::reject(-0.1)};
  CHECK(decode_trace_entry(encode_trace_entry(r)) == r);

  FeedbackTraceEntry timed = e;
  timed.decision.auto_accepted = true;
  CHECK(decode_trace_entry(encode_trace_entry(timed)) == timed);

  CHECK(code_of([] { decode_trace_entry("{\"episode\":0"); }) == ErrorCode::MalformedDocument);
}

TEST_CASE("trace sinks enforce order") {
  TraceLog log;
  log.record({0, 0, {0, 0}, ActionType::Up, {}});
  log.record({0, 1, {0, 0}, ActionType::Up, {}});
  CHECK_THROWS_AS(log.record({0, 1, {0, 0}, ActionType::Up, {}}), Error);
  CHECK_THROWS_AS(log.record({0, 0, {0, 0}, ActionType::Up, {}}), Error);
  log.record({1, 0, {0, 0}, ActionType::Up, {}});
  CHECK(log.entries().size() == 3);
}

TEST_CASE("trace file writer") {
  test::TempDir dir;
  const auto path = dir.path / "trace.ndjson";
  std::vector<FeedbackTraceEntry> written;
  {
    TraceFileWriter w(path);
    for (int t = 0; t < 120; ++t) {
      FeedbackTraceEntry e{0, t, {t % 4, (t / 4) % 4}, kAllActions[t % 4],
                           t % 3 ? FeedbackDecision::accept() : FeedbackDecision::reject(-1)};
      w.record(e);
      written.push_back(e);
    }
    w.flush();
    CHECK(read_trace(path) == written);
    CHECK(code_of([&] { w.record(written.front()); }) == ErrorCode::InvalidArgument);
  }
  CHECK(read_trace(path) == written);
  CHECK(code_of([&] { TraceFileWriter bad(dir.path / "missing" / "x" / "t.ndjson"); }) ==
        ErrorCode::SinkUnavailable);
}

TEST_CASE("feedback factory") {
  FeedbackDescriptor d;
  CHECK(make_feedback_source(d, GridConfig{}, 0.89)->kind() == FeedbackKind::AlwaysAccept);
  d.kind = FeedbackKind::MistakeCorrecting;
  CHECK(make_feedback_source(d, GridConfig{}, 0.89)->kind() == FeedbackKind::MistakeCorrecting);
  d.kind = FeedbackKind::Live;
  CHECK(code_of([&] { make_feedback_source(d, GridConfig{}, 0.89); }) == ErrorCode::InvalidConfig);
  CHECK(feedback_kind_from_name("distance") == FeedbackKind::DistanceOracle);
  CHECK(feedback_kind_from_name("always-accept") == FeedbackKind::AlwaysAccept);
  CHECK(feedback_kind_from_name(feedback_kind_name(FeedbackKind::Replay)) == FeedbackKind::Replay);
}
