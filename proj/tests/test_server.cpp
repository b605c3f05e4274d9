#include "doctest.h"

#include <chrono>
#include <thread>

#include "hitl/server.hpp"
#include "hitl/store.hpp"
#include "json.hpp"
#include "net_client.hpp"

using namespace hitl;
using json = nlohmann::json;

namespace {

RunConfig live_config(int episodes) {
  auto run = RunConfig::defaults(Algorithm::InteractiveSarsa);
  run.seed = 2;
  run.feedback.kind = FeedbackKind::Live;
  run.hyper.episodes = episodes;
  run.hyper.max_steps = run.grid.max_steps = 6;
  return run;
}

json body_of(const test::HttpReply& r) { return json::parse(r.body); }

}  // namespace

TEST_CASE("command frames") {
  SessionManager m;
  auto run = live_config(1);
  const auto id = m.create_session(run, SessionOptions{0, 0, 10});

  auto reply = json::parse(handle_command(m, id, R"({"type":"feedback","accepted":true})"));
  CHECK(reply["type"] == "command_error");
  CHECK(reply["code"] == "NotAwaiting");
  CHECK_FALSE(reply.contains("seq"));

  reply = json::parse(handle_command(m, id, "not json"));
  CHECK(reply["type"] == "command_error");
  CHECK(reply["code"] == "MalformedDocument");

  reply = json::parse(handle_command(m, id, R"({"type":"dance"})"));
  CHECK(reply["code"] == "InvalidArgument");

  reply = json::parse(handle_command(m, "missing", R"({"type":"start_training"})"));
  CHECK(reply["code"] == "UnknownSession");

  reply = json::parse(handle_command(m, id, R"({"type":"control","action":"set_speed","throttle_ms":5})"));
  CHECK(reply["type"] == "ack");
  CHECK(reply["state"]["throttle_ms"] == 5);

  reply = json::parse(handle_command(m, id, R"({"type":"start_training"})"));
  CHECK(reply["type"] == "ack");
  CHECK(reply["command"] == "start_training");

  for (int i = 0; i < 2000 && m.state(id).phase != Phase::AwaitingFeedback; ++i)
    std::this_thread::sleep_for(std::chrono::milliseconds(1));
  reply = json::parse(handle_command(m, id, R"({"type":"feedback","accepted":false})"));
  CHECK(reply["code"] == "InvalidDecision");
  reply = json::parse(handle_command(m, id, R"({"type":"feedback","accepted":false,"human_reward":-1})"));
  CHECK(reply["type"] == "ack");
  reply = json::parse(handle_command(m, id, R"({"type":"control","action":"abort"})"));
  CHECK(reply["type"] == "ack");
  CHECK(m.wait(id).phase == Phase::Failed);
}

TEST_CASE("HTTP endpoints and the event stream") {
  Server server(ServerOptions{"127.0.0.1", 0, {}, 1});
  server.start_background();
  const auto port = server.port();
  REQUIRE(port != 0);

  CHECK(test::http_get(port, "/api/health").status == 200);
  CHECK(test::http_get(port, "/api/sessions/zzz").status == 404);
  CHECK(test::http_get(port, "/api/nowhere").status == 404);
  CHECK(test::http_post(port, "/api/sessions", "{oops").status == 400);
  CHECK(test::http_post(port, "/api/sessions", R"({"algorithm":"ppo"})").status == 400);

  const auto create = test::http_post(
      port, "/api/sessions",
      json{{"config", json::parse(encode_run_config(live_config(2)))},
           {"options", {{"throttle_ms", 0}}}}
          .dump());
  REQUIRE(create.status == 201);
  const std::string id = body_of(create)["id"];
  CHECK(body_of(test::http_get(port, "/api/sessions"))["sessions"] == json::array({id}));
  CHECK(test::http_post(port, "/api/sessions", encode_run_config(live_config(1))).status == 429);
  CHECK(test::http_get(port, "/api/sessions/" + id + "/artifacts/qtable.json").status == 409);
  CHECK(test::http_post(port, "/api/sessions/" + id + "/resume").status == 409);

  test::WsClient ws(port, "/api/sessions/" + id + "/stream?from_seq=1");
  auto first = json::parse(ws.read());
  CHECK(first["type"] == "snapshot");
  CHECK(first["phase"] == "idle");
  CHECK(json::parse(ws.read())["type"] == "session_created");

  ws.send(R"({"type":"start_training"})");
  std::uint64_t expected_seq = 2;
  int proposals = 0, results = 0, acks = 0, episodes = 0;
  bool complete = false;
  while (!complete) {
    const auto f = json::parse(ws.read());
    if (f["type"] == "ack") {
      ++acks;
      continue;
    }
    REQUIRE(f["type"] != "command_error");
    CHECK(f["seq"] == expected_seq++);
    if (f["type"] == "step_proposal") {
      ++proposals;
      CHECK(f["payload"]["awaiting_feedback"] == true);
      if (proposals % 2) {
        ws.send(R"({"type":"feedback","accepted":true})");
      } else {
        ws.send(R"({"type":"feedback","accepted":false,"human_reward":-10})");
      }
    } else if (f["type"] == "step_result") {
      ++results;
      CHECK(f["payload"]["accepted"] == (results % 2 == 1));
      if (results % 2 == 0) CHECK(f["payload"]["reward"] == -10.0);
    } else if (f["type"] == "episode_end") {
      ++episodes;
    } else if (f["type"] == "training_complete") {
      complete = true;
    }
  }
  CHECK(proposals == results);
  CHECK(acks == proposals + 1);
  CHECK(episodes == 2);

  const auto state = body_of(test::http_get(port, "/api/sessions/" + id));
  CHECK(state["phase"] == "done");

  const auto trace = test::http_get(port, "/api/sessions/" + id + "/artifacts/trace.ndjson");
  CHECK(trace.status == 200);
  CHECK(decode_trace(trace.body).size() == static_cast<std::size_t>(proposals));
  const auto q = test::http_get(port, "/api/sessions/" + id + "/artifacts/qtable.json");
  CHECK(decode_qtable(q.body).run_id == config_digest(live_config(2)));
  CHECK(test::http_get(port, "/api/sessions/" + id + "/artifacts/nope.txt").status == 400);

  // The replayed trace reproduces the served run.
  ReplaySource replay(decode_trace(trace.body));
  CHECK(encode_qtable(make_qtable_document(live_config(2), run_training(live_config(2), replay).qtable)) ==
        q.body);

  server.stop();
}
