#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hitl/interact.hpp"
#include "hitl/trainer.hpp"

namespace hitl {

enum class Phase { Idle, Running, AwaitingFeedback, Paused, Done, Failed };

std::string_view phase_name(Phase p) noexcept;

struct SessionOptions {
  // Minimum delay between steps; unset means 300 ms for live sessions, 0 otherwise.
  std::optional<int> throttle_ms;
  // 0 blocks forever; otherwise a silent human is auto-accepted after this long.
  int feedback_timeout_ms = 0;
  int window = 10;
};

struct SessionLimits {
  int max_live_sessions = 1;
};

struct PendingProposal {
  Proposal proposal;
  QRow q_row{};
  bool explored = false;
};

struct SessionState {
  std::string id;
  Phase phase = Phase::Idle;
  int episode = 0;
  int step = 0;
  std::optional<PendingProposal> pending;
  bool pause_requested = false;
  std::uint64_t last_seq = 0;
  int throttle_ms = 0;
  std::string error;
};

// Serializes a state as the snapshot frame a new subscriber receives first.
std::string encode_snapshot(const SessionState& s);
std::string encode_state(const SessionState& s);

class Session;

// Unsubscribes on destruction.
class Subscription {
 public:
  Subscription() = default;
  Subscription(std::weak_ptr<Session> session, std::uint64_t token)
      : session_(std::move(session)), token_(token) {}
  Subscription(Subscription&& other) noexcept { *this = std::move(other); }
  Subscription& operator=(Subscription&& other) noexcept;
  Subscription(const Subscription&) = delete;
  Subscription& operator=(const Subscription&) = delete;
  ~Subscription() { reset(); }

  void reset();

 private:
  std::weak_ptr<Session> session_;
  std::uint64_t token_ = 0;
};

// Owns training sessions. Each session runs one sequential training loop on
// its own thread; commands and subscriptions may arrive from any thread.
//
// Listeners receive UTF-8 JSON frames in seq order. They are called with the
// session lock held, so they must not block or call back into the manager.
class SessionManager {
 public:
  using Listener = std::function<void(const std::string& frame)>;

  // With an empty artifact_root, artifacts are kept in memory only.
  explicit SessionManager(std::filesystem::path artifact_root = {}, SessionLimits limits = {});
  ~SessionManager();

  SessionManager(const SessionManager&) = delete;
  SessionManager& operator=(const SessionManager&) = delete;

  // Throws InvalidConfig or SessionLimit.
  std::string create_session(const RunConfig& run, SessionOptions options = {});

  // Transition commands throw UnknownSession or IllegalTransition.
  SessionState start(const std::string& id);
  SessionState pause(const std::string& id);
  SessionState resume(const std::string& id);
  SessionState abort(const std::string& id);
  SessionState set_speed(const std::string& id, int throttle_ms);

  // Throws NotAwaiting, InvalidDecision, UnknownSession.
  SessionState submit_feedback(const std::string& id, const FeedbackDecision& decision);

  SessionState state(const std::string& id) const;
  std::vector<std::string> list() const;

  // Delivers a snapshot, then every event with seq > last_seq (or >= from_seq
  // when given) followed by all later events.
  Subscription subscribe(const std::string& id, Listener listener,
                         std::optional<std::uint64_t> from_seq = std::nullopt);

  // Blocks until the session is done or failed, or the timeout passes.
  SessionState wait(const std::string& id,
                    std::chrono::milliseconds timeout = std::chrono::hours{24});

  // Finished sessions only; names as in bundle_file. Throws UnknownSession,
  // InvalidState before completion, InvalidArgument for unknown names.
  std::string artifact(const std::string& id, std::string_view name) const;

  const RunConfig& config(const std::string& id) const;

  // Aborts every unfinished session and joins its training thread.
  void shutdown();

 private:
  std::shared_ptr<Session> find(const std::string& id) const;

  std::filesystem::path artifact_root_;
  SessionLimits limits_;
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t next_id_ = 1;
  std::uint64_t id_salt_;
};

}  // namespace hitl
