#include "hitl/session.hpp"

#include <algorithm>
#include <condition_variable>
#include <random>
#include <thread>

#include "hitl/error.hpp"
#include "hitl/metrics.hpp"
#include "hitl/store.hpp"
#include "json_codec.hpp"

namespace hitl {

using codec::ojson;

namespace {

constexpr int kLiveThrottleMs = 300;

bool finished(Phase p) { return p == Phase::Done || p == Phase::Failed; }

ojson pending_json(const std::optional<PendingProposal>& p) {
  if (!p) return nullptr;
  ojson j;
  j["episode"] = p->proposal.episode;
  j["step"] = p->proposal.step;
  j["state"] = codec::position(p->proposal.state);
  j["action"] = action_name(p->proposal.action);
  j["explored"] = p->explored;
  j["q_row"] = codec::q_row(p->q_row);
  return j;
}

ojson state_json(const SessionState& s) {
  ojson j;
  j["session"] = s.id;
  j["phase"] = phase_name(s.phase);
  j["episode"] = s.episode;
  j["step"] = s.step;
  j["last_seq"] = s.last_seq;
  j["pause_requested"] = s.pause_requested;
  j["throttle_ms"] = s.throttle_ms;
  j["pending_proposal"] = pending_json(s.pending);
  if (!s.error.empty()) j["error"] = s.error;
  return j;
}

}  // namespace

std::string_view phase_name(Phase p) noexcept {
  switch (p) {
    case Phase::Idle: return "idle";
    case Phase::Running: return "running";
    case Phase::AwaitingFeedback: return "awaiting_feedback";
    case Phase::Paused: return "paused";
    case Phase::Done: return "done";
    case Phase::Failed: return "failed";
  }
  return "?";
}

std::string encode_snapshot(const SessionState& s) {
  ojson j;
  j["type"] = "snapshot";
  const ojson body = state_json(s);
  for (auto& [k, v] : body.items()) j[k] = v;
  return j.dump();
}

std::string encode_state(const SessionState& s) { return state_json(s).dump(); }

class Session final : public TrainingObserver, public std::enable_shared_from_this<Session> {
 public:
  Session(std::string id, RunConfig run, SessionOptions options, std::filesystem::path dir)
      : id_(std::move(id)), run_(std::move(run)), options_(options), dir_(std::move(dir)) {
    if (run_.feedback.kind == FeedbackKind::Live) {
      auto live = std::make_unique<LiveFeedback>(std::chrono::milliseconds{options_.feedback_timeout_ms});
      live_ = live.get();
      source_ = std::move(live);
    } else {
      source_ = make_feedback_source(run_.feedback, run_.grid, run_.hyper.gamma);
    }
    throttle_ms_ = options_.throttle_ms.value_or(live_ ? kLiveThrottleMs : 0);

    ojson payload;
    payload["run_id"] = config_digest(run_);
    payload["config"] = codec::run_config_body(run_);
    payload["live"] = live_ != nullptr;
    payload["throttle_ms"] = throttle_ms_;
    std::lock_guard lock(mu_);
    emit("session_created", std::move(payload));
  }

  ~Session() override { shutdown(); }

  bool live() const { return live_ != nullptr; }
  const RunConfig& config() const { return run_; }

  bool active() const {
    std::lock_guard lock(mu_);
    return !finished(phase_);
  }

  SessionState snapshot() const {
    std::lock_guard lock(mu_);
    return snapshot_locked();
  }

  SessionState start() {
    std::lock_guard lock(mu_);
    if (phase_ != Phase::Idle) illegal("start");
    phase_ = Phase::Running;
    worker_ = std::thread([self = shared_from_this()] { self->run(); });
    return snapshot_locked();
  }

  SessionState pause() {
    std::lock_guard lock(mu_);
    if (phase_ != Phase::Running && phase_ != Phase::AwaitingFeedback) illegal("pause");
    pause_requested_ = true;
    return snapshot_locked();
  }

  SessionState resume() {
    std::lock_guard lock(mu_);
    if (phase_ == Phase::Paused) {
      phase_ = Phase::Running;
      cv_.notify_all();
    } else if (pause_requested_ && !finished(phase_)) {
      pause_requested_ = false;
    } else {
      illegal("resume");
    }
    return snapshot_locked();
  }

  SessionState abort() {
    std::unique_lock lock(mu_);
    if (finished(phase_)) illegal("abort");
    abort_requested_ = true;
    if (phase_ == Phase::Idle) {
      TrainingResult empty{QTable(run_.grid.grid_size), {}, {}, run_.hyper.epsilon_init};
      conclude(lock, empty, ErrorCode::Aborted, "session aborted before it started");
      return snapshot_locked();
    }
    if (live_) live_->close();
    cv_.notify_all();
    return snapshot_locked();
  }

  SessionState set_speed(int throttle_ms) {
    std::lock_guard lock(mu_);
    if (finished(phase_)) illegal("set_speed");
    throttle_ms_ = std::max(0, throttle_ms);
    cv_.notify_all();
    return snapshot_locked();
  }

  SessionState submit(const FeedbackDecision& decision) {
    decision.validate();
    std::lock_guard lock(mu_);
    if (phase_ != Phase::AwaitingFeedback || !live_) {
      fail(ErrorCode::NotAwaiting, "session " + id_ + " is not awaiting feedback (phase " +
                                       std::string(phase_name(phase_)) + ")");
    }
    live_->submit(decision);
    pending_.reset();
    phase_ = Phase::Running;
    return snapshot_locked();
  }

  std::uint64_t subscribe(SessionManager::Listener listener, std::optional<std::uint64_t> from_seq) {
    std::lock_guard lock(mu_);
    listener(encode_snapshot(snapshot_locked()));
    if (from_seq) {
      for (std::size_t i = *from_seq > 0 ? *from_seq - 1 : 0; i < events_.size(); ++i) {
        listener(events_[i]);
      }
    }
    const std::uint64_t token = next_token_++;
    listeners_.emplace(token, std::move(listener));
    return token;
  }

  void unsubscribe(std::uint64_t token) {
    std::lock_guard lock(mu_);
    listeners_.erase(token);
  }

  SessionState wait(std::chrono::milliseconds timeout) {
    std::unique_lock lock(mu_);
    cv_.wait_for(lock, timeout, [&] { return finished(phase_); });
    return snapshot_locked();
  }

  std::string artifact(std::string_view name) const {
    std::lock_guard lock(mu_);
    if (!finished(phase_)) fail(ErrorCode::InvalidState, "session " + id_ + " has not finished");
    for (const auto& f : artifacts_) {
      if (f.name == name) return f.contents;
    }
    fail(ErrorCode::InvalidArgument, "no artifact named '" + std::string(name) + "'");
  }

  void shutdown() {
    {
      std::lock_guard lock(mu_);
      if (!finished(phase_)) {
        abort_requested_ = true;
        if (live_) live_->close();
        cv_.notify_all();
      }
    }
    if (!worker_.joinable()) return;
    if (worker_.get_id() == std::this_thread::get_id()) {
      worker_.detach();
    } else {
      worker_.join();
    }
  }

  // TrainingObserver, on the worker thread.
  void on_step_boundary(int episode, int step) override {
    std::unique_lock lock(mu_);
    episode_ = episode;
    step_ = step;
    if (throttle_ms_ > 0 && !(episode == 0 && step == 0)) {
      cv_.wait_for(lock, std::chrono::milliseconds{throttle_ms_}, [&] { return abort_requested_; });
    }
    if (pause_requested_ && !abort_requested_) {
      pause_requested_ = false;
      phase_ = Phase::Paused;
      cv_.notify_all();
      cv_.wait(lock, [&] { return phase_ != Phase::Paused || abort_requested_; });
    }
    if (abort_requested_) fail(ErrorCode::Aborted, "session aborted");
  }

  void on_proposal(const Proposal& p, bool explored, const QRow& row) override {
    std::lock_guard lock(mu_);
    if (live_) {
      pending_ = PendingProposal{p, row, explored};
      phase_ = Phase::AwaitingFeedback;
      live_->offer(p);
    }
    ojson payload;
    payload["episode"] = p.episode;
    payload["step"] = p.step;
    payload["state"] = codec::position(p.state);
    payload["action"] = action_name(p.action);
    payload["explored"] = explored;
    payload["q_row"] = codec::q_row(row);
    payload["awaiting_feedback"] = live_ != nullptr;
    emit("step_proposal", std::move(payload));
  }

  void on_decision(const Proposal&, const FeedbackDecision&) override {
    std::lock_guard lock(mu_);
    if (live_ && phase_ == Phase::AwaitingFeedback) {
      pending_.reset();
      phase_ = Phase::Running;
    }
  }

  void on_step(const StepEvent& e, const QTable&) override {
    std::lock_guard lock(mu_);
    ojson payload;
    payload["episode"] = e.episode;
    payload["step"] = e.step;
    payload["state"] = codec::position(e.state);
    payload["action"] = action_name(e.action);
    const ojson decision = codec::decision(e.decision);
    for (auto& [k, v] : decision.items()) payload[k] = v;
    payload["reward"] = e.reward_used;
    payload["next"] = codec::position(e.outcome.next);
    payload["terminal"] = terminal_name(e.outcome.terminal);
    payload["delta"] = e.delta;
    emit("step_result", std::move(payload));
  }

  void on_episode_end(const EpisodeRecord& rec, const QTable& q) override {
    std::lock_guard lock(mu_);
    ojson payload = codec::episode(rec);
    payload["mean_q_per_action"] = codec::q_row(mean_q_per_action(q));
    emit("episode_end", std::move(payload));
  }

 private:
  [[noreturn]] void illegal(const char* what) const {
    fail(ErrorCode::IllegalTransition, std::string(what) + " is not allowed in phase " +
                                           std::string(phase_name(phase_)));
  }

  SessionState snapshot_locked() const {
    SessionState s;
    s.id = id_;
    s.phase = phase_;
    s.episode = episode_;
    s.step = step_;
    s.pending = pending_;
    s.pause_requested = pause_requested_;
    s.last_seq = events_.size();
    s.throttle_ms = throttle_ms_;
    s.error = error_;
    return s;
  }

  void emit(std::string_view type, ojson payload) {
    ojson j;
    j["type"] = type;
    j["seq"] = events_.size() + 1;
    j["session"] = id_;
    j["payload"] = std::move(payload);
    events_.push_back(j.dump());
    for (auto& [token, listener] : listeners_) listener(events_.back());
  }

  void run() {
    TrainingResult result;
    std::optional<ErrorCode> code;
    std::string message;
    try {
      run_training_into(run_, *source_, Sinks{nullptr, this}, result);
    } catch (const Error& e) {
      code = e.code();
      message = e.what();
    } catch (const std::exception& e) {
      code = ErrorCode::InvalidState;
      message = e.what();
    }
    std::unique_lock lock(mu_);
    if (code && abort_requested_) {
      code = ErrorCode::Aborted;
      message = "session aborted";
    }
    conclude(lock, result, code, message);
  }

  // Writes the artifacts and moves to done/failed. Called with mu_ held.
  void conclude(std::unique_lock<std::mutex>&, const TrainingResult& result,
                std::optional<ErrorCode> code, const std::string& message) {
    std::string write_error;
    try {
      artifacts_ = encode_run_bundle(run_, result, options_.window);
      if (!dir_.empty()) {
        std::filesystem::create_directories(dir_);
        for (const auto& f : artifacts_) write_text_file(dir_ / f.name, f.contents);
      }
    } catch (const std::exception& e) {
      write_error = e.what();
    }
    pending_.reset();
    pause_requested_ = false;
    if (code || !write_error.empty()) {
      phase_ = Phase::Failed;
      const ErrorCode c = code.value_or(ErrorCode::IOFailure);
      error_ = code ? message : write_error;
      ojson payload;
      payload["code"] = error_code_name(c);
      payload["message"] = error_;
      payload["episodes_completed"] = result.episodes.size();
      emit("error", std::move(payload));
    } else {
      phase_ = Phase::Done;
      ojson payload;
      payload["run_id"] = config_digest(run_);
      payload["episodes"] = result.episodes.size();
      payload["final_epsilon"] = result.final_epsilon;
      if (!result.episodes.empty()) {
        const MetricsReport m = build_report(result, options_.window);
        payload["avg_total_reward_per_episode"] = m.avg_total_reward_per_episode;
        payload["success_rate"] = m.success_rate;
        payload["avg_steps_per_episode"] = m.avg_steps_per_episode;
        payload["exploration_rate"] = m.exploration_rate;
        payload["mean_q_per_action"] = codec::q_row(m.mean_q_per_action);
      }
      emit("training_complete", std::move(payload));
    }
    cv_.notify_all();
  }

  const std::string id_;
  const RunConfig run_;
  const SessionOptions options_;
  const std::filesystem::path dir_;

  std::unique_ptr<FeedbackSource> source_;
  LiveFeedback* live_ = nullptr;

  mutable std::mutex mu_;
  std::condition_variable cv_;
  Phase phase_ = Phase::Idle;
  int episode_ = 0;
  int step_ = 0;
  std::optional<PendingProposal> pending_;
  bool pause_requested_ = false;
  bool abort_requested_ = false;
  int throttle_ms_ = 0;
  std::string error_;
  std::vector<std::string> events_;
  std::map<std::uint64_t, SessionManager::Listener> listeners_;
  std::uint64_t next_token_ = 1;
  std::vector<BundleFile> artifacts_;
  std::thread worker_;
};

Subscription& Subscription::operator=(Subscription&& other) noexcept {
  if (this != &other) {
    reset();
    session_ = std::move(other.session_);
    token_ = other.token_;
    other.token_ = 0;
  }
  return *this;
}

void Subscription::reset() {
  if (auto s = session_.lock(); s && token_ != 0) s->unsubscribe(token_);
  session_.reset();
  token_ = 0;
}

SessionManager::SessionManager(std::filesystem::path artifact_root, SessionLimits limits)
    : artifact_root_(std::move(artifact_root)), limits_(limits), id_salt_(std::random_device{}()) {}

SessionManager::~SessionManager() { shutdown(); }

void SessionManager::shutdown() {
  std::vector<std::shared_ptr<Session>> sessions;
  {
    std::lock_guard lock(mu_);
    for (auto& [id, s] : sessions_) sessions.push_back(s);
  }
  for (auto& s : sessions) s->shutdown();
}

std::string SessionManager::create_session(const RunConfig& run, SessionOptions options) {
  run.validate();
  if (options.window < 1) fail(ErrorCode::InvalidConfig, "window must be at least 1");
  if (options.feedback_timeout_ms < 0) fail(ErrorCode::InvalidConfig, "feedback timeout must not be negative");

  std::lock_guard lock(mu_);
  if (run.feedback.kind == FeedbackKind::Live) {
    const auto live = std::count_if(sessions_.begin(), sessions_.end(), [](const auto& kv) {
      return kv.second->live() && kv.second->active();
    });
    if (live >= limits_.max_live_sessions) {
      fail(ErrorCode::SessionLimit, "at most " + std::to_string(limits_.max_live_sessions) +
                                        " live session(s) may run at once");
    }
  }
  char salt[17];
  std::snprintf(salt, sizeof salt, "%016llx", static_cast<unsigned long long>(id_salt_));
  std::string id = "s" + std::to_string(next_id_++) + "-" + std::string(salt, 8);
  std::filesystem::path dir = artifact_root_.empty() ? std::filesystem::path{} : artifact_root_ / id;
  std::shared_ptr<Session> session;
  try {
    session = std::make_shared<Session>(id, run, options, dir);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::IOFailure || e.code() == ErrorCode::MalformedDocument) {
      fail(ErrorCode::InvalidConfig, e.what());
    }
    throw;
  }
  sessions_.emplace(id, std::move(session));
  return id;
}

std::shared_ptr<Session> SessionManager::find(const std::string& id) const {
  std::lock_guard lock(mu_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) fail(ErrorCode::UnknownSession, "no session '" + id + "'");
  return it->second;
}

SessionState SessionManager::start(const std::string& id) { return find(id)->start(); }
SessionState SessionManager::pause(const std::string& id) { return find(id)->pause(); }
SessionState SessionManager::resume(const std::string& id) { return find(id)->resume(); }
SessionState SessionManager::abort(const std::string& id) { return find(id)->abort(); }

SessionState SessionManager::set_speed(const std::string& id, int throttle_ms) {
  return find(id)->set_speed(throttle_ms);
}

SessionState SessionManager::submit_feedback(const std::string& id, const FeedbackDecision& decision) {
  return find(id)->submit(decision);
}

SessionState SessionManager::state(const std::string& id) const { return find(id)->snapshot(); }

std::vector<std::string> SessionManager::list() const {
  std::lock_guard lock(mu_);
  std::vector<std::string> ids;
  for (const auto& [id, s] : sessions_) ids.push_back(id);
  return ids;
}

Subscription SessionManager::subscribe(const std::string& id, Listener listener,
                                       std::optional<std::uint64_t> from_seq) {
  auto session = find(id);
  const std::uint64_t token = session->subscribe(std::move(listener), from_seq);
  return Subscription(session, token);
}

SessionState SessionManager::wait(const std::string& id, std::chrono::milliseconds timeout) {
  return find(id)->wait(timeout);
}

std::string SessionManager::artifact(const std::string& id, std::string_view name) const {
  return find(id)->artifact(name);
}

const RunConfig& SessionManager::config(const std::string& id) const { return find(id)->config(); }

}  // namespace hitl
