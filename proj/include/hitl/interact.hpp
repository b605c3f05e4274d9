#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hitl/gridworld.hpp"
#include "hitl/qcore.hpp"

namespace hitl {

// Human rewards are clamped into this band before they reach an update.
inline constexpr double kHumanRewardLimit = 10.0;

struct FeedbackDecision {
  bool accepted = true;
  std::optional<double> human_reward;
  // Set when a live wait timed out and the step was accepted on the human's behalf.
  bool auto_accepted = false;

  static FeedbackDecision accept() { return {}; }
  static FeedbackDecision reject(double reward) { return {false, reward, false}; }

  // Throws InvalidDecision: reject needs a finite reward inside the band,
  // accept carries none.
  void validate() const;

  friend bool operator==(const FeedbackDecision&, const FeedbackDecision&) = default;
};

struct Proposal {
  int episode = 0;
  int step = 0;
  Position state;
  ActionType action = ActionType::Up;
};

struct FeedbackContext {
  const QTable& q;
  const GridConfig& grid;
};

struct FeedbackTraceEntry {
  int episode = 0;
  int step = 0;
  Position state;
  ActionType action = ActionType::Up;
  FeedbackDecision decision;

  friend bool operator==(const FeedbackTraceEntry&, const FeedbackTraceEntry&) = default;
};

enum class FeedbackKind { Live, AlwaysAccept, DistanceOracle, MistakeCorrecting, Replay };

std::string_view feedback_kind_name(FeedbackKind k) noexcept;
FeedbackKind feedback_kind_from_name(std::string_view name);

// Serializable description of where decisions come from.
struct FeedbackDescriptor {
  FeedbackKind kind = FeedbackKind::AlwaysAccept;
  std::string trace_path;          // replay only
  double rejection_reward = -1.0;  // simulated oracles only

  bool simulated() const noexcept {
    return kind == FeedbackKind::AlwaysAccept || kind == FeedbackKind::DistanceOracle ||
           kind == FeedbackKind::MistakeCorrecting;
  }

  friend bool operator==(const FeedbackDescriptor&, const FeedbackDescriptor&) = default;
};

class FeedbackSource {
 public:
  virtual ~FeedbackSource() = default;
  virtual FeedbackKind kind() const noexcept = 0;
  virtual FeedbackDecision decide(const Proposal& proposal, const FeedbackContext& ctx) = 0;
};

class AlwaysAccept final : public FeedbackSource {
 public:
  FeedbackKind kind() const noexcept override { return FeedbackKind::AlwaysAccept; }
  FeedbackDecision decide(const Proposal&, const FeedbackContext&) override {
    return FeedbackDecision::accept();
  }
};

// Accepts moves that get strictly closer to the goal without landing on a lose cell.
class DistanceOracle final : public FeedbackSource {
 public:
  explicit DistanceOracle(double rejection_reward = -1.0) : rejection_reward_(rejection_reward) {}
  FeedbackKind kind() const noexcept override { return FeedbackKind::DistanceOracle; }
  FeedbackDecision decide(const Proposal& proposal, const FeedbackContext& ctx) override;

 private:
  double rejection_reward_;
};

// Accepts exactly the actions that are optimal under the solved Q*.
class MistakeCorrecting final : public FeedbackSource {
 public:
  MistakeCorrecting(QTable optimal, double rejection_reward = -1.0)
      : optimal_(std::move(optimal)), rejection_reward_(rejection_reward) {}

  FeedbackKind kind() const noexcept override { return FeedbackKind::MistakeCorrecting; }
  FeedbackDecision decide(const Proposal& proposal, const FeedbackContext& ctx) override;

  const QTable& optimal() const noexcept { return optimal_; }

 private:
  QTable optimal_;
  double rejection_reward_;
};

std::unique_ptr<MistakeCorrecting> build_mistake_correcting(const GridConfig& cfg, double gamma,
                                                            double rejection_reward = -1.0);

// Hands back recorded decisions in order; any mismatch with the live
// trajectory is a FeedbackDivergence.
class ReplaySource final : public FeedbackSource {
 public:
  explicit ReplaySource(std::vector<FeedbackTraceEntry> entries) : entries_(std::move(entries)) {}

  FeedbackKind kind() const noexcept override { return FeedbackKind::Replay; }
  FeedbackDecision decide(const Proposal& proposal, const FeedbackContext& ctx) override;

  std::size_t consumed() const noexcept { return next_; }
  std::size_t remaining() const noexcept { return entries_.size() - next_; }

 private:
  std::vector<FeedbackTraceEntry> entries_;
  std::size_t next_ = 0;
};

// Rendezvous between the training loop and whoever speaks for the human.
// decide() blocks until submit() or close(); a positive timeout auto-accepts.
class LiveFeedback final : public FeedbackSource {
 public:
  explicit LiveFeedback(std::chrono::milliseconds timeout = std::chrono::milliseconds{0})
      : timeout_(timeout) {}

  FeedbackKind kind() const noexcept override { return FeedbackKind::Live; }
  FeedbackDecision decide(const Proposal& proposal, const FeedbackContext& ctx) override;

  // Marks the proposal as pending before decide() runs, so a submit that
  // races ahead of the training loop is not refused.
  void offer(const Proposal& proposal);

  // Throws NotAwaiting when nothing is pending, InvalidDecision for a bad
  // decision, SessionClosed after close().
  void submit(const FeedbackDecision& decision);

  void close();
  bool closed() const;
  std::optional<Proposal> pending() const;

 private:
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::optional<Proposal> pending_;
  std::optional<FeedbackDecision> decision_;
  bool closed_ = false;
  std::chrono::milliseconds timeout_;
};

// Adapts a plain function, e.g. a terminal prompt or a foreign callback.
class CallbackFeedback final : public FeedbackSource {
 public:
  using Fn = std::function<FeedbackDecision(const Proposal&, const FeedbackContext&)>;
  explicit CallbackFeedback(Fn fn) : fn_(std::move(fn)) {}

  FeedbackKind kind() const noexcept override { return FeedbackKind::Live; }
  FeedbackDecision decide(const Proposal& proposal, const FeedbackContext& ctx) override {
    return fn_(proposal, ctx);
  }

 private:
  Fn fn_;
};

// Builds the source for any non-live descriptor. Live sources need a channel
// and are constructed by the caller; asking for one here is InvalidConfig.
std::unique_ptr<FeedbackSource> make_feedback_source(const FeedbackDescriptor& desc,
                                                     const GridConfig& grid, double gamma);

class TraceSink {
 public:
  virtual ~TraceSink() = default;
  // Entries must arrive strictly ordered by (episode, step).
  virtual void record(const FeedbackTraceEntry& entry) = 0;
  virtual void flush() {}
};

class TraceLog final : public TraceSink {
 public:
  void record(const FeedbackTraceEntry& entry) override;
  const std::vector<FeedbackTraceEntry>& entries() const noexcept { return entries_; }
  std::vector<FeedbackTraceEntry> take() { return std::move(entries_); }

 private:
  std::vector<FeedbackTraceEntry> entries_;
};

// Appends one JSON object per line; flush() makes the lines durable.
class TraceFileWriter final : public TraceSink {
 public:
  explicit TraceFileWriter(const std::filesystem::path& path);
  void record(const FeedbackTraceEntry& entry) override;
  void flush() override;

 private:
  std::filesystem::path path_;
  std::ofstream out_;
  std::optional<std::pair<int, int>> last_;
};

std::string encode_trace_entry(const FeedbackTraceEntry& entry);
FeedbackTraceEntry decode_trace_entry(std::string_view line);
std::string encode_trace(const std::vector<FeedbackTraceEntry>& entries);
std::vector<FeedbackTraceEntry> decode_trace(std::string_view text);
std::vector<FeedbackTraceEntry> read_trace(const std::filesystem::path& path);

}  // namespace hitl
