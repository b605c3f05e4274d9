#include "hitl/interact.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "hitl/error.hpp"
#include "json.hpp"

namespace hitl {

using ojson = nlohmann::ordered_json;

namespace {

// Q* ties computed along mirrored paths can differ in the last bits.
constexpr double kOptimalTieTolerance = 1e-9;

bool precedes(const std::pair<int, int>& a, const FeedbackTraceEntry& b) {
  return a < std::pair<int, int>{b.episode, b.step};
}

}  // namespace

void FeedbackDecision::validate() const {
  if (accepted) {
    if (human_reward) fail(ErrorCode::InvalidDecision, "an accepted action carries no human reward");
    return;
  }
  if (!human_reward) fail(ErrorCode::InvalidDecision, "a rejection must supply a human reward");
  if (!std::isfinite(*human_reward) || std::abs(*human_reward) > kHumanRewardLimit) {
    fail(ErrorCode::InvalidDecision, "human reward must lie in [-10, 10]");
  }
}

std::string_view feedback_kind_name(FeedbackKind k) noexcept {
  switch (k) {
    case FeedbackKind::Live: return "live";
    case FeedbackKind::AlwaysAccept: return "always_accept";
    case FeedbackKind::DistanceOracle: return "distance_oracle";
    case FeedbackKind::MistakeCorrecting: return "mistake_correcting";
    case FeedbackKind::Replay: return "replay";
  }
  return "?";
}

FeedbackKind feedback_kind_from_name(std::string_view name) {
  for (auto k : {FeedbackKind::Live, FeedbackKind::AlwaysAccept, FeedbackKind::DistanceOracle,
                 FeedbackKind::MistakeCorrecting, FeedbackKind::Replay}) {
    if (feedback_kind_name(k) == name) return k;
  }
  if (name == "always-accept") return FeedbackKind::AlwaysAccept;
  if (name == "distance") return FeedbackKind::DistanceOracle;
  if (name == "mistake") return FeedbackKind::MistakeCorrecting;
  fail(ErrorCode::InvalidConfig, "unknown feedback kind '" + std::string(name) + "'");
}

FeedbackDecision DistanceOracle::decide(const Proposal& proposal, const FeedbackContext& ctx) {
  const Position next = apply_action(proposal.state, proposal.action, ctx.grid);
  const bool closer =
      manhattan(next, ctx.grid.win_pos) < manhattan(proposal.state, ctx.grid.win_pos);
  if (closer && !ctx.grid.is_lose(next)) return FeedbackDecision::accept();
  return FeedbackDecision::reject(rejection_reward_);
}

FeedbackDecision MistakeCorrecting::decide(const Proposal& proposal, const FeedbackContext& ctx) {
  const int s = state_index(proposal.state, ctx.grid.grid_size);
  const double best = optimal_.row_max(s);
  if (optimal_.at(s, proposal.action) >= best - kOptimalTieTolerance) {
    return FeedbackDecision::accept();
  }
  return FeedbackDecision::reject(rejection_reward_);
}

std::unique_ptr<MistakeCorrecting> build_mistake_correcting(const GridConfig& cfg, double gamma,
                                                            double rejection_reward) {
  return std::make_unique<MistakeCorrecting>(solve_optimal_q(cfg, gamma), rejection_reward);
}

FeedbackDecision ReplaySource::decide(const Proposal& proposal, const FeedbackContext&) {
  if (next_ >= entries_.size()) {
    fail(ErrorCode::FeedbackDivergence,
         "trace exhausted at episode " + std::to_string(proposal.episode) + " step " +
             std::to_string(proposal.step));
  }
  const FeedbackTraceEntry& e = entries_[next_];
  if (e.episode != proposal.episode || e.step != proposal.step || e.state != proposal.state ||
      e.action != proposal.action) {
    std::ostringstream msg;
    msg << "trace entry " << next_ << " recorded (" << e.episode << "," << e.step << ") at ("
        << e.state.x << "," << e.state.y << ") " << action_name(e.action) << " but the run proposed ("
        << proposal.episode << "," << proposal.step << ") at (" << proposal.state.x << ","
        << proposal.state.y << ") " << action_name(proposal.action);
    fail(ErrorCode::FeedbackDivergence, msg.str());
  }
  ++next_;
  return e.decision;
}

void LiveFeedback::offer(const Proposal& proposal) {
  std::lock_guard lock(mu_);
  if (closed_) return;
  pending_ = proposal;
  decision_.reset();
}

FeedbackDecision LiveFeedback::decide(const Proposal& proposal, const FeedbackContext&) {
  std::unique_lock lock(mu_);
  if (closed_) fail(ErrorCode::SessionClosed, "live feedback channel is closed");
  if (!pending_ || pending_->episode != proposal.episode || pending_->step != proposal.step) {
    pending_ = proposal;
    decision_.reset();
  }
  auto ready = [&] { return decision_.has_value() || closed_; };
  if (timeout_.count() > 0) {
    if (!cv_.wait_for(lock, timeout_, ready)) {
      pending_.reset();
      FeedbackDecision auto_accept;
      auto_accept.auto_accepted = true;
      return auto_accept;
    }
  } else {
    cv_.wait(lock, ready);
  }
  if (!decision_) fail(ErrorCode::SessionClosed, "live feedback channel closed while awaiting a decision");
  FeedbackDecision d = *decision_;
  decision_.reset();
  pending_.reset();
  return d;
}

void LiveFeedback::submit(const FeedbackDecision& decision) {
  decision.validate();
  std::lock_guard lock(mu_);
  if (closed_) fail(ErrorCode::SessionClosed, "live feedback channel is closed");
  if (!pending_ || decision_) fail(ErrorCode::NotAwaiting, "no proposal is awaiting feedback");
  decision_ = decision;
  cv_.notify_all();
}

void LiveFeedback::close() {
  std::lock_guard lock(mu_);
  closed_ = true;
  pending_.reset();
  cv_.notify_all();
}

bool LiveFeedback::closed() const {
  std::lock_guard lock(mu_);
  return closed_;
}

std::optional<Proposal> LiveFeedback::pending() const {
  std::lock_guard lock(mu_);
  if (decision_) return std::nullopt;
  return pending_;
}

std::unique_ptr<FeedbackSource> make_feedback_source(const FeedbackDescriptor& desc,
                                                     const GridConfig& grid, double gamma) {
  switch (desc.kind) {
    case FeedbackKind::AlwaysAccept: return std::make_unique<AlwaysAccept>();
    case FeedbackKind::DistanceOracle: return std::make_unique<DistanceOracle>(desc.rejection_reward);
    case FeedbackKind::MistakeCorrecting:
      return build_mistake_correcting(grid, gamma, desc.rejection_reward);
    case FeedbackKind::Replay: return std::make_unique<ReplaySource>(read_trace(desc.trace_path));
    case FeedbackKind::Live: break;
  }
  fail(ErrorCode::InvalidConfig, "live feedback needs a session channel or a callback");
}

void TraceLog::record(const FeedbackTraceEntry& entry) {
  if (!entries_.empty() && !precedes({entries_.back().episode, entries_.back().step}, entry)) {
    fail(ErrorCode::InvalidArgument, "trace entries must be strictly ordered by (episode, step)");
  }
  entries_.push_back(entry);
}

TraceFileWriter::TraceFileWriter(const std::filesystem::path& path) : path_(path) {
  out_.open(path, std::ios::binary | std::ios::trunc);
  if (!out_) fail(ErrorCode::SinkUnavailable, "cannot open trace file " + path.string());
}

void TraceFileWriter::record(const FeedbackTraceEntry& entry) {
  if (last_ && !precedes(*last_, entry)) {
    fail(ErrorCode::InvalidArgument, "trace entries must be strictly ordered by (episode, step)");
  }
  out_ << encode_trace_entry(entry) << '\n';
  if (!out_) fail(ErrorCode::SinkUnavailable, "write to " + path_.string() + " failed");
  last_ = {entry.episode, entry.step};
}

void TraceFileWriter::flush() {
  out_.flush();
  if (!out_) fail(ErrorCode::SinkUnavailable, "flush of " + path_.string() + " failed");
}

std::string encode_trace_entry(const FeedbackTraceEntry& e) {
  ojson j;
  j["episode"] = e.episode;
  j["step"] = e.step;
  j["state"] = {{"x", e.state.x}, {"y", e.state.y}};
  j["action"] = action_name(e.action);
  j["accepted"] = e.decision.accepted;
  j["human_reward"] = e.decision.human_reward ? ojson(*e.decision.human_reward) : ojson(nullptr);
  if (e.decision.auto_accepted) j["auto_accepted"] = true;
  return j.dump();
}

FeedbackTraceEntry decode_trace_entry(std::string_view line) {
  try {
    const ojson j = ojson::parse(line);
    FeedbackTraceEntry e;
    e.episode = j.at("episode").get<int>();
    e.step = j.at("step").get<int>();
    e.state = {j.at("state").at("x").get<int>(), j.at("state").at("y").get<int>()};
    e.action = action_from_name(j.at("action").get<std::string>());
    e.decision.accepted = j.at("accepted").get<bool>();
    const auto& r = j.at("human_reward");
    if (!r.is_null()) e.decision.human_reward = r.get<double>();
    e.decision.auto_accepted = j.value("auto_accepted", false);
    e.decision.validate();
    return e;
  } catch (const nlohmann::json::exception& ex) {
    fail(ErrorCode::MalformedDocument, std::string("bad trace record: ") + ex.what());
  } catch (const Error& ex) {
    fail(ErrorCode::MalformedDocument, std::string("bad trace record: ") + ex.what());
  }
}

std::string encode_trace(const std::vector<FeedbackTraceEntry>& entries) {
  std::string out;
  for (const auto& e : entries) {
    out += encode_trace_entry(e);
    out += '\n';
  }
  return out;
}

std::vector<FeedbackTraceEntry> decode_trace(std::string_view text) {
  std::vector<FeedbackTraceEntry> entries;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    FeedbackTraceEntry e = decode_trace_entry(line);
    if (!entries.empty() && !precedes({entries.back().episode, entries.back().step}, e)) {
      fail(ErrorCode::MalformedDocument,
           "trace line " + std::to_string(line_no) + " is out of (episode, step) order");
    }
    entries.push_back(e);
  }
  return entries;
}

std::vector<FeedbackTraceEntry> read_trace(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IOFailure, "cannot read trace " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return decode_trace(buf.str());
}

}  // namespace hitl
