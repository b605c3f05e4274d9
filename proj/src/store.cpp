#include "hitl/store.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <system_error>

#include "hitl/error.hpp"
#include "json_codec.hpp"

namespace hitl {

namespace codec {

ojson position(Position p) { return ojson{{"x", p.x}, {"y", p.y}}; }

Position position(const ojson& j) { return {j.at("x").get<int>(), j.at("y").get<int>()}; }

ojson hyper(const HyperParams& h) {
  ojson j;
  j["alpha"] = h.alpha;
  j["gamma"] = h.gamma;
  j["epsilon_init"] = h.epsilon_init;
  j["epsilon_decay"] = h.epsilon_decay;
  j["epsilon_min"] = h.epsilon_min;
  j["episodes"] = h.episodes;
  j["max_steps"] = h.max_steps;
  return j;
}

ojson grid(const GridConfig& g) {
  ojson j;
  j["grid_size"] = g.grid_size;
  j["win_pos"] = position(g.win_pos);
  ojson lose = ojson::array();
  for (Position p : g.lose_positions) lose.push_back(position(p));
  j["lose_positions"] = lose;
  j["win_reward"] = g.win_reward;
  j["lose_reward"] = g.lose_reward;
  j["step_reward"] = g.step_reward;
  j["max_steps"] = g.max_steps;
  if (g.start_mode.fixed) {
    j["start"] = {{"mode", "fixed"}, {"x", g.start_mode.fixed->x}, {"y", g.start_mode.fixed->y}};
  } else {
    j["start"] = {{"mode", "uniform_random"}};
  }
  return j;
}

ojson feedback(const FeedbackDescriptor& f) {
  ojson j;
  j["kind"] = feedback_kind_name(f.kind);
  j["rejection_reward"] = f.rejection_reward;
  if (f.kind == FeedbackKind::Replay) j["trace_path"] = f.trace_path;
  return j;
}

ojson run_config_body(const RunConfig& run) {
  ojson j;
  j["format_version"] = kFormatVersion;
  j["algorithm"] = algorithm_name(run.algorithm);
  j["seed"] = run.seed;
  j["hyper"] = hyper(run.hyper);
  j["grid"] = grid(run.grid);
  j["feedback"] = feedback(run.feedback);
  return j;
}

namespace {

template <typename T>
void read_if(const ojson& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) out = it->template get<T>();
}

void check_version(const ojson& j) {
  if (auto it = j.find("format_version"); it != j.end()) {
    const int v = it->get<int>();
    if (v != kFormatVersion) {
      fail(ErrorCode::VersionMismatch, "format_version " + std::to_string(v) +
                                           " is not supported (expected " +
                                           std::to_string(kFormatVersion) + ")");
    }
  }
}

std::uint64_t read_seed(const ojson& j) {
  if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<std::int64_t>() >= 0)) {
    fail(ErrorCode::MalformedDocument, "seed must be a non-negative integer");
  }
  return j.get<std::uint64_t>();
}

}  // namespace

RunConfig run_config(const ojson& j) {
  if (!j.is_object()) fail(ErrorCode::MalformedDocument, "run config must be a JSON object");
  check_version(j);
  RunConfig run = RunConfig::defaults(algorithm_from_name(j.value("algorithm", "interactive_q")));
  if (auto it = j.find("seed"); it != j.end()) run.seed = read_seed(*it);

  bool hyper_steps = false;
  bool grid_steps = false;
  if (auto it = j.find("hyper"); it != j.end()) {
    const ojson& h = *it;
    read_if(h, "alpha", run.hyper.alpha);
    read_if(h, "gamma", run.hyper.gamma);
    read_if(h, "epsilon_init", run.hyper.epsilon_init);
    read_if(h, "epsilon_decay", run.hyper.epsilon_decay);
    read_if(h, "epsilon_min", run.hyper.epsilon_min);
    read_if(h, "episodes", run.hyper.episodes);
    hyper_steps = h.contains("max_steps");
    read_if(h, "max_steps", run.hyper.max_steps);
  }
  if (auto it = j.find("grid"); it != j.end()) {
    const ojson& g = *it;
    read_if(g, "grid_size", run.grid.grid_size);
    if (g.contains("win_pos")) run.grid.win_pos = position(g.at("win_pos"));
    if (g.contains("lose_positions")) {
      run.grid.lose_positions.clear();
      for (const auto& p : g.at("lose_positions")) run.grid.lose_positions.push_back(position(p));
    }
    read_if(g, "win_reward", run.grid.win_reward);
    read_if(g, "lose_reward", run.grid.lose_reward);
    read_if(g, "step_reward", run.grid.step_reward);
    grid_steps = g.contains("max_steps");
    read_if(g, "max_steps", run.grid.max_steps);
    if (g.contains("start")) {
      const ojson& s = g.at("start");
      const std::string mode = s.value("mode", "fixed");
      if (mode == "fixed") {
        run.grid.start_mode = StartMode::at(position(s));
      } else if (mode == "uniform_random") {
        run.grid.start_mode = StartMode::uniform_random();
      } else {
        fail(ErrorCode::MalformedDocument, "unknown start mode '" + mode + "'");
      }
    }
  }
  if (hyper_steps && !grid_steps) run.grid.max_steps = run.hyper.max_steps;
  if (grid_steps && !hyper_steps) run.hyper.max_steps = run.grid.max_steps;

  if (auto it = j.find("feedback"); it != j.end()) {
    const ojson& f = *it;
    run.feedback.kind = feedback_kind_from_name(f.value("kind", "always_accept"));
    read_if(f, "rejection_reward", run.feedback.rejection_reward);
    read_if(f, "trace_path", run.feedback.trace_path);
  }
  return run;
}

ojson q_row(const QRow& row) { return ojson(std::vector<double>(row.begin(), row.end())); }

ojson episode(const EpisodeRecord& r) {
  ojson j;
  j["episode"] = r.index;
  j["steps"] = r.steps;
  j["total_reward"] = r.total_reward;
  j["outcome"] = outcome_name(r.outcome);
  j["epsilon"] = r.epsilon_at_start;
  j["explored_steps"] = r.explored_steps;
  j["accepted_steps"] = r.accepted_steps;
  return j;
}

ojson metrics_body(const MetricsReport& m) {
  ojson j;
  j["window"] = m.window;
  j["avg_total_reward_per_episode"] = m.avg_total_reward_per_episode;
  j["success_rate"] = m.success_rate;
  j["loss_rate"] = m.loss_rate;
  j["timeout_rate"] = m.timeout_rate;
  j["avg_steps_per_episode"] = m.avg_steps_per_episode;
  j["exploration_rate"] = m.exploration_rate;
  j["mean_q_per_action"] = q_row(m.mean_q_per_action);
  j["steps_series"] = m.steps_series;
  j["reward_series"] = m.reward_series;
  j["reward_moving_avg"] = m.reward_moving_avg;
  j["epsilon_series"] = m.epsilon_series;
  return j;
}

ojson decision(const FeedbackDecision& d) {
  ojson j;
  j["accepted"] = d.accepted;
  j["human_reward"] = d.human_reward ? ojson(*d.human_reward) : ojson(nullptr);
  if (d.auto_accepted) j["auto_accepted"] = true;
  return j;
}

}  // namespace codec

using codec::ojson;

namespace {

constexpr std::string_view kEpisodeHeader =
    "episode,steps,total_reward,outcome,epsilon,explored_steps,accepted_steps";

const std::array<std::string_view, kNumActions> kActionNames = {"UP", "DOWN", "LEFT", "RIGHT"};

ojson parse_document(std::string_view text, const char* what) {
  try {
    return ojson::parse(text);
  } catch (const nlohmann::json::exception& ex) {
    fail(ErrorCode::MalformedDocument, std::string(what) + ": " + ex.what());
  }
}

// Wraps decoding so library exceptions surface as MalformedDocument.
template <typename F>
auto decoding(const char* what, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const nlohmann::json::exception& ex) {
    fail(ErrorCode::MalformedDocument, std::string(what) + ": " + ex.what());
  }
}

std::string format_double(double v) {
  std::array<char, 64> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc{}) fail(ErrorCode::IOFailure, "cannot format number");
  return std::string(buf.data(), end);
}

template <typename T>
T parse_number(std::string_view field, std::size_t line_no) {
  T value{};
  auto [end, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc{} || end != field.data() + field.size()) {
    fail(ErrorCode::MalformedDocument, "episode log line " + std::to_string(line_no) +
                                           ": bad number '" + std::string(field) + "'");
  }
  return value;
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    if (nl == std::string_view::npos) break;
    text.remove_prefix(nl + 1);
  }
  return lines;
}

}  // namespace

std::string config_digest(const RunConfig& run) {
  const std::string canonical = codec::run_config_body(run).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canonical) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) out[static_cast<std::size_t>(i)] = kHex[h & 0xf];
  return out;
}

std::string encode_run_config(const RunConfig& run) {
  ojson body = codec::run_config_body(run);
  ojson j;
  j["format_version"] = kFormatVersion;
  j["run_id"] = config_digest(run);
  for (auto it = body.begin(); it != body.end(); ++it) {
    if (it.key() != "format_version") j[it.key()] = it.value();
  }
  return j.dump(2) + "\n";
}

RunConfig decode_run_config(std::string_view text) {
  const ojson j = parse_document(text, "run config");
  RunConfig run = decoding("run config", [&] { return codec::run_config(j); });
  run.validate();
  return run;
}

void save_run_config(const RunConfig& run, const std::filesystem::path& destination) {
  write_text_file(destination, encode_run_config(run));
}

RunConfig load_run_config(const std::filesystem::path& source) {
  return decode_run_config(read_text_file(source));
}

std::string encode_qtable(const QTableDocument& doc) {
  ojson j;
  j["format_version"] = doc.format_version;
  j["run_id"] = doc.run_id;
  j["algorithm"] = algorithm_name(doc.algorithm);
  j["grid_size"] = doc.grid_size();
  j["state_order"] = "y*grid_size+x";
  j["action_names"] = kActionNames;
  j["hyper"] = codec::hyper(doc.hyper);
  j["seed"] = doc.seed;
  ojson rows = ojson::array();
  for (int s = 0; s < doc.q.num_states(); ++s) rows.push_back(codec::q_row(doc.q.row(s)));
  j["q"] = rows;
  return j.dump(2) + "\n";
}

QTableDocument decode_qtable(std::string_view text) {
  const ojson j = parse_document(text, "Q-table document");
  return decoding("Q-table document", [&] {
    if (!j.is_object()) fail(ErrorCode::MalformedDocument, "Q-table document must be an object");
    const int version = j.at("format_version").get<int>();
    if (version != kFormatVersion) {
      fail(ErrorCode::VersionMismatch, "format_version " + std::to_string(version) +
                                           " is not supported (expected " +
                                           std::to_string(kFormatVersion) + ")");
    }
    QTableDocument doc;
    doc.format_version = version;
    doc.run_id = j.at("run_id").get<std::string>();
    doc.algorithm = algorithm_from_name(j.at("algorithm").get<std::string>());
    const int grid_size = j.at("grid_size").get<int>();
    if (grid_size < 1) fail(ErrorCode::MalformedDocument, "grid_size must be positive");

    const auto& names = j.at("action_names");
    if (!names.is_array() || names.size() != kActionNames.size()) {
      fail(ErrorCode::MalformedDocument, "action_names must list the four actions");
    }
    for (std::size_t k = 0; k < kActionNames.size(); ++k) {
      if (names[k].get<std::string>() != kActionNames[k]) {
        fail(ErrorCode::MalformedDocument, "action_names must be [UP, DOWN, LEFT, RIGHT] in order");
      }
    }

    const ojson& h = j.at("hyper");
    doc.hyper.alpha = h.at("alpha").get<double>();
    doc.hyper.gamma = h.at("gamma").get<double>();
    doc.hyper.epsilon_init = h.at("epsilon_init").get<double>();
    doc.hyper.epsilon_decay = h.at("epsilon_decay").get<double>();
    doc.hyper.epsilon_min = h.at("epsilon_min").get<double>();
    doc.hyper.episodes = h.at("episodes").get<int>();
    doc.hyper.max_steps = h.at("max_steps").get<int>();
    doc.seed = j.at("seed").get<std::uint64_t>();

    const ojson& rows = j.at("q");
    const auto expected = static_cast<std::size_t>(grid_size) * static_cast<std::size_t>(grid_size);
    if (!rows.is_array() || rows.size() != expected) {
      fail(ErrorCode::MalformedDocument,
           "q has " + std::to_string(rows.is_array() ? rows.size() : 0) + " rows, expected " +
               std::to_string(expected) + " for grid_size " + std::to_string(grid_size));
    }
    doc.q = QTable(grid_size);
    for (std::size_t s = 0; s < expected; ++s) {
      const ojson& row = rows[s];
      if (!row.is_array() || row.size() != static_cast<std::size_t>(kNumActions)) {
        fail(ErrorCode::MalformedDocument, "q row " + std::to_string(s) + " must hold 4 numbers");
      }
      for (int k = 0; k < kNumActions; ++k) {
        if (!row[k].is_number()) {
          fail(ErrorCode::MalformedDocument, "q row " + std::to_string(s) + " has a non-number");
        }
        const double v = row[k].get<double>();
        if (!std::isfinite(v)) fail(ErrorCode::MalformedDocument, "q values must be finite");
        doc.q.at(static_cast<int>(s), static_cast<ActionType>(k)) = v;
      }
    }
    return doc;
  });
}

void save_qtable(const QTableDocument& doc, const std::filesystem::path& destination) {
  write_text_file(destination, encode_qtable(doc));
}

QTableDocument load_qtable(const std::filesystem::path& source) {
  return decode_qtable(read_text_file(source));
}

std::string encode_episode_log(const std::vector<EpisodeRecord>& records) {
  std::string out(kEpisodeHeader);
  out += '\n';
  for (const auto& r : records) {
    out += std::to_string(r.index) + ',' + std::to_string(r.steps) + ',' +
           format_double(r.total_reward) + ',' + std::string(outcome_name(r.outcome)) + ',' +
           format_double(r.epsilon_at_start) + ',' + std::to_string(r.explored_steps) + ',' +
           std::to_string(r.accepted_steps) + '\n';
  }
  return out;
}

std::vector<EpisodeRecord> decode_episode_log(std::string_view text) {
  const auto lines = split_lines(text);
  if (lines.empty() || lines.front() != kEpisodeHeader) {
    fail(ErrorCode::MalformedDocument, "episode log must start with the header line");
  }
  std::vector<EpisodeRecord> records;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    std::string_view line = lines[i];
    if (line.empty()) {
      if (i + 1 == lines.size()) break;
      fail(ErrorCode::MalformedDocument, "blank line " + std::to_string(i + 1) + " in episode log");
    }
    std::vector<std::string_view> f;
    for (;;) {
      const auto comma = line.find(',');
      f.push_back(line.substr(0, comma));
      if (comma == std::string_view::npos) break;
      line.remove_prefix(comma + 1);
    }
    if (f.size() != 7) {
      fail(ErrorCode::MalformedDocument,
           "episode log line " + std::to_string(i + 1) + " has " + std::to_string(f.size()) +
               " fields, expected 7");
    }
    EpisodeRecord r;
    r.index = parse_number<int>(f[0], i + 1);
    r.steps = parse_number<int>(f[1], i + 1);
    r.total_reward = parse_number<double>(f[2], i + 1);
    r.outcome = outcome_from_name(f[3]);
    r.epsilon_at_start = parse_number<double>(f[4], i + 1);
    r.explored_steps = parse_number<int>(f[5], i + 1);
    r.accepted_steps = parse_number<int>(f[6], i + 1);
    records.push_back(r);
  }
  return records;
}

void write_episode_log(const std::vector<EpisodeRecord>& records,
                       const std::filesystem::path& destination) {
  write_text_file(destination, encode_episode_log(records));
}

std::vector<EpisodeRecord> read_episode_log(const std::filesystem::path& source) {
  return decode_episode_log(read_text_file(source));
}

std::string encode_series_csv(const std::vector<EpisodeRecord>& records, const MetricsReport& m) {
  std::string out = "episode,steps,total_reward,moving_avg,epsilon,explored_steps\n";
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    out += std::to_string(r.index) + ',' + std::to_string(r.steps) + ',' +
           format_double(r.total_reward) + ',' + format_double(m.reward_moving_avg.at(i)) + ',' +
           format_double(r.epsilon_at_start) + ',' + std::to_string(r.explored_steps) + '\n';
  }
  return out;
}

std::string encode_metrics(const MetricsReport& m, std::string_view run_id, Algorithm algorithm,
                           std::uint64_t seed) {
  ojson j;
  j["format_version"] = kFormatVersion;
  j["run_id"] = run_id;
  j["algorithm"] = algorithm_name(algorithm);
  j["seed"] = seed;
  const ojson body = codec::metrics_body(m);
  for (auto& [k, v] : body.items()) j[k] = v;
  return j.dump(2) + "\n";
}

MetricsReport decode_metrics(std::string_view text) {
  const ojson j = parse_document(text, "metrics report");
  return decoding("metrics report", [&] {
    const int version = j.at("format_version").get<int>();
    if (version != kFormatVersion) {
      fail(ErrorCode::VersionMismatch, "format_version " + std::to_string(version) + " is not supported");
    }
    MetricsReport m;
    m.window = j.at("window").get<int>();
    m.avg_total_reward_per_episode = j.at("avg_total_reward_per_episode").get<double>();
    m.success_rate = j.at("success_rate").get<double>();
    m.loss_rate = j.at("loss_rate").get<double>();
    m.timeout_rate = j.at("timeout_rate").get<double>();
    m.avg_steps_per_episode = j.at("avg_steps_per_episode").get<double>();
    m.exploration_rate = j.at("exploration_rate").get<double>();
    const auto mq = j.at("mean_q_per_action").get<std::vector<double>>();
    if (mq.size() != static_cast<std::size_t>(kNumActions)) {
      fail(ErrorCode::MalformedDocument, "mean_q_per_action must hold 4 numbers");
    }
    std::copy(mq.begin(), mq.end(), m.mean_q_per_action.begin());
    m.steps_series = j.at("steps_series").get<std::vector<int>>();
    m.reward_series = j.at("reward_series").get<std::vector<double>>();
    m.reward_moving_avg = j.at("reward_moving_avg").get<std::vector<double>>();
    m.epsilon_series = j.at("epsilon_series").get<std::vector<double>>();
    return m;
  });
}

std::string encode_comparison(const ComparisonReport& report) {
  ojson j;
  j["format_version"] = kFormatVersion;
  j["config_digest"] = report.config_digest;
  j["left"] = {{"label", report.left_label}, {"metrics", codec::metrics_body(report.left)}};
  j["right"] = {{"label", report.right_label}, {"metrics", codec::metrics_body(report.right)}};
  return j.dump(2) + "\n";
}

void write_text_file(const std::filesystem::path& destination, std::string_view contents) {
  std::filesystem::path tmp = destination;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::IOFailure, "cannot open " + tmp.string() + " for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) fail(ErrorCode::IOFailure, "write to " + tmp.string() + " failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, destination, ec);
  if (ec) fail(ErrorCode::IOFailure, "cannot move " + tmp.string() + " into place: " + ec.message());
}

std::string read_text_file(const std::filesystem::path& source) {
  std::ifstream in(source, std::ios::binary);
  if (!in) fail(ErrorCode::IOFailure, "cannot read " + source.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) fail(ErrorCode::IOFailure, "read of " + source.string() + " failed");
  return buf.str();
}

QTableDocument make_qtable_document(const RunConfig& run, const QTable& q) {
  QTableDocument doc;
  doc.run_id = config_digest(run);
  doc.algorithm = run.algorithm;
  doc.hyper = run.hyper;
  doc.seed = run.seed;
  doc.q = q;
  return doc;
}

std::vector<BundleFile> encode_run_bundle(const RunConfig& run, const TrainingResult& result,
                                          int window) {
  const std::string run_id = config_digest(run);
  std::vector<BundleFile> files;
  files.push_back({std::string(bundle_file::kRunConfig), encode_run_config(run)});
  files.push_back({std::string(bundle_file::kQTable),
                   encode_qtable(make_qtable_document(run, result.qtable))});
  files.push_back({std::string(bundle_file::kEpisodes), encode_episode_log(result.episodes)});
  files.push_back({std::string(bundle_file::kTrace), encode_trace(result.trace)});
  if (!result.episodes.empty()) {
    const MetricsReport m = build_report(result, window);
    files.push_back({std::string(bundle_file::kMetrics),
                     encode_metrics(m, run_id, run.algorithm, run.seed)});
    files.push_back({std::string(bundle_file::kSeries), encode_series_csv(result.episodes, m)});
  }
  return files;
}

void write_run_bundle(const std::filesystem::path& dir, const RunConfig& run,
                      const TrainingResult& result, int window) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorCode::IOFailure, "cannot create " + dir.string() + ": " + ec.message());
  for (const auto& f : encode_run_bundle(run, result, window)) {
    write_text_file(dir / f.name, f.contents);
  }
}

RunBundle load_run_bundle(const std::filesystem::path& dir) {
  RunBundle b;
  b.config = load_run_config(dir / bundle_file::kRunConfig);
  b.run_id = config_digest(b.config);
  b.episodes = read_episode_log(dir / bundle_file::kEpisodes);
  b.trace = read_trace(dir / bundle_file::kTrace);
  b.qtable = load_qtable(dir / bundle_file::kQTable);
  if (b.qtable.run_id != b.run_id) {
    fail(ErrorCode::MalformedDocument, "Q-table run_id " + b.qtable.run_id +
                                           " does not match the run config (" + b.run_id + ")");
  }
  if (std::filesystem::exists(dir / bundle_file::kMetrics)) {
    const std::string text = read_text_file(dir / bundle_file::kMetrics);
    b.metrics = decode_metrics(text);
    const auto j = ojson::parse(text);
    if (j.value("run_id", std::string{}) != b.run_id) {
      fail(ErrorCode::MalformedDocument, "metrics run_id does not match the run config");
    }
  }
  return b;
}

}  // namespace hitl
