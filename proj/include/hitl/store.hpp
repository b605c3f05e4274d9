#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hitl/metrics.hpp"
#include "hitl/qcore.hpp"
#include "hitl/trainer.hpp"

namespace hitl {

inline constexpr int kFormatVersion = 1;

// File names inside a run directory.
namespace bundle_file {
inline constexpr std::string_view kRunConfig = "run_config.json";
inline constexpr std::string_view kQTable = "qtable.json";
inline constexpr std::string_view kEpisodes = "episodes.csv";
inline constexpr std::string_view kTrace = "trace.ndjson";
inline constexpr std::string_view kMetrics = "metrics.json";
inline constexpr std::string_view kSeries = "metrics_series.csv";
inline constexpr std::string_view kComparison = "comparison.json";
}  // namespace bundle_file

struct QTableDocument {
  int format_version = kFormatVersion;
  std::string run_id;
  Algorithm algorithm = Algorithm::InteractiveQ;
  HyperParams hyper;
  std::uint64_t seed = 0;
  QTable q;

  int grid_size() const noexcept { return q.grid_size(); }

  friend bool operator==(const QTableDocument&, const QTableDocument&) = default;
};

// Stable 16-hex-digit FNV-1a digest of the canonical config document.
std::string config_digest(const RunConfig& run);

std::string encode_run_config(const RunConfig& run);
// Absent fields take the per-algorithm defaults; a max_steps given on only one
// of grid/hyper is mirrored to the other. Throws MalformedDocument,
// VersionMismatch or InvalidConfig.
RunConfig decode_run_config(std::string_view text);
void save_run_config(const RunConfig& run, const std::filesystem::path& destination);
RunConfig load_run_config(const std::filesystem::path& source);

std::string encode_qtable(const QTableDocument& doc);
QTableDocument decode_qtable(std::string_view text);
void save_qtable(const QTableDocument& doc, const std::filesystem::path& destination);
QTableDocument load_qtable(const std::filesystem::path& source);

std::string encode_episode_log(const std::vector<EpisodeRecord>& records);
std::vector<EpisodeRecord> decode_episode_log(std::string_view text);
void write_episode_log(const std::vector<EpisodeRecord>& records,
                       const std::filesystem::path& destination);
std::vector<EpisodeRecord> read_episode_log(const std::filesystem::path& source);

// Plot-ready columns: episode,steps,total_reward,moving_avg,epsilon,explored_steps.
std::string encode_series_csv(const std::vector<EpisodeRecord>& records, const MetricsReport& m);

std::string encode_metrics(const MetricsReport& m, std::string_view run_id, Algorithm algorithm,
                           std::uint64_t seed);
MetricsReport decode_metrics(std::string_view text);

std::string encode_comparison(const ComparisonReport& report);

// Writes via a sibling temp file and rename. Throws IOFailure.
void write_text_file(const std::filesystem::path& destination, std::string_view contents);
std::string read_text_file(const std::filesystem::path& source);

struct RunBundle {
  RunConfig config;
  std::string run_id;
  std::vector<EpisodeRecord> episodes;
  std::vector<FeedbackTraceEntry> trace;
  QTableDocument qtable;
  std::optional<MetricsReport> metrics;  // absent when no episode finished
};

QTableDocument make_qtable_document(const RunConfig& run, const QTable& q);

struct BundleFile {
  std::string name;
  std::string contents;
};

// Every artifact of a run, in the exact bytes write_run_bundle puts on disk.
// Metrics files are omitted when no episode finished.
std::vector<BundleFile> encode_run_bundle(const RunConfig& run, const TrainingResult& result,
                                          int window = kDefaultRewardWindow);

// Writes every artifact of a run into `dir` (created if needed).
void write_run_bundle(const std::filesystem::path& dir, const RunConfig& run,
                      const TrainingResult& result, int window = kDefaultRewardWindow);
RunBundle load_run_bundle(const std::filesystem::path& dir);

}  // namespace hitl
