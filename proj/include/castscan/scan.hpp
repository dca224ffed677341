#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "castscan/classifier.hpp"
#include "castscan/config.hpp"
#include "castscan/decision.hpp"
#include "castscan/eval.hpp"
#include "castscan/manifest.hpp"

namespace castscan {

/// Wall-clock seconds per pipeline stage.
struct StageTiming {
  double acquire_s = 0.0;
  double dedup_s = 0.0;
  double classify_s = 0.0;
  double decide_s = 0.0;
  double total_s = 0.0;
};

struct FrameRecord {
  std::size_t index = 0;
  double timestamp_s = 0.0;
  bool duplicate = false;
  std::optional<std::size_t> reference_index;
  double nrmse = 0.0;
  std::optional<FrameLabel> label;
};

struct ScanRecord {
  std::string video_id;
  bool ok = false;
  std::string error;
  VideoVerdict verdict;
  std::vector<FrameRecord> frames;
  std::string classifier;
  DecisionParams params;
  StageTiming timing;
  /// Frames actually sent to the classifier; equals verdict.n_info.
  std::size_t classified_count = 0;
  std::size_t candidate_frames = 0;
  bool cache_hit = false;
};

struct ScanReport {
  nlohmann::json config;
  std::string config_hash;
  std::vector<ScanRecord> records;
  double total_s = 0.0;

  bool all_ok() const;
  std::size_t failed_count() const;
};

using ClassifierFactory = std::function<std::unique_ptr<FrameClassifier>()>;

/// Sample, mark duplicates, classify the informative frames and decide one
/// video. Errors are caught and recorded; the returned record says whether
/// the video succeeded.
ScanRecord scan_video(const ManifestEntry& entry, const ScanConfig& config,
                      FrameClassifier& classifier);

/// Scans every manifest entry with a bounded pool of config.effective_jobs()
/// threads, each with its own classifier from `factory` (defaults to
/// make_classifier(config.classifier)). Records keep manifest order.
ScanReport run_scan(const std::vector<ManifestEntry>& manifest, const ScanConfig& config,
                    ClassifierFactory factory = {});

nlohmann::json to_json(const ScanRecord& record);
ScanRecord scan_record_from_json(const nlohmann::json& j);

/// JSON Lines: a header record, one record per video, a summary record.
void write_scan_report(const ScanReport& report, std::ostream& out);

/// Writes `scan-<UTC timestamp>-<config hash>.jsonl` under `out_dir`, never
/// overwriting an existing report. Returns the new file's path.
std::filesystem::path write_scan_report_file(const ScanReport& report,
                                             const std::filesystem::path& out_dir);

ScanReport read_scan_report(const std::filesystem::path& path);

/// The report with every "timing" member removed; used to compare runs.
std::string report_without_timing(const ScanReport& report);

// --- evaluation -----------------------------------------------------------

inline constexpr const char* kToolMethodName = "castscan";

struct EvaluationResult {
  /// Absent when only baselines were computed.
  std::optional<EvalReport> tool;
  EvalReport random;
  EvalReport all_positive;
  std::optional<Improvement> vs_random;
  std::optional<Improvement> vs_all_positive;
  /// Videos whose scan failed; they are left out of every row.
  std::vector<std::string> skipped;
  /// Disagreements with the reference table, if one was given.
  std::vector<std::string> divergences;
};

/// Scores the scan against the manifest's truth labels next to both
/// baselines. Throws ParameterError listing ids that lack a truth label or
/// a manifest entry.
EvaluationResult run_evaluate(const ScanReport& scan, const std::vector<ManifestEntry>& manifest,
                              std::size_t random_runs = 20, std::uint64_t seed = 0,
                              const std::vector<ReferenceRow>* reference = nullptr);

/// Baselines only, from truth labels.
EvaluationResult run_baselines(const Outcomes& truth, std::size_t random_runs,
                               std::uint64_t seed,
                               const std::vector<ReferenceRow>* reference = nullptr);

void write_evaluation(const EvaluationResult& result, std::ostream& out);

/// Table plus improvement percentages and divergence notes.
std::string format_evaluation(const EvaluationResult& result);

}  // namespace castscan
