#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace castscan {

struct ConfusionCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;

  std::size_t total() const { return tp + fp + fn + tn; }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

/// Precision/recall/F1 for one method. Averaged reports (random baseline)
/// have no single confusion matrix and leave `counts` empty.
struct EvalReport {
  std::string method;
  std::optional<ConfusionCounts> counts;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t runs = 1;
};

/// Per-video truth or prediction, keyed by video id.
using Outcomes = std::map<std::string, bool>;

/// Both maps must cover the same ids; throws ParameterError otherwise.
ConfusionCounts confusion(const Outcomes& predictions, const Outcomes& truth);

/// Undefined ratios (0/0) are reported as 0.
EvalReport metrics(const ConfusionCounts& counts, std::string method = {});

EvalReport all_positive_baseline(const Outcomes& truth);

/// Each video is predicted positive with probability `p`, independently;
/// metrics are averaged over `runs` runs. Run k draws from a generator
/// seeded with (seed, k), so the result only depends on the arguments.
EvalReport random_baseline(const Outcomes& truth, double p = 0.5, std::size_t runs = 20,
                           std::uint64_t seed = 0);

/// (tool / baseline - 1) * 100 for each metric; nullopt where the baseline
/// metric is zero.
struct Improvement {
  std::string baseline;
  std::optional<double> recall_pct;
  std::optional<double> precision_pct;
  std::optional<double> f1_pct;
};

Improvement improvement(const EvalReport& tool, const EvalReport& baseline);

/// Reference figures for a method, used to flag where recomputed metrics
/// disagree with them.
struct ReferenceRow {
  std::string method;
  double recall = 0.0;
  double precision = 0.0;
  double f1 = 0.0;
  double tolerance = 0.005;
};

/// Human-readable notes, one per metric outside tolerance. Empty when the
/// report agrees with the reference.
std::vector<std::string> divergences(const EvalReport& report, const ReferenceRow& reference);

/// Reads `{"rows": [{"method", "recall", "precision", "f1", "tolerance"?}]}`.
std::vector<ReferenceRow> load_reference_table(const std::filesystem::path& path);

nlohmann::json to_json(const EvalReport& report);
nlohmann::json to_json(const Improvement& imp);

/// Fixed-width table: method, TP/FP/FN/TN, recall, precision, F1.
std::string format_table(const std::vector<EvalReport>& reports);

}  // namespace castscan
