#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "castscan/classifier.hpp"
#include "castscan/decision.hpp"
#include "castscan/frame_io.hpp"

namespace castscan {

inline constexpr const char* kDefaultDecoderCommand =
    "ffmpeg -nostdin -loglevel error -i {input} -vf fps={fps} {outdir}/frame_%06d.png";

/// Everything a scan depends on. Serialized as one flat JSON object:
///
///   interval_s, dup_threshold, min_run, min_ratio, classifier,
///   classifier_timeout_s, classifier_batch_size, seed, jobs, cap,
///   decoder, cache_dir, random_runs
struct ScanConfig {
  DecisionParams params;
  ClassifierSpec classifier;
  std::uint64_t seed = 0;
  /// Parallel videos; 0 means one per logical CPU.
  unsigned jobs = 0;
  /// Training-mode frame cap.
  std::size_t cap = 600;
  std::string decoder_command = kDefaultDecoderCommand;
  std::optional<std::filesystem::path> cache_dir;
  std::size_t random_runs = 20;

  SamplingMode classification_mode() const {
    return SamplingMode::classification(params.interval_s);
  }
  unsigned effective_jobs() const;
  void validate() const;
};

/// Overlays the keys present in `flat` onto `config`. Unknown keys are an
/// error so typos don't silently fall back to defaults.
void apply_config(ScanConfig& config, const nlohmann::json& flat);

ScanConfig load_config(const std::filesystem::path& path);

nlohmann::json to_json(const ScanConfig& config);

/// Short stable digest of the serialized configuration.
std::string config_hash(const ScanConfig& config);

}  // namespace castscan
