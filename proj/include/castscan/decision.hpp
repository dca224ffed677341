#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>

#include "castscan/labels.hpp"

namespace castscan {

/// One sampled frame as seen by the decision rule. A duplicate frame carries
/// no label.
struct FrameAnnotation {
  std::size_t index = 0;
  bool duplicate = false;
  std::optional<FrameLabel> label;

  bool informative_ide() const {
    return !duplicate && label && label->label == Label::ide;
  }
};

struct DecisionParams {
  /// Minimum length of a run of non-duplicate IDE frames.
  std::size_t min_run = 4;
  /// Minimum share of IDE frames among non-duplicate frames.
  double min_ratio = 0.5;
  double dup_threshold = 0.05;
  double interval_s = 30.0;

  void validate() const;
  friend bool operator==(const DecisionParams&, const DecisionParams&) = default;
};

struct VideoVerdict {
  std::string video_id;
  bool is_screencast = false;
  std::size_t n_ide = 0;
  std::size_t n_info = 0;
  std::size_t longest_run = 0;
  double ratio = 0.0;
  std::size_t sampled_count = 0;
};

/// Longest window of consecutive sampled frames that are all non-duplicate
/// and labeled IDE. Duplicates and non-IDE frames both end a run.
std::size_t longest_eligible_run(std::span<const FrameAnnotation> annotations);

/// IDE share of the non-duplicate frames; 0 when every frame is a duplicate.
double ide_ratio(std::span<const FrameAnnotation> annotations);

/// Positive iff longest_eligible_run >= min_run and ide_ratio >= min_ratio.
VideoVerdict decide(std::span<const FrameAnnotation> annotations,
                    const DecisionParams& params, std::string video_id = {});

}  // namespace castscan
