#include "castscan/decision.hpp"

#include <algorithm>
#include <cmath>

#include "castscan/errors.hpp"

namespace castscan {

void DecisionParams::validate() const {
  if (min_run < 1) throw ParameterError("min_run must be at least 1");
  if (!(min_ratio >= 0.0 && min_ratio <= 1.0)) throw ParameterError("min_ratio must be in [0,1]");
  if (!(dup_threshold >= 0.0 && dup_threshold <= 1.0)) {
    throw ParameterError("dup_threshold must be in [0,1]");
  }
  if (!(interval_s > 0.0) || !std::isfinite(interval_s)) {
    throw ParameterError("interval_s must be positive");
  }
}

std::size_t longest_eligible_run(std::span<const FrameAnnotation> annotations) {
  std::size_t best = 0;
  std::size_t current = 0;
  for (const auto& a : annotations) {
    current = a.informative_ide() ? current + 1 : 0;
    best = std::max(best, current);
  }
  return best;
}

double ide_ratio(std::span<const FrameAnnotation> annotations) {
  std::size_t info = 0;
  std::size_t ide = 0;
  for (const auto& a : annotations) {
    if (a.duplicate) continue;
    ++info;
    if (a.informative_ide()) ++ide;
  }
  return info == 0 ? 0.0 : static_cast<double>(ide) / static_cast<double>(info);
}

VideoVerdict decide(std::span<const FrameAnnotation> annotations, const DecisionParams& params,
                    std::string video_id) {
  params.validate();
  VideoVerdict v;
  v.video_id = std::move(video_id);
  v.sampled_count = annotations.size();
  for (const auto& a : annotations) {
    if (a.duplicate) continue;
    ++v.n_info;
    if (a.informative_ide()) ++v.n_ide;
  }
  v.ratio = v.n_info == 0 ? 0.0 : static_cast<double>(v.n_ide) / static_cast<double>(v.n_info);
  v.longest_run = longest_eligible_run(annotations);
  v.is_screencast = v.longest_run >= params.min_run && v.ratio >= params.min_ratio;
  return v;
}

}  // namespace castscan
