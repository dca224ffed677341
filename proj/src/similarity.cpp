#include "castscan/similarity.hpp"

#include <algorithm>
#include <cmath>

#include "castscan/errors.hpp"

namespace castscan {

namespace detail {

double nrmse_from_sums(double diff_energy, double ref_energy) {
  if (ref_energy == 0.0) {
    // Black reference: nothing to normalize by.
    return diff_energy == 0.0 ? 0.0 : 1.0;
  }
  return std::min(1.0, std::sqrt(diff_energy / ref_energy));
}

}  // namespace detail

double nrmse(const GrayFrame& reference, const GrayFrame& other) {
  if (reference.width != other.width || reference.height != other.height) {
    throw ParameterError("nrmse: frame dimensions differ (" +
                         std::to_string(reference.width) + "x" + std::to_string(reference.height) +
                         " vs " + std::to_string(other.width) + "x" +
                         std::to_string(other.height) + ")");
  }
  return nrmse(std::span<const float>(reference.pixels), std::span<const float>(other.pixels));
}

std::size_t DuplicateMarking::informative_count() const {
  return static_cast<std::size_t>(std::count(duplicate.begin(), duplicate.end(), false));
}

DuplicateMarking mark_duplicates(std::span<const GrayFrame> frames, double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw ParameterError("duplicate threshold must be in [0,1]");
  }
  if (frames.empty()) throw ParameterError("cannot mark duplicates in an empty sequence");

  DuplicateMarking out;
  out.duplicate.assign(frames.size(), false);
  out.reference_index.assign(frames.size(), std::nullopt);
  out.score.assign(frames.size(), 0.0);

  std::size_t reference = 0;
  for (std::size_t i = 1; i < frames.size(); ++i) {
    const double score = nrmse(frames[reference], frames[i]);
    out.reference_index[i] = reference;
    out.score[i] = score;
    if (score <= threshold) {
      out.duplicate[i] = true;
    } else {
      reference = i;
    }
  }
  return out;
}

DuplicateMarking mark_duplicates(const SampledSequence& seq, double threshold) {
  return mark_duplicates(std::span<const GrayFrame>(seq.frames), threshold);
}

}  // namespace castscan
