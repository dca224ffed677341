#pragma once

#include <concepts>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "castscan/errors.hpp"
#include "castscan/frame_io.hpp"

namespace castscan {

inline constexpr double kDefaultDuplicateThreshold = 0.05;

namespace detail {
double nrmse_from_sums(double diff_energy, double ref_energy);
}

/// Normalized root-mean-square error of `other` against `reference`:
///
///   sqrt( sum (ref - other)^2 / sum ref^2 )
///
/// clamped to [0,1]. An all-zero reference gives 0 when `other` is also all
/// zero and 1 otherwise. Throws ParameterError on a size mismatch.
template <std::floating_point T>
double nrmse(std::span<const T> reference, std::span<const T> other);

/// Same as above on frames; dimensions must match.
double nrmse(const GrayFrame& reference, const GrayFrame& other);

/// Result of the duplicate-marking scan. `reference_index[i]` is the kept
/// frame that frame i was compared with (nullopt for frame 0), and
/// `score[i]` the dissimilarity against it.
struct DuplicateMarking {
  std::vector<bool> duplicate;
  std::vector<std::optional<std::size_t>> reference_index;
  std::vector<double> score;

  std::size_t informative_count() const;
};

/// Sequential scan: frame 0 is the reference; a later frame whose NRMSE
/// against the current reference is <= threshold is a duplicate, otherwise
/// it becomes the new reference.
DuplicateMarking mark_duplicates(std::span<const GrayFrame> frames, double threshold);
DuplicateMarking mark_duplicates(const SampledSequence& seq, double threshold);

// ---------------------------------------------------------------------------

template <std::floating_point T>
double nrmse(std::span<const T> reference, std::span<const T> other) {
  if (reference.size() != other.size()) {
    throw ParameterError("nrmse: frames differ in size");
  }
  double diff_energy = 0.0;
  double ref_energy = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    const double r = reference[i];
    const double d = r - static_cast<double>(other[i]);
    diff_energy += d * d;
    ref_energy += r * r;
  }
  return detail::nrmse_from_sums(diff_energy, ref_energy);
}

}  // namespace castscan
