#pragma once

// Straightforward reference implementations used to check the library.
// They are written from the definitions, not from the library code.

#include <cmath>
#include <cstddef>
#include <random>
#include <vector>

#include "castscan/decision.hpp"
#include "castscan/frame_io.hpp"

namespace castscan::testing {

/// NRMSE straight from its definition, with the clamp and the all-black
/// reference convention.
inline double nrmse_oracle(const std::vector<double>& ref, const std::vector<double>& other) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    num += (ref[i] - other[i]) * (ref[i] - other[i]);
    den += ref[i] * ref[i];
  }
  if (den == 0.0) return num == 0.0 ? 0.0 : 1.0;
  const double v = std::sqrt(num / den);
  return v > 1.0 ? 1.0 : v;
}

inline double nrmse_oracle(const GrayFrame& ref, const GrayFrame& other) {
  return nrmse_oracle(std::vector<double>(ref.pixels.begin(), ref.pixels.end()),
                      std::vector<double>(other.pixels.begin(), other.pixels.end()));
}

/// "Starting from the kept frame, drop following frames until one differs
/// by more than the threshold; that one is kept and the scan continues."
inline std::vector<bool> mark_duplicates_oracle(const std::vector<GrayFrame>& frames,
                                                double threshold) {
  std::vector<bool> dup(frames.size(), false);
  std::size_t i = 0;
  while (i < frames.size()) {
    std::size_t j = i + 1;
    while (j < frames.size() && nrmse_oracle(frames[i], frames[j]) <= threshold) {
      dup[j] = true;
      ++j;
    }
    i = j;
  }
  return dup;
}

/// Random 8x8 (by default) frame sequences. New frames are sometimes exact
/// repeats or small perturbations of the previous one so both branches of
/// the marking loop get exercised.
inline std::vector<GrayFrame> random_sequence(std::mt19937_64& rng, std::size_t max_len = 50,
                                              int side = 8) {
  std::uniform_int_distribution<std::size_t> len_dist(1, max_len);
  std::uniform_real_distribution<float> px(0.0f, 1.0f);
  std::uniform_real_distribution<float> jitter(-0.05f, 0.05f);
  std::uniform_int_distribution<int> kind(0, 3);
  const std::size_t n = len_dist(rng);
  std::vector<GrayFrame> seq;
  for (std::size_t i = 0; i < n; ++i) {
    GrayFrame f = make_uniform_frame(side, side, 0.0f);
    const int k = seq.empty() ? 0 : kind(rng);
    for (std::size_t p = 0; p < f.pixels.size(); ++p) {
      switch (k) {
        case 1: f.pixels[p] = seq.back().pixels[p]; break;
        case 2: f.pixels[p] = std::fmin(1.0f, std::fmax(0.0f, seq.back().pixels[p] + jitter(rng))); break;
        default: f.pixels[p] = px(rng); break;
      }
    }
    f.index = i;
    seq.push_back(std::move(f));
  }
  return seq;
}

/// True when some window of at least s consecutive entries is all
/// non-duplicate IDE frames. Checks every window of every length.
inline bool has_ide_window(const std::vector<FrameAnnotation>& a, std::size_t s) {
  for (std::size_t begin = 0; begin < a.size(); ++begin) {
    for (std::size_t end = begin + s; end <= a.size(); ++end) {
      bool all = true;
      for (std::size_t k = begin; k < end; ++k) {
        if (a[k].duplicate || !a[k].label || a[k].label->label != Label::ide) all = false;
      }
      if (all) return true;
    }
  }
  return false;
}

/// IDE count and informative count, with the share test n_ide >= t * n_info
/// (never satisfied when there is no informative frame).
inline bool ide_share_at_least(const std::vector<FrameAnnotation>& a, double t) {
  std::size_t info = 0, ide = 0;
  for (const auto& x : a) {
    if (x.duplicate) continue;
    ++info;
    if (x.label && x.label->label == Label::ide) ++ide;
  }
  if (info == 0) return false;
  return static_cast<double>(ide) >= t * static_cast<double>(info);
}

inline bool decide_oracle(const std::vector<FrameAnnotation>& a, std::size_t s, double t) {
  return has_ide_window(a, s) && ide_share_at_least(a, t);
}

/// Annotation string from an alphabet code: 0 = IDE, 1 = non-IDE,
/// 2 = duplicate.
inline std::vector<FrameAnnotation> annotations_from_code(std::size_t code, std::size_t len) {
  std::vector<FrameAnnotation> out(len);
  for (std::size_t i = 0; i < len; ++i) {
    const auto sym = code % 3;
    code /= 3;
    out[i].index = i;
    if (sym == 2) {
      out[i].duplicate = true;
    } else {
      out[i].label = FrameLabel{sym == 0 ? Label::ide : Label::non_ide, 1.0};
    }
  }
  return out;
}

/// Exact expectation of precision and recall for the random baseline by
/// summing over the binomial distribution of predicted positives.
struct ExpectedMetrics {
  double precision = 0.0;
  double recall = 0.0;
};

inline ExpectedMetrics random_baseline_expectation(std::size_t positives, std::size_t negatives,
                                                   double p) {
  auto binom = [](std::size_t n, std::size_t k, double q) {
    return std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0)) *
           std::pow(q, static_cast<double>(k)) * std::pow(1.0 - q, static_cast<double>(n - k));
  };
  ExpectedMetrics e;
  for (std::size_t tp = 0; tp <= positives; ++tp) {
    for (std::size_t fp = 0; fp <= negatives; ++fp) {
      const double w = binom(positives, tp, p) * binom(negatives, fp, p);
      if (tp + fp > 0) e.precision += w * static_cast<double>(tp) / static_cast<double>(tp + fp);
      if (positives > 0) e.recall += w * static_cast<double>(tp) / static_cast<double>(positives);
    }
  }
  return e;
}

}  // namespace castscan::testing
