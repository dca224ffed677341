#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "castscan/frame_io.hpp"
#include "castscan/labels.hpp"

namespace castscan {

enum class ClassifierKind { worker, sidecar, marker_oracle, constant };

std::string_view to_string(ClassifierKind kind);

struct ClassifierSpec {
  ClassifierKind kind = ClassifierKind::marker_oracle;
  /// worker: command line of the worker process.
  std::string command;
  /// sidecar: JSON Lines label table.
  std::filesystem::path sidecar_path;
  /// constant: the label every frame gets.
  FrameLabel constant_label{Label::ide, 1.0};
  double timeout_s = 30.0;
  std::size_t batch_size = 8;

  /// Parses the command-line form `kind[:arg]`, e.g. `constant:ide`,
  /// `marker_oracle`, `sidecar:labels.jsonl`, `worker:python3 serve.py`.
  static ClassifierSpec parse(std::string_view text);

  /// Inverse of parse.
  std::string describe() const;

  void validate() const;
};

using FrameView = std::reference_wrapper<const GrayFrame>;

/// Frame-level IDE / non-IDE classification boundary.
class FrameClassifier {
 public:
  virtual ~FrameClassifier() = default;

  virtual ClassifierKind kind() const = 0;

  /// One label per frame, in input order. Throws ParameterError on an empty
  /// batch; any per-frame failure fails the whole batch.
  std::vector<FrameLabel> classify_batch(std::string_view video_id,
                                         std::span<const FrameView> frames);
  std::vector<FrameLabel> classify_batch(std::string_view video_id,
                                         std::span<const GrayFrame> frames);

  FrameLabel classify(std::string_view video_id, const GrayFrame& frame);

  /// Classifies an image file. The default implementation decodes it first.
  virtual FrameLabel classify_path(std::string_view video_id,
                                   const std::filesystem::path& frame_path,
                                   std::size_t index = 0);

 protected:
  virtual std::vector<FrameLabel> classify_frames(std::string_view video_id,
                                                  std::span<const FrameView> frames) = 0;
};

class ConstantClassifier final : public FrameClassifier {
 public:
  explicit ConstantClassifier(FrameLabel label) : label_(label) {}
  ClassifierKind kind() const override { return ClassifierKind::constant; }

 protected:
  std::vector<FrameLabel> classify_frames(std::string_view,
                                          std::span<const FrameView> frames) override {
    return std::vector<FrameLabel>(frames.size(), label_);
  }

 private:
  FrameLabel label_;
};

/// Synthetic ground truth: a frame is IDE iff the mean luminance of its
/// top-left 8x8 block exceeds 0.9.
class MarkerOracleClassifier final : public FrameClassifier {
 public:
  static constexpr int kBlock = 8;
  static constexpr double kThreshold = 0.9;

  ClassifierKind kind() const override { return ClassifierKind::marker_oracle; }
  static double marker_mean(const GrayFrame& frame);
  static Label label_for(const GrayFrame& frame);

 protected:
  std::vector<FrameLabel> classify_frames(std::string_view,
                                          std::span<const FrameView> frames) override;
};

/// Replays labels recorded in a JSON Lines table. Each record is
/// `{"video_id": ..., "index": n, "label": "ide"|"non_ide", "confidence": c}`
/// where video_id and confidence are optional; records without a video_id
/// apply to every video.
class SidecarClassifier final : public FrameClassifier {
 public:
  explicit SidecarClassifier(const std::filesystem::path& table_path);
  ClassifierKind kind() const override { return ClassifierKind::sidecar; }

  FrameLabel lookup(std::string_view video_id, std::size_t index) const;

 protected:
  std::vector<FrameLabel> classify_frames(std::string_view video_id,
                                          std::span<const FrameView> frames) override;

 private:
  std::map<std::pair<std::string, std::size_t>, FrameLabel, std::less<>> table_;
};

std::unique_ptr<FrameClassifier> make_classifier(const ClassifierSpec& spec);

}  // namespace castscan
