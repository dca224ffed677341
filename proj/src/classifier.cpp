#include "castscan/classifier.hpp"

#include <algorithm>
#include <fstream>
#include <nlohmann/json.hpp>

#include "castscan/errors.hpp"
#include "castscan/worker.hpp"

using nlohmann::json;

namespace castscan {

std::string_view to_string(ClassifierKind kind) {
  switch (kind) {
    case ClassifierKind::worker: return "worker";
    case ClassifierKind::sidecar: return "sidecar";
    case ClassifierKind::marker_oracle: return "marker_oracle";
    case ClassifierKind::constant: return "constant";
  }
  return "unknown";
}

ClassifierSpec ClassifierSpec::parse(std::string_view text) {
  const auto colon = text.find(':');
  const std::string_view kind = text.substr(0, colon);
  const std::string_view arg =
      colon == std::string_view::npos ? std::string_view{} : text.substr(colon + 1);

  ClassifierSpec spec;
  if (kind == "worker") {
    spec.kind = ClassifierKind::worker;
    spec.command = std::string(arg);
  } else if (kind == "sidecar") {
    spec.kind = ClassifierKind::sidecar;
    spec.sidecar_path = std::string(arg);
  } else if (kind == "marker_oracle" || kind == "marker") {
    spec.kind = ClassifierKind::marker_oracle;
  } else if (kind == "constant") {
    spec.kind = ClassifierKind::constant;
    spec.constant_label = {parse_label(arg.empty() ? "ide" : arg), 1.0};
  } else {
    throw ParameterError("unknown classifier kind '" + std::string(kind) + "'");
  }
  spec.validate();
  return spec;
}

std::string ClassifierSpec::describe() const {
  switch (kind) {
    case ClassifierKind::worker: return "worker:" + command;
    case ClassifierKind::sidecar: return "sidecar:" + sidecar_path.string();
    case ClassifierKind::marker_oracle: return "marker_oracle";
    case ClassifierKind::constant: return "constant:" + std::string(to_string(constant_label.label));
  }
  return {};
}

void ClassifierSpec::validate() const {
  if (kind == ClassifierKind::worker && command.empty()) {
    throw ParameterError("worker classifier needs a command");
  }
  if (kind == ClassifierKind::sidecar && sidecar_path.empty()) {
    throw ParameterError("sidecar classifier needs a label table path");
  }
  if (!(timeout_s > 0.0)) throw ParameterError("classifier timeout must be positive");
  if (batch_size < 1) throw ParameterError("classifier batch size must be at least 1");
  if (!(constant_label.confidence >= 0.0 && constant_label.confidence <= 1.0)) {
    throw ParameterError("confidence must be in [0,1]");
  }
}

std::vector<FrameLabel> FrameClassifier::classify_batch(std::string_view video_id,
                                                        std::span<const FrameView> frames) {
  if (frames.empty()) throw ParameterError("classify_batch called with no frames");
  auto labels = classify_frames(video_id, frames);
  if (labels.size() != frames.size()) {
    throw ClassifyError("classifier returned " + std::to_string(labels.size()) +
                        " labels for " + std::to_string(frames.size()) + " frames");
  }
  return labels;
}

std::vector<FrameLabel> FrameClassifier::classify_batch(std::string_view video_id,
                                                        std::span<const GrayFrame> frames) {
  std::vector<FrameView> views(frames.begin(), frames.end());
  return classify_batch(video_id, std::span<const FrameView>(views));
}

FrameLabel FrameClassifier::classify(std::string_view video_id, const GrayFrame& frame) {
  const FrameView view(frame);
  return classify_batch(video_id, std::span<const FrameView>(&view, 1)).front();
}

FrameLabel FrameClassifier::classify_path(std::string_view video_id,
                                          const std::filesystem::path& frame_path,
                                          std::size_t index) {
  GrayFrame frame = load_frame(frame_path);
  frame.index = index;
  return classify(video_id, frame);
}

double MarkerOracleClassifier::marker_mean(const GrayFrame& frame) {
  const int rows = std::min(kBlock, frame.height);
  const int cols = std::min(kBlock, frame.width);
  if (rows <= 0 || cols <= 0) return 0.0;
  double sum = 0.0;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) sum += frame.at(r, c);
  }
  return sum / (rows * cols);
}

Label MarkerOracleClassifier::label_for(const GrayFrame& frame) {
  return marker_mean(frame) > kThreshold ? Label::ide : Label::non_ide;
}

std::vector<FrameLabel> MarkerOracleClassifier::classify_frames(std::string_view,
                                                                std::span<const FrameView> frames) {
  std::vector<FrameLabel> out;
  out.reserve(frames.size());
  for (const GrayFrame& f : frames) out.push_back({label_for(f), 1.0});
  return out;
}

SidecarClassifier::SidecarClassifier(const std::filesystem::path& table_path) {
  std::ifstream in(table_path);
  if (!in) throw LookupError("cannot open sidecar label table " + table_path.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json rec = json::parse(line);
      FrameLabel label{parse_label(rec.at("label").get<std::string>()),
                       rec.value("confidence", 1.0)};
      if (!(label.confidence >= 0.0 && label.confidence <= 1.0)) {
        throw ParameterError("confidence outside [0,1]");
      }
      table_[{rec.value("video_id", std::string{}), rec.at("index").get<std::size_t>()}] = label;
    } catch (const std::exception& e) {
      throw ParameterError(table_path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

FrameLabel SidecarClassifier::lookup(std::string_view video_id, std::size_t index) const {
  if (auto it = table_.find(std::pair{std::string(video_id), index}); it != table_.end()) {
    return it->second;
  }
  if (auto it = table_.find(std::pair{std::string{}, index}); it != table_.end()) {
    return it->second;
  }
  throw LookupError("sidecar has no label for video '" + std::string(video_id) + "' frame " +
                    std::to_string(index));
}

std::vector<FrameLabel> SidecarClassifier::classify_frames(std::string_view video_id,
                                                           std::span<const FrameView> frames) {
  std::vector<FrameLabel> out;
  out.reserve(frames.size());
  for (const GrayFrame& f : frames) out.push_back(lookup(video_id, f.index));
  return out;
}

std::unique_ptr<FrameClassifier> make_classifier(const ClassifierSpec& spec) {
  spec.validate();
  switch (spec.kind) {
    case ClassifierKind::constant: return std::make_unique<ConstantClassifier>(spec.constant_label);
    case ClassifierKind::marker_oracle: return std::make_unique<MarkerOracleClassifier>();
    case ClassifierKind::sidecar: return std::make_unique<SidecarClassifier>(spec.sidecar_path);
    case ClassifierKind::worker: return std::make_unique<WorkerClassifier>(spec);
  }
  throw ParameterError("unknown classifier kind");
}

}  // namespace castscan
