#pragma once

#include <string>
#include <string_view>

namespace castscan {

enum class Label { ide, non_ide };

/// Per-frame classifier output. Deterministic classifiers report 1.0.
struct FrameLabel {
  Label label = Label::non_ide;
  double confidence = 1.0;

  friend bool operator==(const FrameLabel&, const FrameLabel&) = default;
};

/// Wire spelling: "ide" / "non_ide".
std::string_view to_string(Label label);

/// Accepts the wire spelling, case-insensitively, plus "IDE"/"NON_IDE".
/// Throws ParameterError otherwise.
Label parse_label(std::string_view text);

}  // namespace castscan
