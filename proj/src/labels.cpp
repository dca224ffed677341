#include "castscan/labels.hpp"

#include <algorithm>
#include <cctype>
#include <string>

#include "castscan/errors.hpp"

namespace castscan {

std::string_view to_string(Label label) {
  return label == Label::ide ? "ide" : "non_ide";
}

Label parse_label(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "ide") return Label::ide;
  if (lower == "non_ide" || lower == "non-ide") return Label::non_ide;
  throw ParameterError("unknown frame label '" + std::string(text) + "'");
}

}  // namespace castscan
