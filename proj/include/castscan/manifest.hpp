#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace castscan {

/// One video to scan. Stored as a JSON Lines record:
/// `{"video_id": "v1", "source": "videos/v1.mp4", "truth_label": true, "notes": ""}`.
struct ManifestEntry {
  std::string video_id;
  std::filesystem::path source;
  /// Is the video a live-coding screencast? Absent when unlabeled.
  std::optional<bool> truth_label;
  std::string notes;
};

/// Relative sources are resolved against the manifest's directory. Throws
/// ManifestError on parse errors or duplicate video ids.
std::vector<ManifestEntry> load_manifest(const std::filesystem::path& path);

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries);

}  // namespace castscan
