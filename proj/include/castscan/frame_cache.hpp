#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "castscan/frame_io.hpp"

namespace castscan {

/// Directory under the system temp dir, removed with its contents on
/// destruction.
class TempDir {
 public:
  explicit TempDir(std::string_view prefix);
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  ~TempDir();

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

/// Lowercase hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);
std::string sha256_hex(std::string_view data);

/// Decoded frames of video files, keyed by (content hash, sampling kind,
/// interval). Entries carry an index with file sizes; an entry whose files
/// no longer match is discarded and decoded again.
class FrameCache {
 public:
  struct Entry {
    std::filesystem::path dir;
    std::vector<std::filesystem::path> frames;
    bool hit = false;
  };

  /// Creates the root if needed. Throws EnvironmentError when it is not
  /// writable.
  explicit FrameCache(std::filesystem::path root);

  std::string key_for(const std::filesystem::path& video, const SamplingMode& mode) const;

  Entry materialize(const std::filesystem::path& video, const SamplingMode& mode,
                    const std::string& decoder_command);

  const std::filesystem::path& root() const { return root_; }

 private:
  std::filesystem::path root_;
};

}  // namespace castscan
