#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace castscan {

/// Side length every frame is normalized to before similarity and
/// classification.
inline constexpr int kFrameSide = 300;

/// Single-channel luminance raster, row-major, values in [0,1].
struct GrayFrame {
  int width = 0;
  int height = 0;
  std::vector<float> pixels;
  double timestamp_s = 0.0;
  std::size_t index = 0;
  /// File the frame was decoded from; empty for synthesized frames.
  std::filesystem::path source_path;

  float at(int row, int col) const {
    return pixels[static_cast<std::size_t>(row) * width + col];
  }
  bool valid() const;
};

/// Builds a frame of the given size with every pixel set to `value`.
GrayFrame make_uniform_frame(int width, int height, float value);

enum class SamplingKind { classification, training };

struct SamplingMode {
  SamplingKind kind = SamplingKind::classification;
  double interval_s = 30.0;
  /// Training mode only.
  std::size_t cap = 600;
  std::uint64_t seed = 0;

  static SamplingMode classification(double interval_s = 30.0) {
    return {SamplingKind::classification, interval_s, 600, 0};
  }
  static SamplingMode training(double interval_s = 1.0, std::size_t cap = 600,
                               std::uint64_t seed = 0) {
    return {SamplingKind::training, interval_s, cap, seed};
  }

  void validate() const;
};

std::string to_string(SamplingKind kind);

struct SampledSequence {
  std::string video_id;
  std::vector<GrayFrame> frames;
  SamplingMode mode;
};

/// Where frames come from: a directory of images, or a video file that an
/// external decoder command expands into images.
struct VideoSource {
  std::string video_id;
  std::filesystem::path path;
  /// Template with `{input}`, `{fps}` and `{outdir}` placeholders. Required
  /// when `path` is a regular file.
  std::string decoder_command;
  /// Decoded frames are cached under this root when set.
  std::optional<std::filesystem::path> cache_root;
};

struct AcquireStats {
  std::size_t candidate_frames = 0;
  std::size_t decoder_invocations = 0;
  bool cache_hit = false;
};

/// Timestamps 0, interval, 2*interval, ... up to and including duration.
std::vector<double> sample_schedule(double duration_s, double interval_s);

/// Decodes a PNG or JPEG file, converts to BT.601 luminance and resizes to
/// kFrameSide x kFrameSide.
GrayFrame load_frame(const std::filesystem::path& image_path);

/// Converts an 8-bit or 16-bit raster held in memory. `channels` is 1, 3
/// (BGR) or 4 (BGRA).
GrayFrame normalize_raster(std::span<const std::uint8_t> data, int width,
                           int height, int channels);

/// Writes the frame as an 8-bit grayscale PNG.
void save_frame(const GrayFrame& frame, const std::filesystem::path& path);

/// Parses `frame_<seconds>` file stems. Returns nullopt for other names.
std::optional<double> timestamp_from_filename(const std::filesystem::path& path);

/// PNG and JPEG files directly inside `dir`, sorted by name.
std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir);

/// Replaces `{input}`, `{fps}` and `{outdir}` in each whitespace-separated
/// token of the template. Quoting follows POSIX shell rules.
std::vector<std::string> expand_decoder_command(
    const std::string& command_template, const std::filesystem::path& input,
    const std::string& fps, const std::filesystem::path& outdir);

/// The `{fps}` value for a sampling interval: "1/30" for 30 s, "1" for 1 s.
std::string fps_for_interval(double interval_s);

/// Runs the decoder once, writing frames into `outdir`. Throws DecodeError
/// with the decoder's diagnostics on failure.
void run_decoder(const std::string& command_template,
                 const std::filesystem::path& input, double interval_s,
                 const std::filesystem::path& outdir);

/// Seeded uniform selection of `cap` positions out of `count`, returned in
/// increasing order. Returns all positions when count <= cap.
std::vector<std::size_t> select_capped(std::size_t count, std::size_t cap,
                                       std::uint64_t seed);

SampledSequence acquire_frames(const VideoSource& source,
                               const SamplingMode& mode,
                               AcquireStats* stats = nullptr);

}  // namespace castscan
