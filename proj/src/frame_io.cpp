#include "castscan/frame_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>
#include <random>
#include <regex>
#include <thread>

#include "castscan/errors.hpp"
#include "castscan/frame_cache.hpp"
#include "castscan/subprocess.hpp"

namespace fs = std::filesystem;

namespace castscan {

bool GrayFrame::valid() const {
  if (width <= 0 || height <= 0) return false;
  if (pixels.size() != static_cast<std::size_t>(width) * height) return false;
  return std::all_of(pixels.begin(), pixels.end(),
                     [](float v) { return v >= 0.0f && v <= 1.0f; });
}

GrayFrame make_uniform_frame(int width, int height, float value) {
  if (width <= 0 || height <= 0) throw ParameterError("frame size must be positive");
  GrayFrame frame;
  frame.width = width;
  frame.height = height;
  frame.pixels.assign(static_cast<std::size_t>(width) * height, value);
  return frame;
}

void SamplingMode::validate() const {
  if (!(interval_s > 0.0) || !std::isfinite(interval_s)) {
    throw ParameterError("sampling interval must be positive");
  }
  if (kind == SamplingKind::training && cap == 0) {
    throw ParameterError("training cap must be positive");
  }
}

std::string to_string(SamplingKind kind) {
  return kind == SamplingKind::training ? "training" : "classification";
}

std::vector<double> sample_schedule(double duration_s, double interval_s) {
  if (!(interval_s > 0.0) || !std::isfinite(interval_s)) {
    throw ParameterError("sampling interval must be positive");
  }
  if (!(duration_s >= 0.0) || !std::isfinite(duration_s)) {
    throw ParameterError("duration must be non-negative");
  }
  // Multiply rather than accumulate so 0.1 s intervals don't drift.
  const auto steps = static_cast<std::size_t>(std::floor(duration_s / interval_s + 1e-9));
  std::vector<double> out;
  out.reserve(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k) out.push_back(static_cast<double>(k) * interval_s);
  return out;
}

namespace {

GrayFrame from_mat(const cv::Mat& image) {
  double scale = 1.0;
  switch (image.depth()) {
    case CV_8U: scale = 1.0 / 255.0; break;
    case CV_16U: scale = 1.0 / 65535.0; break;
    case CV_32F: scale = 1.0; break;
    default: throw DecodeError("unsupported pixel depth");
  }
  cv::Mat as_float;
  image.convertTo(as_float, CV_32F, scale);

  cv::Mat gray;
  switch (as_float.channels()) {
    case 1: gray = as_float; break;
    case 3: cv::cvtColor(as_float, gray, cv::COLOR_BGR2GRAY); break;
    case 4: cv::cvtColor(as_float, gray, cv::COLOR_BGRA2GRAY); break;
    default: throw DecodeError("unsupported channel count");
  }

  cv::Mat sized;
  if (gray.cols == kFrameSide && gray.rows == kFrameSide) {
    sized = gray;
  } else {
    cv::resize(gray, sized, cv::Size(kFrameSide, kFrameSide), 0, 0, cv::INTER_AREA);
  }

  GrayFrame frame;
  frame.width = sized.cols;
  frame.height = sized.rows;
  frame.pixels.resize(static_cast<std::size_t>(frame.width) * frame.height);
  for (int r = 0; r < sized.rows; ++r) {
    const float* row = sized.ptr<float>(r);
    std::transform(row, row + sized.cols,
                   frame.pixels.begin() + static_cast<std::ptrdiff_t>(r) * sized.cols,
                   [](float v) { return std::clamp(v, 0.0f, 1.0f); });
  }
  return frame;
}

bool has_image_signature(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  unsigned char head[8] = {};
  in.read(reinterpret_cast<char*>(head), sizeof head);
  const auto got = in.gcount();
  static constexpr unsigned char png[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  if (got == 8 && std::equal(head, head + 8, png)) return true;
  return got >= 3 && head[0] == 0xff && head[1] == 0xd8 && head[2] == 0xff;
}

bool is_image_extension(const fs::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

}  // namespace

GrayFrame load_frame(const fs::path& image_path) {
  std::error_code ec;
  if (!fs::is_regular_file(image_path, ec)) {
    throw DecodeError("cannot read image " + image_path.string() + ": no such file");
  }
  if (!has_image_signature(image_path)) {
    throw DecodeError("cannot decode " + image_path.string() + ": not a PNG or JPEG file");
  }
  cv::Mat image = cv::imread(image_path.string(), cv::IMREAD_UNCHANGED);
  if (image.empty()) {
    throw DecodeError("cannot decode " + image_path.string());
  }
  GrayFrame frame = from_mat(image);
  frame.source_path = image_path;
  return frame;
}

GrayFrame normalize_raster(std::span<const std::uint8_t> data, int width,
                           int height, int channels) {
  if (width <= 0 || height <= 0) throw ParameterError("raster size must be positive");
  if (channels != 1 && channels != 3 && channels != 4) {
    throw ParameterError("raster must have 1, 3 or 4 channels");
  }
  if (data.size() != static_cast<std::size_t>(width) * height * channels) {
    throw ParameterError("raster buffer size does not match dimensions");
  }
  cv::Mat view(height, width, CV_8UC(channels), const_cast<std::uint8_t*>(data.data()));
  return from_mat(view);
}

void save_frame(const GrayFrame& frame, const fs::path& path) {
  if (frame.pixels.size() != static_cast<std::size_t>(frame.width) * frame.height) {
    throw ParameterError("frame pixel count does not match its dimensions");
  }
  cv::Mat image(frame.height, frame.width, CV_8UC1);
  for (int r = 0; r < frame.height; ++r) {
    auto* row = image.ptr<std::uint8_t>(r);
    for (int c = 0; c < frame.width; ++c) {
      row[c] = static_cast<std::uint8_t>(std::lround(std::clamp(frame.at(r, c), 0.0f, 1.0f) * 255.0f));
    }
  }
  if (!cv::imwrite(path.string(), image)) {
    throw EnvironmentError("cannot write " + path.string());
  }
}

std::optional<double> timestamp_from_filename(const fs::path& path) {
  static const std::regex pattern(R"(^frame_(\d+(?:\.\d+)?)$)");
  std::smatch m;
  const std::string stem = path.stem().string();
  if (!std::regex_match(stem, m, pattern)) return std::nullopt;
  return std::stod(m[1].str());
}

std::vector<fs::path> list_images(const fs::path& dir) {
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && is_image_extension(entry.path())) {
      out.push_back(entry.path());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::string> expand_decoder_command(const std::string& command_template,
                                                const fs::path& input,
                                                const std::string& fps,
                                                const fs::path& outdir) {
  auto argv = split_command_line(command_template);
  if (argv.empty()) throw ParameterError("decoder command is empty");
  const std::pair<std::string, std::string> substitutions[] = {
      {"{input}", input.string()}, {"{fps}", fps}, {"{outdir}", outdir.string()}};
  for (auto& arg : argv) {
    for (const auto& [key, value] : substitutions) {
      for (auto pos = arg.find(key); pos != std::string::npos;
           pos = arg.find(key, pos + value.size())) {
        arg.replace(pos, key.size(), value);
      }
    }
  }
  return argv;
}

std::string fps_for_interval(double interval_s) {
  if (!(interval_s > 0.0)) throw ParameterError("sampling interval must be positive");
  const double rounded = std::round(interval_s);
  if (std::abs(interval_s - rounded) < 1e-9) {
    const auto n = static_cast<long long>(rounded);
    return n == 1 ? "1" : "1/" + std::to_string(n);
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", 1.0 / interval_s);
  return buf;
}

void run_decoder(const std::string& command_template, const fs::path& input,
                 double interval_s, const fs::path& outdir) {
  if (command_template.empty()) {
    throw DecodeError("no decoder command configured for video file " + input.string());
  }
  auto argv = expand_decoder_command(command_template, input,
                                     fps_for_interval(interval_s), outdir);
  CommandResult result;
  try {
    result = run_command(argv);
  } catch (const EnvironmentError& e) {
    throw DecodeError("decoder failed for " + input.string() + ": " + e.what());
  }
  if (result.exit_code != 0) {
    throw DecodeError("decoder exited with status " + std::to_string(result.exit_code) +
                      " for " + input.string() + ": " + result.output);
  }
}

std::vector<std::size_t> select_capped(std::size_t count, std::size_t cap,
                                       std::uint64_t seed) {
  std::vector<std::size_t> all(count);
  for (std::size_t i = 0; i < count; ++i) all[i] = i;
  if (count <= cap) return all;
  std::vector<std::size_t> picked;
  picked.reserve(cap);
  std::mt19937_64 rng(seed);
  // std::sample over forward iterators is stable: output stays sorted.
  std::sample(all.begin(), all.end(), std::back_inserter(picked), cap, rng);
  return picked;
}

namespace {

struct Candidate {
  fs::path path;
  double timestamp_s;
};

/// For each scheduled instant, the nearest unused candidate within half an
/// interval (ties go to the earlier file).
std::vector<Candidate> resample(const std::vector<Candidate>& sorted, double interval_s) {
  if (sorted.empty()) return {};
  const double half = interval_s / 2.0;
  std::vector<Candidate> out;
  std::size_t next = 0;  // first candidate not yet consumed
  for (double t : sample_schedule(sorted.back().timestamp_s, interval_s)) {
    while (next < sorted.size() && sorted[next].timestamp_s < t - half - 1e-9) ++next;
    std::size_t best = sorted.size();
    double best_dist = 0.0;
    for (std::size_t i = next; i < sorted.size() && sorted[i].timestamp_s <= t + half + 1e-9; ++i) {
      const double d = std::abs(sorted[i].timestamp_s - t);
      if (best == sorted.size() || d < best_dist) {
        best = i;
        best_dist = d;
      }
    }
    if (best != sorted.size()) {
      out.push_back(sorted[best]);
      next = best + 1;
    }
  }
  return out;
}

std::vector<Candidate> directory_candidates(const fs::path& dir, double interval_s) {
  const auto files = list_images(dir);
  std::size_t named = 0;
  std::vector<Candidate> candidates;
  candidates.reserve(files.size());
  for (const auto& f : files) {
    if (auto ts = timestamp_from_filename(f)) {
      ++named;
      candidates.push_back({f, *ts});
    }
  }
  if (named == 0) {
    candidates.clear();
    for (std::size_t i = 0; i < files.size(); ++i) {
      candidates.push_back({files[i], static_cast<double>(i) * interval_s});
    }
    return candidates;
  }
  if (named != files.size()) {
    throw ParameterError("frame directory " + dir.string() +
                         " mixes frame_<seconds> names with other image names");
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const Candidate& a, const Candidate& b) { return a.timestamp_s < b.timestamp_s; });
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    if (candidates[i].timestamp_s == candidates[i - 1].timestamp_s) {
      throw ParameterError("duplicate frame timestamp in " + dir.string() + ": " +
                           candidates[i].path.filename().string());
    }
  }
  return resample(candidates, interval_s);
}

std::vector<GrayFrame> load_all(const std::vector<Candidate>& picks) {
  std::vector<GrayFrame> frames(picks.size());
  const std::size_t workers =
      std::clamp<std::size_t>(std::thread::hardware_concurrency(), 1, 8);
  auto load_range = [&](std::size_t begin) {
    for (std::size_t i = begin; i < picks.size(); i += workers) {
      frames[i] = load_frame(picks[i].path);
      frames[i].timestamp_s = picks[i].timestamp_s;
      frames[i].index = i;
    }
  };
  if (workers == 1 || picks.size() < 4) {
    load_range(0);
    return frames;
  }
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          load_range(w);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return frames;
}

}  // namespace

SampledSequence acquire_frames(const VideoSource& source, const SamplingMode& mode,
                               AcquireStats* stats) {
  mode.validate();
  AcquireStats local;

  auto finish = [&](std::vector<Candidate> candidates) {
    if (candidates.empty()) {
      throw EmptySequenceError("no frames in source " + source.path.string());
    }
    local.candidate_frames = candidates.size();
    if (mode.kind == SamplingKind::training && candidates.size() > mode.cap) {
      std::vector<Candidate> kept;
      kept.reserve(mode.cap);
      for (auto i : select_capped(candidates.size(), mode.cap, mode.seed)) {
        kept.push_back(std::move(candidates[i]));
      }
      candidates = std::move(kept);
    }
    SampledSequence seq{source.video_id, load_all(candidates), mode};
    if (stats) *stats = local;
    return seq;
  };

  auto evenly_spaced = [&](const std::vector<fs::path>& files) {
    std::vector<Candidate> out;
    out.reserve(files.size());
    for (std::size_t i = 0; i < files.size(); ++i) {
      out.push_back({files[i], static_cast<double>(i) * mode.interval_s});
    }
    return out;
  };

  std::error_code ec;
  if (fs::is_directory(source.path, ec)) {
    return finish(directory_candidates(source.path, mode.interval_s));
  }
  if (!fs::is_regular_file(source.path, ec)) {
    throw DecodeError("video source not found: " + source.path.string());
  }

  if (source.cache_root) {
    FrameCache cache(*source.cache_root);
    auto entry = cache.materialize(source.path, mode, source.decoder_command);
    local.cache_hit = entry.hit;
    local.decoder_invocations = entry.hit ? 0 : 1;
    return finish(evenly_spaced(entry.frames));
  }

  // Frames are read before the scratch directory goes out of scope.
  TempDir scratch("castscan-decode");
  run_decoder(source.decoder_command, source.path, mode.interval_s, scratch.path());
  local.decoder_invocations = 1;
  return finish(evenly_spaced(list_images(scratch.path())));
}

}  // namespace castscan
