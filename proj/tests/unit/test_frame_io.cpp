#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <opencv2/imgcodecs.hpp>

#include <nlohmann/json.hpp>

#include "castscan/errors.hpp"
#include "castscan/frame_cache.hpp"
#include "castscan/frame_io.hpp"
#include "castscan/subprocess.hpp"
#include "doctest.h"
#include "synthetic.hpp"

using namespace castscan;
namespace fs = std::filesystem;

namespace {

// Reference schedule computed by repeated addition, independent of the
// library's multiply-based loop.
std::vector<double> schedule_oracle(double duration, double interval) {
  std::vector<double> out;
  for (double t = 0.0; t <= duration + 1e-9; t += interval) out.push_back(t);
  return out;
}

double mean(const GrayFrame& f) {
  return std::accumulate(f.pixels.begin(), f.pixels.end(), 0.0) / static_cast<double>(f.pixels.size());
}

}  // namespace

TEST_CASE("sample_schedule") {
  CHECK(sample_schedule(95, 30) == schedule_oracle(95, 30));
  CHECK(sample_schedule(95, 30) == std::vector<double>{0, 30, 60, 90});
  CHECK(sample_schedule(0, 30) == std::vector<double>{0});
  CHECK(sample_schedule(29, 30) == std::vector<double>{0});
  CHECK(sample_schedule(600, 30).size() == 21);
  CHECK(sample_schedule(599, 1).size() == 600);
  CHECK_THROWS_AS(sample_schedule(10, 0), ParameterError);
  CHECK_THROWS_AS(sample_schedule(10, -1), ParameterError);
  CHECK_THROWS_AS(sample_schedule(-1, 30), ParameterError);
}

TEST_CASE("load_frame normalizes to 300x300 luminance") {
  TempDir dir("castscan-test");

  SUBCASE("solid white survives resize") {
    cv::Mat white(480, 640, CV_8UC3, cv::Scalar(255, 255, 255));
    cv::imwrite((dir.path() / "white.png").string(), white);
    auto f = load_frame(dir.path() / "white.png");
    CHECK(f.width == 300);
    CHECK(f.height == 300);
    CHECK(f.valid());
    CHECK(std::all_of(f.pixels.begin(), f.pixels.end(), [](float v) { return v == 1.0f; }));
  }
  SUBCASE("solid black") {
    cv::Mat black(480, 640, CV_8UC3, cv::Scalar(0, 0, 0));
    cv::imwrite((dir.path() / "black.jpg").string(), black);
    auto f = load_frame(dir.path() / "black.jpg");
    CHECK(std::all_of(f.pixels.begin(), f.pixels.end(), [](float v) { return v == 0.0f; }));
  }
  SUBCASE("half black, half white keeps its mean") {
    cv::Mat img(480, 640, CV_8UC3, cv::Scalar(0, 0, 0));
    img(cv::Rect(320, 0, 320, 480)).setTo(cv::Scalar(255, 255, 255));
    cv::imwrite((dir.path() / "half.png").string(), img);
    // Analytic mean of the source: half the pixels at 0, half at 1.
    CHECK(std::abs(mean(load_frame(dir.path() / "half.png")) - 0.5) <= 0.01);
  }
  SUBCASE("BT.601 weights") {
    cv::Mat red(10, 10, CV_8UC3, cv::Scalar(0, 0, 255));
    cv::imwrite((dir.path() / "red.png").string(), red);
    auto f = load_frame(dir.path() / "red.png");
    CHECK(f.pixels[0] == doctest::Approx(0.299).epsilon(1e-3));
  }
  SUBCASE("idempotent on 300x300 grayscale") {
    cv::Mat gray(300, 300, CV_8UC1);
    cv::randu(gray, 0, 256);
    cv::imwrite((dir.path() / "gray.png").string(), gray);
    auto once = load_frame(dir.path() / "gray.png");
    save_frame(once, dir.path() / "again.png");
    auto twice = load_frame(dir.path() / "again.png");
    for (std::size_t i = 0; i < once.pixels.size(); ++i) {
      REQUIRE(std::abs(once.pixels[i] - twice.pixels[i]) <= 1.0f / 255.0f);
      REQUIRE(once.pixels[i] == doctest::Approx(gray.data[i] / 255.0).epsilon(1e-6));
    }
  }
  SUBCASE("decode errors name the path") {
    std::ofstream(dir.path() / "broken.png") << "not an image";
    try {
      load_frame(dir.path() / "broken.png");
      FAIL("expected DecodeError");
    } catch (const DecodeError& e) {
      CHECK(std::string(e.what()).find("broken.png") != std::string::npos);
    }
    CHECK_THROWS_AS(load_frame(dir.path() / "missing.png"), DecodeError);
  }
}

TEST_CASE("timestamp_from_filename") {
  CHECK(timestamp_from_filename("frame_30.png") == 30.0);
  CHECK(timestamp_from_filename("/x/frame_1.5.jpg") == 1.5);
  CHECK_FALSE(timestamp_from_filename("shot_30.png"));
  CHECK_FALSE(timestamp_from_filename("frame_.png"));
}

TEST_CASE("fps and decoder command expansion") {
  CHECK(fps_for_interval(30) == "1/30");
  CHECK(fps_for_interval(1) == "1");
  CHECK(fps_for_interval(0.5) == "2");
  auto argv = expand_decoder_command("dec -i {input} -r {fps} '{outdir}/frame %d.png'", "/v/a b.mp4",
                                     "1/30", "/tmp/out");
  CHECK(argv == std::vector<std::string>{"dec", "-i", "/v/a b.mp4", "-r", "1/30",
                                         "/tmp/out/frame %d.png"});
}

TEST_CASE("select_capped") {
  auto picked = select_capped(700, 600, 42);
  CHECK(picked.size() == 600);
  CHECK(std::is_sorted(picked.begin(), picked.end()));
  CHECK(std::adjacent_find(picked.begin(), picked.end()) == picked.end());
  CHECK(picked.back() < 700);
  // Oracle: a second seeded run picks the same subset.
  CHECK(select_capped(700, 600, 42) == picked);
  CHECK(select_capped(700, 600, 43) != picked);
  CHECK(select_capped(5, 600, 1) == std::vector<std::size_t>{0, 1, 2, 3, 4});
}

TEST_CASE("acquire_frames from a timestamped directory") {
  TempDir dir("castscan-test");
  testing::write_frame_dir(dir.path(), {testing::ide(1), testing::ide(2), testing::non_ide(3)}, 30);

  AcquireStats stats;
  auto seq = acquire_frames({"v", dir.path(), "", std::nullopt}, SamplingMode::classification(), &stats);
  REQUIRE(seq.frames.size() == 3);
  CHECK(stats.decoder_invocations == 0);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(seq.frames[i].index == i);
    CHECK(seq.frames[i].timestamp_s == 30.0 * static_cast<double>(i));
    CHECK(seq.frames[i].width == kFrameSide);
  }
}

TEST_CASE("classification mode resamples a 1 fps directory") {
  TempDir dir("castscan-test");
  std::vector<testing::FrameSpec> frames;
  for (std::uint32_t i = 0; i < 95; ++i) frames.push_back(testing::ide(i));
  testing::write_frame_dir(dir.path(), frames, 1.0);
  auto seq = acquire_frames({"v", dir.path(), "", std::nullopt}, SamplingMode::classification());
  REQUIRE(seq.frames.size() == 4);
  CHECK(seq.frames[3].timestamp_s == 90.0);
  CHECK(seq.frames[1].source_path.filename() == "frame_30.png");
}

TEST_CASE("training mode caps with seeded selection") {
  TempDir dir("castscan-test");
  // Tiny images keep 700 decodes quick.
  for (int i = 0; i < 700; ++i) {
    cv::Mat img(4, 4, CV_8UC1, cv::Scalar(i % 256));
    cv::imwrite((dir.path() / ("frame_" + std::to_string(i) + ".png")).string(), img);
  }
  const VideoSource src{"v", dir.path(), "", std::nullopt};
  AcquireStats stats;
  auto a = acquire_frames(src, SamplingMode::training(1.0, 600, 42), &stats);
  auto b = acquire_frames(src, SamplingMode::training(1.0, 600, 42));
  CHECK(stats.candidate_frames == 700);
  REQUIRE(a.frames.size() == 600);
  for (std::size_t i = 0; i < a.frames.size(); ++i) {
    REQUIRE(a.frames[i].index == i);
    if (i > 0) REQUIRE(a.frames[i].timestamp_s > a.frames[i - 1].timestamp_s);
    REQUIRE(a.frames[i].timestamp_s == b.frames[i].timestamp_s);
    REQUIRE(a.frames[i].pixels == b.frames[i].pixels);
  }
  // Classification mode ignores the cap.
  auto c = acquire_frames(src, SamplingMode{SamplingKind::classification, 1.0, 10, 0});
  CHECK(c.frames.size() == 700);
}

TEST_CASE("acquire_frames error paths") {
  TempDir dir("castscan-test");
  CHECK_THROWS_AS(acquire_frames({"v", dir.path(), "", std::nullopt}, SamplingMode::classification()),
                  EmptySequenceError);
  CHECK_THROWS_AS(
      acquire_frames({"v", dir.path() / "nope", "", std::nullopt}, SamplingMode::classification()),
      DecodeError);
  CHECK_THROWS_AS(acquire_frames({"v", dir.path(), "", std::nullopt}, SamplingMode::classification(0)),
                  ParameterError);

  std::ofstream(dir.path() / "clip.mp4") << "x";
  SUBCASE("failing decoder reports diagnostics") {
    const std::string cmd = testing::python() + " -c \"import sys; sys.stderr.write('boom'); sys.exit(5)\"";
    try {
      acquire_frames({"v", dir.path() / "clip.mp4", cmd, std::nullopt}, SamplingMode::classification());
      FAIL("expected DecodeError");
    } catch (const DecodeError& e) {
      CHECK(std::string(e.what()).find("boom") != std::string::npos);
      CHECK(std::string(e.what()).find("status 5") != std::string::npos);
    }
  }
  SUBCASE("missing decoder binary") {
    CHECK_THROWS_AS(acquire_frames({"v", dir.path() / "clip.mp4", "/nonexistent/decoder {input}",
                                    std::nullopt},
                                   SamplingMode::classification()),
                    DecodeError);
  }
  SUBCASE("no decoder configured") {
    CHECK_THROWS_AS(acquire_frames({"v", dir.path() / "clip.mp4", "", std::nullopt},
                                   SamplingMode::classification()),
                    DecodeError);
  }
}

TEST_CASE("acquire_frames through an external decoder") {
  TempDir dir("castscan-test");
  std::vector<testing::FrameSpec> specs;
  for (std::uint32_t i = 0; i < 95; ++i) specs.push_back(testing::ide(i));
  testing::write_frame_dir(dir.path() / "src", specs, 1.0);
  nlohmann::json video{{"fps", 1}, {"frames", nlohmann::json::array()}};
  for (int i = 0; i < 95; ++i) video["frames"].push_back("src/frame_" + std::to_string(i) + ".png");
  std::ofstream(dir.path() / "clip.json") << video.dump();

  const std::string cmd =
      testing::python() + " " + testing::fixture("fake_decoder.py").string() + " {input} {fps} {outdir}";
  AcquireStats stats;
  auto seq = acquire_frames({"clip", dir.path() / "clip.json", cmd, std::nullopt},
                            SamplingMode::classification(), &stats);
  CHECK(stats.decoder_invocations == 1);
  REQUIRE(seq.frames.size() == 4);
  CHECK(seq.frames[2].timestamp_s == 60.0);
  // The third decoded frame is source second 60.
  CHECK(seq.frames[2].pixels == load_frame(dir.path() / "src/frame_60.png").pixels);
}

TEST_CASE("command lines split with shell quoting") {
  using V = std::vector<std::string>;
  CHECK(split_command_line("ffmpeg -i {input}  -vf fps={fps}") == V{"ffmpeg", "-i", "{input}", "-vf", "fps={fps}"});
  CHECK(split_command_line(R"x(python3 -c "print('a b')")x") == V{"python3", "-c", "print('a b')"});
  CHECK(split_command_line(R"('it''s' "say \"hi\"" a\ b)") == V{"its", "say \"hi\"", "a b"});
  CHECK(split_command_line(R"(x "" '')") == V{"x", "", ""});
  CHECK(split_command_line("   ").empty());
  CHECK_THROWS_AS(split_command_line("echo 'open"), ParameterError);
}

TEST_CASE("run_command captures output and enforces timeouts") {
  auto result = run_command({testing::python(), "-c", "import sys; print('out'); sys.stderr.write('err'); sys.exit(3)"});
  CHECK(result.exit_code == 3);
  CHECK(result.output.find("out") != std::string::npos);
  CHECK(result.output.find("err") != std::string::npos);
  CHECK_THROWS_AS(run_command({testing::python(), "-c", "import time; time.sleep(30)"},
                              std::chrono::milliseconds(300)),
                  TimeoutError);
  CHECK_THROWS_AS(run_command({"/nonexistent/program"}), EnvironmentError);
}
