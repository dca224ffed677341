#include <algorithm>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "castscan/frame_cache.hpp"
#include "castscan/manifest.hpp"
#include "castscan/subprocess.hpp"
#include "doctest.h"
#include "synthetic.hpp"

using namespace castscan;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

CommandResult cli(std::vector<std::string> args) {
  args.insert(args.begin(), CASTSCAN_CLI);
  return run_command(args, std::chrono::milliseconds(120000));
}

bool contains(const std::string& haystack, const std::string& needle) {
  return haystack.find(needle) != std::string::npos;
}

/// Four live-coding videos, two talks; ids p0..p3 and n0..n1.
fs::path write_corpus(const fs::path& root, bool with_missing = false) {
  using testing::ide;
  using testing::non_ide;
  std::vector<ManifestEntry> entries;
  for (std::uint32_t v = 0; v < 4; ++v) {
    const std::string id = "p" + std::to_string(v);
    testing::write_frame_dir(root / id, {ide(v * 10 + 1), ide(v * 10 + 2), ide(v * 10 + 3), ide(v * 10 + 4), ide(v * 10 + 5)});
    entries.push_back({id, id, true, ""});
  }
  for (std::uint32_t v = 0; v < 2; ++v) {
    const std::string id = "n" + std::to_string(v);
    testing::write_frame_dir(root / id, {non_ide(v + 1), non_ide(v + 7), ide(v + 3), non_ide(v + 9)});
    entries.push_back({id, id, false, ""});
  }
  if (with_missing) entries.push_back({"missing", "does-not-exist", true, ""});
  write_manifest(root / "manifest.jsonl", entries);
  return root / "manifest.jsonl";
}

std::vector<fs::path> reports_in(const fs::path& dir) {
  std::vector<fs::path> out;
  if (!fs::exists(dir)) return out;
  for (const auto& e : fs::directory_iterator(dir)) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

TEST_CASE("scan writes a report and reports success") {
  TempDir dir("castscan-cli");
  const auto manifest = write_corpus(dir.path());
  auto r = cli({"scan", "--manifest", manifest.string(), "--out", (dir.path() / "out").string(),
                "--classifier", "marker_oracle", "--jobs", "2"});
  INFO(r.output);
  CHECK(r.exit_code == 0);
  CHECK(contains(r.output, "p0"));
  CHECK(contains(r.output, "6 videos, 0 failed"));
  const auto reports = reports_in(dir.path() / "out");
  REQUIRE(reports.size() == 1);
  CHECK(reports[0].filename().string().rfind("scan-", 0) == 0);

  SUBCASE("a second run never overwrites") {
    r = cli({"scan", "--manifest", manifest.string(), "--out", (dir.path() / "out").string(),
             "--classifier", "marker_oracle"});
    CHECK(r.exit_code == 0);
    CHECK(reports_in(dir.path() / "out").size() == 2);
  }
  SUBCASE("evaluate scores the report") {
    r = cli({"evaluate", "--scan", reports[0].string(), "--manifest", manifest.string(),
             "--out", (dir.path() / "eval.jsonl").string()});
    INFO(r.output);
    CHECK(r.exit_code == 0);
    CHECK(contains(r.output, "castscan"));
    CHECK(contains(r.output, "all_positive_baseline"));
    CHECK(contains(r.output, "random_baseline"));
    std::ifstream in(dir.path() / "eval.jsonl");
    std::string first;
    std::getline(in, first);
    const auto row = json::parse(first);
    CHECK(row.at("method") == "castscan");
    CHECK(row.at("f1") == 1.0);
  }
}

TEST_CASE("scan exit status is nonzero iff a video failed") {
  TempDir dir("castscan-cli");
  const auto manifest = write_corpus(dir.path(), true);
  auto r = cli({"scan", "--manifest", manifest.string(), "--out", (dir.path() / "out").string(),
                "--classifier", "marker_oracle"});
  INFO(r.output);
  CHECK(r.exit_code == 1);
  CHECK(contains(r.output, "missing"));
  CHECK(contains(r.output, "FAILED"));
  CHECK(contains(r.output, "7 videos, 1 failed"));
  CHECK(reports_in(dir.path() / "out").size() == 1);
}

TEST_CASE("flags override the configuration file") {
  TempDir dir("castscan-cli");
  const auto manifest = write_corpus(dir.path());
  std::ofstream(dir.path() / "config.json") << R"({"min_run": 9, "classifier": "marker_oracle"})";
  auto strict = cli({"scan", "--manifest", manifest.string(), "--config",
                     (dir.path() / "config.json").string(), "--out", (dir.path() / "a").string()});
  CHECK(strict.exit_code == 0);
  CHECK_FALSE(contains(strict.output, "p0                       screencast"));
  auto relaxed = cli({"scan", "--manifest", manifest.string(), "--config",
                      (dir.path() / "config.json").string(), "--min-run", "4", "--out",
                      (dir.path() / "b").string()});
  CHECK(relaxed.exit_code == 0);
  CHECK(contains(relaxed.output, "p0                       screencast"));

  std::ofstream(dir.path() / "bad.json") << R"({"min_runs": 4})";
  auto bad = cli({"scan", "--manifest", manifest.string(), "--config", (dir.path() / "bad.json").string()});
  CHECK(bad.exit_code == 2);
  CHECK(contains(bad.output, "min_runs"));
  auto range = cli({"scan", "--manifest", manifest.string(), "--min-ratio", "2"});
  CHECK(range.exit_code == 2);
}

TEST_CASE("scan through an external worker") {
  TempDir dir("castscan-cli");
  const auto manifest = write_corpus(dir.path());
  const std::string worker = "worker:" + testing::python() + " " +
                             testing::fixture("fake_worker.py").string() + " --marker";
  auto r = cli({"scan", "--manifest", manifest.string(), "--out", (dir.path() / "out").string(),
                "--classifier", worker, "--jobs", "2", "--batch-size", "3"});
  INFO(r.output);
  CHECK(r.exit_code == 0);
  CHECK(contains(r.output, "p3                       screencast"));
  CHECK(contains(r.output, "n1                       not screencast"));
}

TEST_CASE("baseline on a 16/7 split flags divergence from the reference") {
  auto r = cli({"baseline", "--positives", "16", "--negatives", "7", "--runs", "2000",
                "--reference", std::string(CASTSCAN_DATA_DIR) + "/reference_results.json"});
  INFO(r.output);
  CHECK(r.exit_code == 0);
  CHECK(contains(r.output, "0.6957"));
  CHECK(contains(r.output, "DIVERGENCE"));
  CHECK(contains(r.output, "0.7300"));

  auto none = cli({"baseline", "--positives", "3"});
  CHECK(none.exit_code == 2);
}

TEST_CASE("extract-frames writes capped training frames") {
  TempDir dir("castscan-cli");
  std::vector<testing::FrameSpec> frames;
  for (std::uint32_t i = 0; i < 80; ++i) frames.push_back(testing::ide(i / 4));
  testing::write_frame_dir(dir.path() / "clip", frames, 1.0);
  write_manifest(dir.path() / "m.jsonl", {{"clip", dir.path() / "clip", std::nullopt, ""}});

  auto r = cli({"extract-frames", "--manifest", (dir.path() / "m.jsonl").string(), "--out",
                (dir.path() / "all").string(), "--cap", "50", "--seed", "7", "--keep-duplicates"});
  INFO(r.output);
  REQUIRE(r.exit_code == 0);
  auto index = json::parse(std::ifstream(dir.path() / "all/clip/index.json"));
  CHECK(index.at("frames").size() == 50);
  CHECK(index.at("mode").at("kind") == "training");
  CHECK(index.at("mode").at("interval_s") == 1.0);
  double last = -1.0;
  for (const auto& f : index.at("frames")) {
    CHECK(f.at("timestamp_s").get<double>() > last);
    last = f.at("timestamp_s").get<double>();
    CHECK(fs::exists(dir.path() / "all" / f.at("file").get<std::string>()));
  }

  auto again = cli({"extract-frames", "--manifest", (dir.path() / "m.jsonl").string(), "--out",
                    (dir.path() / "again").string(), "--cap", "50", "--seed", "7", "--keep-duplicates"});
  CHECK(json::parse(std::ifstream(dir.path() / "again/clip/index.json")).at("frames") == index.at("frames"));

  r = cli({"extract-frames", "--manifest", (dir.path() / "m.jsonl").string(), "--out",
           (dir.path() / "dedup").string()});
  REQUIRE(r.exit_code == 0);
  auto dedup = json::parse(std::ifstream(dir.path() / "dedup/clip/index.json"));
  // Four identical seconds per distinct screen collapse to one frame each.
  CHECK(dedup.at("frames").size() == 20);

  r = cli({"extract-frames", "--manifest", (dir.path() / "m.jsonl").string(), "--out",
           (dir.path() / "split").string(), "--split-by-label", "--classifier", "marker_oracle"});
  REQUIRE(r.exit_code == 0);
  CHECK(list_images(dir.path() / "split/ide").size() == 20);
}

TEST_CASE("classify-frames labels image files") {
  TempDir dir("castscan-cli");
  save_frame(testing::synth_frame(testing::ide(1)), dir.path() / "a.png");
  save_frame(testing::synth_frame(testing::non_ide(1)), dir.path() / "b.png");
  auto r = cli({"classify-frames", dir.path().string(), "--classifier", "marker_oracle"});
  INFO(r.output);
  CHECK(r.exit_code == 0);
  std::istringstream lines(r.output);
  std::string line;
  std::vector<std::string> labels;
  while (std::getline(lines, line)) labels.push_back(json::parse(line).at("label"));
  CHECK(labels == std::vector<std::string>{"ide", "non_ide"});

  std::ofstream(dir.path() / "broken.png") << "not an image";
  r = cli({"classify-frames", (dir.path() / "broken.png").string(), "--classifier", "marker_oracle"});
  CHECK(r.exit_code == 1);
  CHECK(contains(r.output, "\"error\""));
}

TEST_CASE("usage errors") {
  CHECK(cli({}).exit_code != 0);
  CHECK(cli({"scan"}).exit_code != 0);
  CHECK(cli({"scan", "--manifest", "/nonexistent.jsonl"}).exit_code != 0);
  CHECK(cli({"--version"}).exit_code == 0);
}
