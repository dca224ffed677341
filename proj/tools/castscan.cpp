// castscan: find live-coding screencasts among videos.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "castscan/classifier.hpp"
#include "castscan/config.hpp"
#include "castscan/errors.hpp"
#include "castscan/frame_io.hpp"
#include "castscan/manifest.hpp"
#include "castscan/scan.hpp"
#include "castscan/similarity.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace castscan;

namespace {

constexpr int kExitFailedVideos = 1;
constexpr int kExitUsage = 2;

/// Command-line values that override the configuration file.
struct Overrides {
  std::optional<fs::path> config_path;
  std::optional<double> interval_s;
  std::optional<double> dup_threshold;
  std::optional<std::size_t> min_run;
  std::optional<double> min_ratio;
  std::optional<std::string> classifier;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> jobs;
  std::optional<std::string> cache_dir;
  std::optional<std::string> decoder;
  std::optional<double> classifier_timeout_s;
  std::optional<std::size_t> batch_size;
  std::optional<std::size_t> cap;
  std::optional<std::size_t> runs;

  ScanConfig resolve() const {
    ScanConfig config = config_path ? load_config(*config_path) : ScanConfig{};
    json flat = json::object();
    if (interval_s) flat["interval_s"] = *interval_s;
    if (dup_threshold) flat["dup_threshold"] = *dup_threshold;
    if (min_run) flat["min_run"] = *min_run;
    if (min_ratio) flat["min_ratio"] = *min_ratio;
    if (classifier) flat["classifier"] = *classifier;
    if (seed) flat["seed"] = *seed;
    if (jobs) flat["jobs"] = *jobs;
    if (cache_dir) flat["cache_dir"] = *cache_dir;
    if (decoder) flat["decoder"] = *decoder;
    if (classifier_timeout_s) flat["classifier_timeout_s"] = *classifier_timeout_s;
    if (batch_size) flat["classifier_batch_size"] = *batch_size;
    if (cap) flat["cap"] = *cap;
    if (runs) flat["random_runs"] = *runs;
    apply_config(config, flat);
    return config;
  }
};

void add_config_flag(CLI::App* app, Overrides& o) {
  app->add_option("--config", o.config_path, "Flat JSON configuration file; flags win")
      ->check(CLI::ExistingFile);
}

void add_seed_flag(CLI::App* app, Overrides& o) {
  app->add_option("--seed", o.seed, "Seed for random selection and the random baseline");
}

void add_pipeline_flags(CLI::App* app, Overrides& o) {
  add_config_flag(app, o);
  app->add_option("--interval", o.interval_s, "Seconds between sampled frames (default 30)");
  app->add_option("--dup-threshold", o.dup_threshold,
                  "NRMSE at or below which a frame is a duplicate (default 0.05)");
  app->add_option("--min-run", o.min_run, "Minimum run of informative IDE frames (default 4)");
  app->add_option("--min-ratio", o.min_ratio, "Minimum IDE share of informative frames (default 0.5)");
  app->add_option("--classifier", o.classifier,
                  "worker:<command> | sidecar:<labels.jsonl> | marker_oracle | constant:<label>");
  add_seed_flag(app, o);
  app->add_option("--jobs", o.jobs, "Videos processed in parallel (default: CPU count)");
  app->add_option("--cache-dir", o.cache_dir, "Reuse decoded frames under this directory");
  app->add_option("--decoder", o.decoder, "Decoder command template with {input} {fps} {outdir}");
  app->add_option("--classifier-timeout", o.classifier_timeout_s, "Seconds per worker request");
  app->add_option("--batch-size", o.batch_size, "Frames per worker request");
}

std::string yes_no(bool v) { return v ? "screencast" : "not screencast"; }

// --- scan -------------------------------------------------------------------

int cmd_scan(const fs::path& manifest_path, const fs::path& out_dir, const Overrides& o) {
  const ScanConfig config = o.resolve();
  const auto manifest = load_manifest(manifest_path);
  const ScanReport report = run_scan(manifest, config);
  const auto path = write_scan_report_file(report, out_dir);

  for (const auto& r : report.records) {
    if (!r.ok) {
      std::printf("%-24s FAILED: %s\n", r.video_id.c_str(), r.error.c_str());
      continue;
    }
    std::printf("%-24s %-15s ide %zu/%zu informative, longest run %zu, ratio %.3f\n",
                r.video_id.c_str(), yes_no(r.verdict.is_screencast).c_str(), r.verdict.n_ide,
                r.verdict.n_info, r.verdict.longest_run, r.verdict.ratio);
  }
  std::printf("%zu videos, %zu failed, %.2f s; report: %s\n", report.records.size(),
              report.failed_count(), report.total_s, path.c_str());
  return report.all_ok() ? 0 : kExitFailedVideos;
}

// --- evaluate / baseline ------------------------------------------------------

void emit_evaluation(const EvaluationResult& result, const std::optional<fs::path>& out) {
  std::cout << format_evaluation(result);
  if (out) {
    std::ofstream file(*out);
    if (!file) throw EnvironmentError("cannot write " + out->string());
    write_evaluation(result, file);
    std::cout << "evaluation written to " << out->string() << '\n';
  }
}

std::optional<std::vector<ReferenceRow>> load_reference(const std::optional<fs::path>& path) {
  if (!path) return std::nullopt;
  return load_reference_table(*path);
}

int cmd_evaluate(const fs::path& scan_path, const fs::path& manifest_path,
                 const std::optional<fs::path>& reference_path, const std::optional<fs::path>& out,
                 const Overrides& o) {
  const ScanConfig config = o.resolve();
  const auto reference = load_reference(reference_path);
  const auto result = run_evaluate(read_scan_report(scan_path), load_manifest(manifest_path),
                                   config.random_runs, config.seed,
                                   reference ? &*reference : nullptr);
  emit_evaluation(result, out);
  return 0;
}

int cmd_baseline(const std::optional<fs::path>& manifest_path, std::optional<std::size_t> positives,
                 std::optional<std::size_t> negatives,
                 const std::optional<fs::path>& reference_path, const std::optional<fs::path>& out,
                 const Overrides& o) {
  const ScanConfig config = o.resolve();
  Outcomes truth;
  if (manifest_path) {
    std::vector<std::string> unlabeled;
    for (const auto& e : load_manifest(*manifest_path)) {
      if (e.truth_label) truth[e.video_id] = *e.truth_label;
      else unlabeled.push_back(e.video_id);
    }
    if (!unlabeled.empty()) {
      std::string ids;
      for (const auto& id : unlabeled) ids += (ids.empty() ? "" : ", ") + id;
      throw ParameterError("videos without truth_label: " + ids);
    }
  } else {
    if (!positives || !negatives) {
      throw ParameterError("baseline needs --manifest or both --positives and --negatives");
    }
    char id[32];
    for (std::size_t i = 0; i < *positives; ++i) {
      std::snprintf(id, sizeof id, "pos%06zu", i);
      truth[id] = true;
    }
    for (std::size_t i = 0; i < *negatives; ++i) {
      std::snprintf(id, sizeof id, "neg%06zu", i);
      truth[id] = false;
    }
  }
  const auto reference = load_reference(reference_path);
  emit_evaluation(run_baselines(truth, config.random_runs, config.seed,
                                reference ? &*reference : nullptr),
                  out);
  return 0;
}

// --- extract-frames -------------------------------------------------------------

int cmd_extract(const fs::path& manifest_path, const fs::path& out_dir, bool keep_duplicates,
                bool split_by_label, const Overrides& o) {
  Overrides training = o;
  // Training extraction samples once per second unless told otherwise.
  if (!training.interval_s) training.interval_s = 1.0;
  const ScanConfig config = training.resolve();
  const auto mode = SamplingMode::training(config.params.interval_s, config.cap, config.seed);
  std::unique_ptr<FrameClassifier> classifier;
  if (split_by_label) classifier = make_classifier(config.classifier);

  std::size_t failed = 0;
  for (const auto& entry : load_manifest(manifest_path)) {
    try {
      const VideoSource source{entry.video_id, entry.source, config.decoder_command, config.cache_dir};
      const SampledSequence seq = acquire_frames(source, mode);
      std::vector<bool> duplicate(seq.frames.size(), false);
      if (!keep_duplicates) duplicate = mark_duplicates(seq, config.params.dup_threshold).duplicate;

      const fs::path video_dir = out_dir / entry.video_id;
      fs::create_directories(split_by_label ? out_dir : video_dir);
      json frames = json::array();
      std::size_t written = 0;
      for (std::size_t i = 0; i < seq.frames.size(); ++i) {
        if (duplicate[i]) continue;
        const auto& frame = seq.frames[i];
        char name[64];
        std::snprintf(name, sizeof name, "frame_%06zu.png", i);
        fs::path target = video_dir / name;
        json rec{{"index", i}, {"timestamp_s", frame.timestamp_s}};
        if (classifier) {
          const auto label = classifier->classify(entry.video_id, frame);
          const fs::path class_dir = out_dir / std::string(to_string(label.label));
          fs::create_directories(class_dir);
          target = class_dir / (entry.video_id + "_" + name);
          rec["label"] = std::string(to_string(label.label));
        }
        save_frame(frame, target);
        rec["file"] = fs::relative(target, out_dir).string();
        frames.push_back(std::move(rec));
        ++written;
      }
      json index{{"video_id", entry.video_id},
                 {"source", entry.source.string()},
                 {"mode", {{"kind", to_string(mode.kind)},
                           {"interval_s", mode.interval_s},
                           {"cap", mode.cap},
                           {"seed", mode.seed}}},
                 {"dup_threshold", keep_duplicates ? json(nullptr) : json(config.params.dup_threshold)},
                 {"frames", frames}};
      const fs::path index_path =
          split_by_label ? out_dir / (entry.video_id + ".index.json") : video_dir / "index.json";
      std::ofstream(index_path) << index.dump(2) << '\n';
      std::printf("%-24s %zu sampled, %zu written\n", entry.video_id.c_str(), seq.frames.size(),
                  written);
    } catch (const std::exception& e) {
      ++failed;
      std::printf("%-24s FAILED: %s\n", entry.video_id.c_str(), e.what());
    }
  }
  return failed == 0 ? 0 : kExitFailedVideos;
}

// --- classify-frames ----------------------------------------------------------------

int cmd_classify(const std::vector<fs::path>& inputs, const std::string& video_id,
                 const Overrides& o) {
  const ScanConfig config = o.resolve();
  std::vector<fs::path> paths;
  for (const auto& in : inputs) {
    if (fs::is_directory(in)) {
      for (auto& p : list_images(in)) paths.push_back(std::move(p));
    } else {
      paths.push_back(in);
    }
  }
  auto classifier = make_classifier(config.classifier);
  std::size_t failed = 0;
  for (std::size_t i = 0; i < paths.size(); ++i) {
    json rec{{"frame_path", paths[i].string()}, {"index", i}};
    try {
      const auto label = classifier->classify_path(video_id, paths[i], i);
      rec["label"] = std::string(to_string(label.label));
      rec["confidence"] = label.confidence;
    } catch (const std::exception& e) {
      ++failed;
      rec["error"] = e.what();
    }
    std::cout << rec.dump() << '\n';
  }
  return failed == 0 ? 0 : kExitFailedVideos;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Detect live-coding screencasts among videos."};
  app.require_subcommand(1);
  app.set_version_flag("--version", "castscan 0.1.0");

  Overrides o;
  fs::path manifest;
  fs::path out_dir = "reports";
  int status = 0;

  auto* scan = app.add_subcommand("scan", "Sample, deduplicate, classify and decide every video");
  scan->add_option("--manifest", manifest, "JSON Lines manifest")->required()->check(CLI::ExistingFile);
  scan->add_option("--out", out_dir, "Directory for the scan report")->capture_default_str();
  add_pipeline_flags(scan, o);
  scan->callback([&] { status = cmd_scan(manifest, out_dir, o); });

  fs::path scan_report;
  std::optional<fs::path> reference;
  std::optional<fs::path> eval_out;
  auto* evaluate = app.add_subcommand("evaluate", "Score a scan report against truth labels");
  evaluate->add_option("--scan", scan_report, "Scan report written by `scan`")
      ->required()
      ->check(CLI::ExistingFile);
  evaluate->add_option("--manifest", manifest, "Manifest with truth labels")
      ->required()
      ->check(CLI::ExistingFile);
  evaluate->add_option("--reference", reference, "Reference results to compare against")
      ->check(CLI::ExistingFile);
  evaluate->add_option("--out", eval_out, "Also write the evaluation as JSON Lines");
  evaluate->add_option("--runs", o.runs, "Random-baseline runs (default 20)");
  add_config_flag(evaluate, o);
  add_seed_flag(evaluate, o);
  evaluate->callback([&] { status = cmd_evaluate(scan_report, manifest, reference, eval_out, o); });

  std::optional<fs::path> baseline_manifest;
  std::optional<std::size_t> positives;
  std::optional<std::size_t> negatives;
  auto* baseline = app.add_subcommand("baseline", "Random and all-positive baselines");
  baseline->add_option("--manifest", baseline_manifest, "Manifest with truth labels")
      ->check(CLI::ExistingFile);
  baseline->add_option("--positives", positives, "Number of positive videos");
  baseline->add_option("--negatives", negatives, "Number of negative videos");
  baseline->add_option("--reference", reference, "Reference results to compare against")
      ->check(CLI::ExistingFile);
  baseline->add_option("--out", eval_out, "Also write the results as JSON Lines");
  baseline->add_option("--runs", o.runs, "Random-baseline runs (default 20)");
  add_config_flag(baseline, o);
  add_seed_flag(baseline, o);
  baseline->callback(
      [&] { status = cmd_baseline(baseline_manifest, positives, negatives, reference, eval_out, o); });

  bool keep_duplicates = false;
  bool split_by_label = false;
  fs::path extract_out = "frames";
  auto* extract = app.add_subcommand("extract-frames",
                                     "Training extraction: 1 fps, capped, deduplicated PNG frames");
  extract->add_option("--manifest", manifest, "JSON Lines manifest")->required()->check(CLI::ExistingFile);
  extract->add_option("--out", extract_out, "Output directory")->capture_default_str();
  extract->add_option("--cap", o.cap, "Maximum frames kept per video (default 600)");
  extract->add_flag("--keep-duplicates", keep_duplicates, "Write near-duplicate frames too");
  extract->add_flag("--split-by-label", split_by_label,
                    "Sort frames into ide/ and non_ide/ using --classifier");
  add_pipeline_flags(extract, o);
  extract->callback(
      [&] { status = cmd_extract(manifest, extract_out, keep_duplicates, split_by_label, o); });

  std::vector<fs::path> inputs;
  std::string video_id = "frames";
  auto* classify = app.add_subcommand("classify-frames", "Label image files with a classifier");
  classify->add_option("inputs", inputs, "Image files or directories")->required();
  classify->add_option("--video-id", video_id, "Video id passed to the classifier")->capture_default_str();
  add_pipeline_flags(classify, o);
  classify->callback([&] { status = cmd_classify(inputs, video_id, o); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "castscan: %s\n", e.what());
    return kExitUsage;
  }
  return status;
}
