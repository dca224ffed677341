#include "castscan/scan.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include "castscan/errors.hpp"
#include "castscan/similarity.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace castscan {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

json params_json(const DecisionParams& p) {
  return {{"min_run", p.min_run},
          {"min_ratio", p.min_ratio},
          {"dup_threshold", p.dup_threshold},
          {"interval_s", p.interval_s}};
}

DecisionParams params_from_json(const json& j) {
  DecisionParams p;
  p.min_run = j.at("min_run").get<std::size_t>();
  p.min_ratio = j.at("min_ratio").get<double>();
  p.dup_threshold = j.at("dup_threshold").get<double>();
  p.interval_s = j.at("interval_s").get<double>();
  return p;
}

void strip_timing(json& j) {
  if (j.is_object()) {
    j.erase("timing");
    for (auto& [_, v] : j.items()) strip_timing(v);
  } else if (j.is_array()) {
    for (auto& v : j) strip_timing(v);
  }
}

}  // namespace

bool ScanReport::all_ok() const { return failed_count() == 0; }

std::size_t ScanReport::failed_count() const {
  return static_cast<std::size_t>(
      std::count_if(records.begin(), records.end(), [](const ScanRecord& r) { return !r.ok; }));
}

ScanRecord scan_video(const ManifestEntry& entry, const ScanConfig& config,
                      FrameClassifier& classifier) {
  ScanRecord rec;
  rec.video_id = entry.video_id;
  rec.classifier = std::string(to_string(classifier.kind()));
  rec.params = config.params;
  rec.verdict.video_id = entry.video_id;
  const auto start = Clock::now();

  try {
    VideoSource source{entry.video_id, entry.source, config.decoder_command, config.cache_dir};
    AcquireStats stats;
    auto t = Clock::now();
    SampledSequence seq = acquire_frames(source, config.classification_mode(), &stats);
    rec.timing.acquire_s = seconds_since(t);
    rec.candidate_frames = stats.candidate_frames;
    rec.cache_hit = stats.cache_hit;

    t = Clock::now();
    const DuplicateMarking marking = mark_duplicates(seq, config.params.dup_threshold);
    rec.timing.dedup_s = seconds_since(t);

    // Only informative frames reach the classifier.
    std::vector<FrameView> informative;
    std::vector<std::size_t> slots;
    for (std::size_t i = 0; i < seq.frames.size(); ++i) {
      if (!marking.duplicate[i]) {
        informative.emplace_back(seq.frames[i]);
        slots.push_back(i);
      }
    }
    t = Clock::now();
    const auto labels = classifier.classify_batch(entry.video_id, informative);
    rec.timing.classify_s = seconds_since(t);
    rec.classified_count = informative.size();

    std::vector<FrameAnnotation> annotations(seq.frames.size());
    rec.frames.resize(seq.frames.size());
    for (std::size_t i = 0; i < seq.frames.size(); ++i) {
      annotations[i].index = i;
      annotations[i].duplicate = marking.duplicate[i];
      auto& fr = rec.frames[i];
      fr.index = i;
      fr.timestamp_s = seq.frames[i].timestamp_s;
      fr.duplicate = marking.duplicate[i];
      fr.reference_index = marking.reference_index[i];
      fr.nrmse = marking.score[i];
    }
    for (std::size_t k = 0; k < slots.size(); ++k) {
      annotations[slots[k]].label = labels[k];
      rec.frames[slots[k]].label = labels[k];
    }

    t = Clock::now();
    rec.verdict = decide(annotations, config.params, entry.video_id);
    rec.timing.decide_s = seconds_since(t);
    rec.ok = true;
  } catch (const std::exception& e) {
    rec.ok = false;
    rec.error = e.what();
    rec.frames.clear();
  }
  rec.timing.total_s = seconds_since(start);
  return rec;
}

ScanReport run_scan(const std::vector<ManifestEntry>& manifest, const ScanConfig& config,
                    ClassifierFactory factory) {
  config.validate();
  if (!factory) {
    factory = [spec = config.classifier] { return make_classifier(spec); };
  }
  const auto start = Clock::now();
  ScanReport report;
  report.config = to_json(config);
  report.config_hash = config_hash(config);
  report.records.resize(manifest.size());

  std::atomic<std::size_t> next{0};
  auto work = [&] {
    std::unique_ptr<FrameClassifier> classifier;
    std::string classifier_error;
    try {
      classifier = factory();
    } catch (const std::exception& e) {
      classifier_error = e.what();
    }
    for (std::size_t i = next++; i < manifest.size(); i = next++) {
      if (!classifier) {
        auto& rec = report.records[i];
        rec.video_id = manifest[i].video_id;
        rec.verdict.video_id = manifest[i].video_id;
        rec.classifier = config.classifier.describe();
        rec.params = config.params;
        rec.error = "classifier unavailable: " + classifier_error;
        continue;
      }
      report.records[i] = scan_video(manifest[i], config, *classifier);
    }
  };

  const auto threads = std::min<std::size_t>(config.effective_jobs(), manifest.size());
  if (threads <= 1) {
    if (!manifest.empty()) work();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work);
  }
  report.total_s = seconds_since(start);
  return report;
}

json to_json(const ScanRecord& r) {
  json j;
  j["type"] = "video";
  j["video_id"] = r.video_id;
  j["status"] = r.ok ? "ok" : "failed";
  j["error"] = r.ok ? json(nullptr) : json(r.error);
  j["classifier"] = r.classifier;
  j["params"] = params_json(r.params);
  const auto& v = r.verdict;
  j["verdict"] = {{"is_screencast", v.is_screencast}, {"n_ide", v.n_ide},
                  {"n_info", v.n_info},               {"longest_run", v.longest_run},
                  {"ratio", v.ratio},                 {"sampled_count", v.sampled_count}};
  j["classified_count"] = r.classified_count;
  j["candidate_frames"] = r.candidate_frames;
  j["cache_hit"] = r.cache_hit;
  json frames = json::array();
  for (const auto& f : r.frames) {
    json fj;
    fj["index"] = f.index;
    fj["timestamp_s"] = f.timestamp_s;
    fj["duplicate"] = f.duplicate;
    fj["reference_index"] = f.reference_index ? json(*f.reference_index) : json(nullptr);
    fj["nrmse"] = f.nrmse;
    if (f.label) {
      fj["label"] = std::string(to_string(f.label->label));
      fj["confidence"] = f.label->confidence;
    } else {
      fj["label"] = nullptr;
      fj["confidence"] = nullptr;
    }
    frames.push_back(std::move(fj));
  }
  j["frames"] = std::move(frames);
  j["timing"] = {{"acquire_s", r.timing.acquire_s},   {"dedup_s", r.timing.dedup_s},
                 {"classify_s", r.timing.classify_s}, {"decide_s", r.timing.decide_s},
                 {"total_s", r.timing.total_s}};
  return j;
}

ScanRecord scan_record_from_json(const json& j) {
  ScanRecord r;
  r.video_id = j.at("video_id").get<std::string>();
  r.ok = j.at("status").get<std::string>() == "ok";
  if (!r.ok && j.contains("error") && j["error"].is_string()) r.error = j["error"].get<std::string>();
  r.classifier = j.value("classifier", std::string{});
  r.params = params_from_json(j.at("params"));
  const auto& v = j.at("verdict");
  r.verdict.video_id = r.video_id;
  r.verdict.is_screencast = v.at("is_screencast").get<bool>();
  r.verdict.n_ide = v.at("n_ide").get<std::size_t>();
  r.verdict.n_info = v.at("n_info").get<std::size_t>();
  r.verdict.longest_run = v.at("longest_run").get<std::size_t>();
  r.verdict.ratio = v.at("ratio").get<double>();
  r.verdict.sampled_count = v.at("sampled_count").get<std::size_t>();
  r.classified_count = j.value("classified_count", std::size_t{0});
  r.candidate_frames = j.value("candidate_frames", std::size_t{0});
  r.cache_hit = j.value("cache_hit", false);
  for (const auto& fj : j.value("frames", json::array())) {
    FrameRecord f;
    f.index = fj.at("index").get<std::size_t>();
    f.timestamp_s = fj.at("timestamp_s").get<double>();
    f.duplicate = fj.at("duplicate").get<bool>();
    if (!fj["reference_index"].is_null()) f.reference_index = fj["reference_index"].get<std::size_t>();
    f.nrmse = fj.at("nrmse").get<double>();
    if (!fj["label"].is_null()) {
      f.label = FrameLabel{parse_label(fj["label"].get<std::string>()),
                           fj.at("confidence").get<double>()};
    }
    r.frames.push_back(std::move(f));
  }
  if (j.contains("timing")) {
    const auto& t = j["timing"];
    r.timing = {t.value("acquire_s", 0.0), t.value("dedup_s", 0.0), t.value("classify_s", 0.0),
                t.value("decide_s", 0.0), t.value("total_s", 0.0)};
  }
  return r;
}

void write_scan_report(const ScanReport& report, std::ostream& out) {
  json header{{"type", "scan_header"}, {"config", report.config}, {"config_hash", report.config_hash}};
  out << header.dump() << '\n';
  std::size_t positive = 0;
  std::size_t classified = 0;
  double classify_s = 0.0;
  double acquire_s = 0.0;
  for (const auto& r : report.records) {
    out << to_json(r).dump() << '\n';
    if (r.ok && r.verdict.is_screencast) ++positive;
    classified += r.classified_count;
    classify_s += r.timing.classify_s;
    acquire_s += r.timing.acquire_s;
  }
  json summary{{"type", "summary"},
               {"videos", report.records.size()},
               {"positive", positive},
               {"failed", report.failed_count()},
               {"classified_frames", classified},
               {"timing", {{"total_s", report.total_s},
                           {"acquire_s", acquire_s},
                           {"classify_s", classify_s}}}};
  out << summary.dump() << '\n';
}

fs::path write_scan_report_file(const ScanReport& report, const fs::path& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw EnvironmentError("cannot create report directory " + out_dir.string());

  const std::time_t now = std::time(nullptr);
  std::tm utc{};
  gmtime_r(&now, &utc);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y%m%dT%H%M%SZ", &utc);
  const std::string stem = std::string("scan-") + stamp + "-" + report.config_hash;

  fs::path path = out_dir / (stem + ".jsonl");
  for (int n = 1; fs::exists(path); ++n) {
    path = out_dir / (stem + "-" + std::to_string(n) + ".jsonl");
  }
  std::ofstream out(path);
  if (!out) throw EnvironmentError("cannot write " + path.string());
  write_scan_report(report, out);
  return path;
}

ScanReport read_scan_report(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ParameterError("cannot open scan report " + path.string());
  ScanReport report;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      const auto type = j.at("type").get<std::string>();
      if (type == "scan_header") {
        report.config = j.at("config");
        report.config_hash = j.value("config_hash", std::string{});
      } else if (type == "video") {
        report.records.push_back(scan_record_from_json(j));
      } else if (type == "summary") {
        report.total_s = j.contains("timing") ? j["timing"].value("total_s", 0.0) : 0.0;
      }
    } catch (const std::exception& e) {
      throw ParameterError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return report;
}

std::string report_without_timing(const ScanReport& report) {
  std::ostringstream raw;
  write_scan_report(report, raw);
  std::istringstream lines(raw.str());
  std::string line, out;
  while (std::getline(lines, line)) {
    json j = json::parse(line);
    strip_timing(j);
    out += j.dump() + '\n';
  }
  return out;
}

// --- evaluation -------------------------------------------------------------

namespace {

void compare_reference(EvaluationResult& result, const std::vector<ReferenceRow>* reference) {
  if (!reference) return;
  for (const auto& row : *reference) {
    const EvalReport* report = nullptr;
    if (row.method == result.random.method) report = &result.random;
    else if (row.method == result.all_positive.method) report = &result.all_positive;
    else if (result.tool && row.method == result.tool->method) report = &*result.tool;
    if (!report) continue;
    for (auto& note : divergences(*report, row)) result.divergences.push_back(std::move(note));
  }
}

}  // namespace

EvaluationResult run_baselines(const Outcomes& truth, std::size_t random_runs, std::uint64_t seed,
                               const std::vector<ReferenceRow>* reference) {
  EvaluationResult result;
  result.random = random_baseline(truth, 0.5, random_runs, seed);
  result.all_positive = all_positive_baseline(truth);
  compare_reference(result, reference);
  return result;
}

EvaluationResult run_evaluate(const ScanReport& scan, const std::vector<ManifestEntry>& manifest,
                              std::size_t random_runs, std::uint64_t seed,
                              const std::vector<ReferenceRow>* reference) {
  std::map<std::string, const ManifestEntry*> by_id;
  for (const auto& e : manifest) by_id[e.video_id] = &e;

  Outcomes predictions, truth;
  std::vector<std::string> unlabeled, skipped;
  for (const auto& rec : scan.records) {
    auto it = by_id.find(rec.video_id);
    if (it == by_id.end() || !it->second->truth_label) {
      unlabeled.push_back(rec.video_id);
      continue;
    }
    if (!rec.ok) {
      skipped.push_back(rec.video_id);
      continue;
    }
    predictions[rec.video_id] = rec.verdict.is_screencast;
    truth[rec.video_id] = *it->second->truth_label;
  }
  if (!unlabeled.empty()) {
    std::string ids;
    for (const auto& id : unlabeled) ids += (ids.empty() ? "" : ", ") + id;
    throw ParameterError("no truth label for: " + ids);
  }
  if (truth.empty()) throw ParameterError("no successfully scanned videos to evaluate");

  EvaluationResult result = run_baselines(truth, random_runs, seed, nullptr);
  result.tool = metrics(confusion(predictions, truth), kToolMethodName);
  result.vs_random = improvement(*result.tool, result.random);
  result.vs_all_positive = improvement(*result.tool, result.all_positive);
  result.skipped = std::move(skipped);
  compare_reference(result, reference);
  return result;
}

void write_evaluation(const EvaluationResult& result, std::ostream& out) {
  if (result.tool) out << to_json(*result.tool).dump() << '\n';
  out << to_json(result.random).dump() << '\n';
  out << to_json(result.all_positive).dump() << '\n';
  if (result.vs_random) out << to_json(*result.vs_random).dump() << '\n';
  if (result.vs_all_positive) out << to_json(*result.vs_all_positive).dump() << '\n';
  for (const auto& id : result.skipped) {
    out << json{{"type", "skipped"}, {"video_id", id}}.dump() << '\n';
  }
  for (const auto& note : result.divergences) {
    out << json{{"type", "divergence"}, {"note", note}}.dump() << '\n';
  }
}

std::string format_evaluation(const EvaluationResult& result) {
  std::vector<EvalReport> rows{result.random, result.all_positive};
  if (result.tool) rows.push_back(*result.tool);
  std::string out = format_table(rows);
  auto pct = [](const std::optional<double>& v) {
    if (!v) return std::string("n/a");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%+.2f%%", *v);
    return std::string(buf);
  };
  for (const auto* imp : {&result.vs_random, &result.vs_all_positive}) {
    if (!*imp) continue;
    const auto& i = **imp;
    out += "improvement over " + i.baseline + ": recall " + pct(i.recall_pct) + ", precision " +
           pct(i.precision_pct) + ", F1 " + pct(i.f1_pct) + "\n";
  }
  for (const auto& id : result.skipped) out += "skipped (scan failed): " + id + "\n";
  for (const auto& note : result.divergences) out += "DIVERGENCE " + note + "\n";
  return out;
}

}  // namespace castscan
