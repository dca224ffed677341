#include "castscan/eval.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <nlohmann/json.hpp>
#include <random>
#include <sstream>

#include "castscan/errors.hpp"

using nlohmann::json;

namespace castscan {

ConfusionCounts confusion(const Outcomes& predictions, const Outcomes& truth) {
  std::vector<std::string> missing;
  for (const auto& [id, _] : truth) {
    if (!predictions.contains(id)) missing.push_back(id);
  }
  for (const auto& [id, _] : predictions) {
    if (!truth.contains(id)) missing.push_back(id);
  }
  if (!missing.empty()) {
    std::string ids;
    for (const auto& id : missing) ids += (ids.empty() ? "" : ", ") + id;
    throw ParameterError("prediction and truth sets differ on: " + ids);
  }

  ConfusionCounts c;
  for (const auto& [id, actual] : truth) {
    const bool predicted = predictions.at(id);
    if (predicted && actual) ++c.tp;
    else if (predicted) ++c.fp;
    else if (actual) ++c.fn;
    else ++c.tn;
  }
  return c;
}

namespace {

double safe_ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

double harmonic(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

}  // namespace

EvalReport metrics(const ConfusionCounts& counts, std::string method) {
  EvalReport r;
  r.method = std::move(method);
  r.counts = counts;
  r.precision = safe_ratio(counts.tp, counts.tp + counts.fp);
  r.recall = safe_ratio(counts.tp, counts.tp + counts.fn);
  r.f1 = harmonic(r.precision, r.recall);
  return r;
}

EvalReport all_positive_baseline(const Outcomes& truth) {
  if (truth.empty()) throw ParameterError("truth set is empty");
  Outcomes predictions;
  for (const auto& [id, _] : truth) predictions.emplace(id, true);
  return metrics(confusion(predictions, truth), "all_positive_baseline");
}

EvalReport random_baseline(const Outcomes& truth, double p, std::size_t runs,
                           std::uint64_t seed) {
  if (truth.empty()) throw ParameterError("truth set is empty");
  if (!(p >= 0.0 && p <= 1.0)) throw ParameterError("probability must be in [0,1]");
  if (runs < 1) throw ParameterError("runs must be at least 1");

  double sum_p = 0.0, sum_r = 0.0, sum_f = 0.0;
  for (std::size_t run = 0; run < runs; ++run) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(run), static_cast<std::uint32_t>(run >> 32)};
    std::mt19937_64 rng(seq);
    std::bernoulli_distribution coin(p);
    ConfusionCounts c;
    for (const auto& [id, actual] : truth) {
      const bool predicted = coin(rng);
      if (predicted && actual) ++c.tp;
      else if (predicted) ++c.fp;
      else if (actual) ++c.fn;
      else ++c.tn;
    }
    const auto m = metrics(c);
    sum_p += m.precision;
    sum_r += m.recall;
    sum_f += m.f1;
  }

  EvalReport r;
  r.method = "random_baseline";
  r.runs = runs;
  const auto n = static_cast<double>(runs);
  r.precision = sum_p / n;
  r.recall = sum_r / n;
  r.f1 = sum_f / n;
  return r;
}

Improvement improvement(const EvalReport& tool, const EvalReport& baseline) {
  auto pct = [](double ours, double theirs) -> std::optional<double> {
    if (theirs == 0.0) return std::nullopt;
    return (ours / theirs - 1.0) * 100.0;
  };
  return {baseline.method, pct(tool.recall, baseline.recall),
          pct(tool.precision, baseline.precision), pct(tool.f1, baseline.f1)};
}

std::vector<std::string> divergences(const EvalReport& report, const ReferenceRow& reference) {
  std::vector<std::string> notes;
  auto check = [&](const char* name, double got, double want) {
    if (std::abs(got - want) > reference.tolerance) {
      char buf[160];
      std::snprintf(buf, sizeof buf,
                    "%s: %s %.4f differs from reference %.4f (|delta| %.4f > %.4f)",
                    report.method.c_str(), name, got, want, std::abs(got - want),
                    reference.tolerance);
      notes.emplace_back(buf);
    }
  };
  check("recall", report.recall, reference.recall);
  check("precision", report.precision, reference.precision);
  check("f1", report.f1, reference.f1);
  return notes;
}

std::vector<ReferenceRow> load_reference_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParameterError("cannot open reference table " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ParameterError("reference table " + path.string() + ": " + e.what());
  }
  std::vector<ReferenceRow> rows;
  for (const auto& item : doc.at("rows")) {
    ReferenceRow row;
    row.method = item.at("method").get<std::string>();
    row.recall = item.at("recall").get<double>();
    row.precision = item.at("precision").get<double>();
    row.f1 = item.at("f1").get<double>();
    row.tolerance = item.value("tolerance", 0.005);
    rows.push_back(std::move(row));
  }
  return rows;
}

json to_json(const EvalReport& report) {
  json j;
  j["type"] = "evaluation";
  j["method"] = report.method;
  if (report.counts) {
    j["counts"] = {{"tp", report.counts->tp},
                   {"fp", report.counts->fp},
                   {"fn", report.counts->fn},
                   {"tn", report.counts->tn}};
  } else {
    j["counts"] = nullptr;
  }
  j["runs"] = report.runs;
  j["precision"] = report.precision;
  j["recall"] = report.recall;
  j["f1"] = report.f1;
  return j;
}

json to_json(const Improvement& imp) {
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  return {{"type", "improvement"},
          {"baseline", imp.baseline},
          {"recall_pct", opt(imp.recall_pct)},
          {"precision_pct", opt(imp.precision_pct)},
          {"f1_pct", opt(imp.f1_pct)}};
}

std::string format_table(const std::vector<EvalReport>& reports) {
  std::ostringstream out;
  char line[200];
  std::snprintf(line, sizeof line, "%-24s %5s %5s %5s %5s %8s %10s %8s\n", "method", "TP", "FP",
                "FN", "TN", "recall", "precision", "F1");
  out << line;
  for (const auto& r : reports) {
    if (r.counts) {
      std::snprintf(line, sizeof line, "%-24s %5zu %5zu %5zu %5zu %8.4f %10.4f %8.4f\n",
                    r.method.c_str(), r.counts->tp, r.counts->fp, r.counts->fn, r.counts->tn,
                    r.recall, r.precision, r.f1);
    } else {
      std::snprintf(line, sizeof line, "%-24s %23s %8.4f %10.4f %8.4f\n", r.method.c_str(),
                    ("mean of " + std::to_string(r.runs) + " runs").c_str(), r.recall,
                    r.precision, r.f1);
    }
    out << line;
  }
  return out.str();
}

}  // namespace castscan
