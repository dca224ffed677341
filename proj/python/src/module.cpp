#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include <nlohmann/json.hpp>

#include "castscan/config.hpp"
#include "castscan/decision.hpp"
#include "castscan/errors.hpp"
#include "castscan/eval.hpp"
#include "castscan/frame_io.hpp"
#include "castscan/manifest.hpp"
#include "castscan/scan.hpp"
#include "castscan/similarity.hpp"

namespace py = pybind11;
using namespace castscan;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;
using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

GrayFrame frame_from_array(const FloatArray& array) {
  if (array.ndim() != 2) throw ParameterError("frames must be 2-D arrays");
  GrayFrame f;
  f.height = static_cast<int>(array.shape(0));
  f.width = static_cast<int>(array.shape(1));
  f.pixels.assign(array.data(), array.data() + array.size());
  return f;
}

FloatArray array_from_frame(const GrayFrame& f) {
  FloatArray out({f.height, f.width});
  std::copy(f.pixels.begin(), f.pixels.end(), out.mutable_data());
  return out;
}

py::dict report_dict(const EvalReport& r) {
  py::dict d;
  d["method"] = r.method;
  d["precision"] = r.precision;
  d["recall"] = r.recall;
  d["f1"] = r.f1;
  d["runs"] = r.runs;
  if (r.counts) {
    d["tp"] = r.counts->tp;
    d["fp"] = r.counts->fp;
    d["fn"] = r.counts->fn;
    d["tn"] = r.counts->tn;
  }
  return d;
}

std::vector<FrameAnnotation> annotations_from(const py::sequence& items) {
  std::vector<FrameAnnotation> out;
  for (const auto& item : items) {
    FrameAnnotation a;
    a.index = out.size();
    if (item.is_none()) {
      a.duplicate = true;
    } else {
      a.label = FrameLabel{parse_label(item.cast<std::string>()), 1.0};
    }
    out.push_back(a);
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_castscan, m) {
  m.doc() = "Native core of castscan.";

  // Translators are tried newest first, so the base class goes first.
  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<DecodeError>(m, "DecodeError", base.ptr());
  py::register_exception<ParameterError>(m, "ParameterError", PyExc_ValueError);

  m.attr("FRAME_SIDE") = kFrameSide;
  m.attr("DEFAULT_DUPLICATE_THRESHOLD") = kDefaultDuplicateThreshold;

  m.def("sample_schedule", &sample_schedule, py::arg("duration_s"), py::arg("interval_s") = 30.0,
        "Sampling instants 0, k, 2k, ... up to the duration.");

  m.def(
      "load_frame", [](const std::filesystem::path& path) { return array_from_frame(load_frame(path)); },
      py::arg("path"), "Decode an image to a 300x300 float32 luminance array in [0, 1].");

  m.def(
      "nrmse",
      [](const DoubleArray& reference, const DoubleArray& other) {
        if (reference.size() != other.size()) throw ParameterError("arrays differ in size");
        return nrmse<double>(std::span<const double>(reference.data(), reference.size()),
                             std::span<const double>(other.data(), other.size()));
      },
      py::arg("reference"), py::arg("other"));

  m.def(
      "mark_duplicates",
      [](const std::vector<FloatArray>& arrays, double threshold) {
        std::vector<GrayFrame> frames;
        for (const auto& a : arrays) frames.push_back(frame_from_array(a));
        const auto marking = mark_duplicates(std::span<const GrayFrame>(frames), threshold);
        py::dict d;
        d["duplicate"] = marking.duplicate;
        d["reference_index"] = marking.reference_index;
        d["score"] = marking.score;
        return d;
      },
      py::arg("frames"), py::arg("threshold") = kDefaultDuplicateThreshold,
      "Mark near-duplicates against the running reference frame.");

  m.def(
      "decide",
      [](const py::sequence& labels, std::size_t min_run, double min_ratio) {
        DecisionParams p;
        p.min_run = min_run;
        p.min_ratio = min_ratio;
        const auto v = decide(annotations_from(labels), p);
        py::dict d;
        d["is_screencast"] = v.is_screencast;
        d["n_ide"] = v.n_ide;
        d["n_info"] = v.n_info;
        d["longest_run"] = v.longest_run;
        d["ratio"] = v.ratio;
        return d;
      },
      py::arg("labels"), py::arg("min_run") = 4, py::arg("min_ratio") = 0.5,
      "Video verdict from per-frame labels; None marks a duplicate frame.");

  m.def(
      "metrics",
      [](std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn) {
        return report_dict(metrics({tp, fp, fn, tn}));
      },
      py::arg("tp"), py::arg("fp"), py::arg("fn"), py::arg("tn") = 0);

  m.def(
      "confusion",
      [](const Outcomes& predictions, const Outcomes& truth) {
        return report_dict(metrics(confusion(predictions, truth)));
      },
      py::arg("predictions"), py::arg("truth"));

  m.def(
      "all_positive_baseline", [](const Outcomes& truth) { return report_dict(all_positive_baseline(truth)); },
      py::arg("truth"));

  m.def(
      "random_baseline",
      [](const Outcomes& truth, double p, std::size_t runs, std::uint64_t seed) {
        return report_dict(random_baseline(truth, p, runs, seed));
      },
      py::arg("truth"), py::arg("p") = 0.5, py::arg("runs") = 20, py::arg("seed") = 0);

  m.def(
      "scan_jsonl",
      [](const std::filesystem::path& manifest, const std::string& config_json) {
        ScanConfig config;
        apply_config(config, nlohmann::json::parse(config_json));
        const auto entries = load_manifest(manifest);
        ScanReport report;
        {
          py::gil_scoped_release release;
          report = run_scan(entries, config);
        }
        std::ostringstream out;
        write_scan_report(report, out);
        return out.str();
      },
      py::arg("manifest"), py::arg("config_json") = "{}",
      "Scan a manifest and return the report as JSON Lines.");
}
