#include "castscan/config.hpp"

#include <fstream>
#include <nlohmann/json.hpp>
#include <thread>

#include "castscan/errors.hpp"
#include "castscan/frame_cache.hpp"

using nlohmann::json;

namespace castscan {

unsigned ScanConfig::effective_jobs() const {
  if (jobs > 0) return jobs;
  return std::max(1u, std::thread::hardware_concurrency());
}

void ScanConfig::validate() const {
  params.validate();
  classifier.validate();
  if (cap == 0) throw ParameterError("cap must be positive");
  if (random_runs == 0) throw ParameterError("random_runs must be positive");
}

void apply_config(ScanConfig& target, const json& flat) {
  if (!flat.is_object()) throw ParameterError("configuration must be a JSON object");
  // Work on a copy so a rejected overlay leaves the target untouched.
  ScanConfig config = target;
  try {
    for (const auto& [key, value] : flat.items()) {
      if (key == "interval_s") config.params.interval_s = value.get<double>();
      else if (key == "dup_threshold") config.params.dup_threshold = value.get<double>();
      else if (key == "min_run") config.params.min_run = value.get<std::size_t>();
      else if (key == "min_ratio") config.params.min_ratio = value.get<double>();
      else if (key == "classifier") {
        const auto timeout = config.classifier.timeout_s;
        const auto batch = config.classifier.batch_size;
        config.classifier = ClassifierSpec::parse(value.get<std::string>());
        config.classifier.timeout_s = timeout;
        config.classifier.batch_size = batch;
      } else if (key == "classifier_timeout_s") config.classifier.timeout_s = value.get<double>();
      else if (key == "classifier_batch_size") config.classifier.batch_size = value.get<std::size_t>();
      else if (key == "seed") config.seed = value.get<std::uint64_t>();
      else if (key == "jobs") config.jobs = value.get<unsigned>();
      else if (key == "cap") config.cap = value.get<std::size_t>();
      else if (key == "decoder") config.decoder_command = value.get<std::string>();
      else if (key == "cache_dir") {
        if (value.is_null()) config.cache_dir.reset();
        else config.cache_dir = value.get<std::string>();
      } else if (key == "random_runs") config.random_runs = value.get<std::size_t>();
      else throw ParameterError("unknown configuration key '" + key + "'");
    }
  } catch (const json::exception& e) {
    throw ParameterError(std::string("bad configuration value: ") + e.what());
  }
  config.validate();
  target = std::move(config);
}

ScanConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParameterError("cannot open configuration " + path.string());
  json flat;
  try {
    flat = json::parse(in);
  } catch (const json::exception& e) {
    throw ParameterError("configuration " + path.string() + ": " + e.what());
  }
  ScanConfig config;
  apply_config(config, flat);
  return config;
}

json to_json(const ScanConfig& config) {
  json j;
  j["interval_s"] = config.params.interval_s;
  j["dup_threshold"] = config.params.dup_threshold;
  j["min_run"] = config.params.min_run;
  j["min_ratio"] = config.params.min_ratio;
  j["classifier"] = config.classifier.describe();
  j["classifier_timeout_s"] = config.classifier.timeout_s;
  j["classifier_batch_size"] = config.classifier.batch_size;
  j["seed"] = config.seed;
  j["jobs"] = config.jobs;
  j["cap"] = config.cap;
  j["decoder"] = config.decoder_command;
  j["cache_dir"] = config.cache_dir ? json(config.cache_dir->string()) : json(nullptr);
  j["random_runs"] = config.random_runs;
  return j;
}

std::string config_hash(const ScanConfig& config) {
  return sha256_hex(to_json(config).dump()).substr(0, 12);
}

}  // namespace castscan
