#include "castscan/worker.hpp"

#include <chrono>
#include <map>
#include <nlohmann/json.hpp>

#include "castscan/errors.hpp"
#include "castscan/frame_cache.hpp"

using nlohmann::json;
using nlohmann::ordered_json;

namespace castscan {

WorkerMessage WorkerMessage::hello(int version) {
  WorkerMessage m;
  m.type = Type::hello;
  m.protocol_version = version;
  return m;
}

WorkerMessage WorkerMessage::classify(std::int64_t id, std::string frame_path) {
  WorkerMessage m;
  m.type = Type::classify;
  m.id = id;
  m.frame_path = std::move(frame_path);
  return m;
}

WorkerMessage WorkerMessage::result(std::int64_t id, FrameLabel label) {
  WorkerMessage m;
  m.type = Type::result;
  m.id = id;
  m.label = label;
  return m;
}

WorkerMessage WorkerMessage::error(std::int64_t id, std::string message) {
  WorkerMessage m;
  m.type = Type::error;
  m.id = id;
  m.message = std::move(message);
  return m;
}

WorkerMessage WorkerMessage::shutdown() {
  WorkerMessage m;
  m.type = Type::shutdown;
  return m;
}

std::string encode(const WorkerMessage& msg) {
  ordered_json j;
  switch (msg.type) {
    case WorkerMessage::Type::hello:
      j["type"] = "hello";
      j["protocol_version"] = msg.protocol_version;
      break;
    case WorkerMessage::Type::classify:
      j["type"] = "classify";
      j["id"] = msg.id;
      j["frame_path"] = msg.frame_path;
      break;
    case WorkerMessage::Type::result:
      j["type"] = "result";
      j["id"] = msg.id;
      j["label"] = std::string(to_string(msg.label.value_or(FrameLabel{}).label));
      j["confidence"] = msg.label.value_or(FrameLabel{}).confidence;
      break;
    case WorkerMessage::Type::error:
      j["type"] = "error";
      j["id"] = msg.id;
      j["message"] = msg.message;
      break;
    case WorkerMessage::Type::shutdown:
      j["type"] = "shutdown";
      break;
  }
  return j.dump();
}

WorkerMessage decode(std::string_view line) {
  json j = json::parse(line, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded() || !j.is_object()) {
    throw ProtocolError("malformed worker record: " + std::string(line));
  }
  try {
    const auto type = j.at("type").get<std::string>();
    if (type == "hello") return WorkerMessage::hello(j.at("protocol_version").get<int>());
    if (type == "classify") {
      return WorkerMessage::classify(j.at("id").get<std::int64_t>(),
                                     j.at("frame_path").get<std::string>());
    }
    if (type == "result") {
      const auto label_text = j.at("label").get<std::string>();
      if (label_text != "ide" && label_text != "non_ide") {
        throw ProtocolError("invalid label '" + label_text + "'");
      }
      const double confidence = j.at("confidence").get<double>();
      if (!(confidence >= 0.0 && confidence <= 1.0)) {
        throw ProtocolError("confidence outside [0,1]");
      }
      return WorkerMessage::result(j.at("id").get<std::int64_t>(),
                                   {parse_label(label_text), confidence});
    }
    if (type == "error") {
      return WorkerMessage::error(j.at("id").get<std::int64_t>(), j.value("message", std::string{}));
    }
    if (type == "shutdown") return WorkerMessage::shutdown();
    throw ProtocolError("unknown record type '" + type + "'");
  } catch (const json::exception& e) {
    throw ProtocolError("malformed worker record (" + std::string(e.what()) +
                        "): " + std::string(line));
  }
}

namespace {

ChildProcess::Clock::time_point deadline_after(double seconds) {
  return ChildProcess::Clock::now() +
         std::chrono::duration_cast<ChildProcess::Clock::duration>(
             std::chrono::duration<double>(seconds));
}

std::string with_stderr(std::string what, const ChildProcess& child) {
  if (!child.stderr_tail().empty()) what += "; worker stderr: " + child.stderr_tail();
  return what;
}

}  // namespace

WorkerSession WorkerSession::spawn(const ClassifierSpec& spec) {
  if (spec.kind != ClassifierKind::worker) {
    throw ParameterError("spawn_worker needs a worker classifier spec");
  }
  spec.validate();
  const auto argv = split_command_line(spec.command);
  if (argv.empty()) throw ParameterError("worker command is empty");
  ChildProcess child = ChildProcess::spawn(argv);

  std::optional<std::string> line;
  try {
    line = child.read_line(deadline_after(spec.timeout_s));
  } catch (const TimeoutError&) {
    throw TimeoutError("worker sent no hello within " + std::to_string(spec.timeout_s) + " s");
  }
  if (!line) {
    child.wait(std::chrono::milliseconds(500));
    throw ProtocolError(with_stderr("worker exited before the hello handshake", child));
  }
  const WorkerMessage hello = decode(*line);
  if (hello.type != WorkerMessage::Type::hello) {
    throw ProtocolError("expected hello from worker, got: " + *line);
  }
  if (hello.protocol_version != kProtocolVersion) {
    throw ProtocolError("worker speaks protocol_version " + std::to_string(hello.protocol_version) +
                        ", expected " + std::to_string(kProtocolVersion));
  }
  return WorkerSession(std::move(child), spec.timeout_s);
}

WorkerSession::~WorkerSession() {
  if (alive_ && child_.pid() > 0) {
    try {
      shutdown();
    } catch (...) {
    }
  }
}

std::vector<FrameLabel> WorkerSession::classify_paths(std::span<const std::filesystem::path> paths) {
  if (!alive_) throw WorkerCrashError("worker session is closed");
  if (paths.empty()) return {};

  std::map<std::int64_t, std::size_t> pending;
  std::string request;
  for (std::size_t i = 0; i < paths.size(); ++i) {
    const auto id = next_id_++;
    pending.emplace(id, i);
    request += encode(WorkerMessage::classify(id, paths[i].string()));
    request += '\n';
  }

  try {
    child_.write_all(request);
  } catch (const WorkerCrashError&) {
    alive_ = false;
    throw;
  }
  ++requests_;

  std::vector<std::optional<FrameLabel>> labels(paths.size());
  const auto deadline = deadline_after(timeout_s_);
  while (!pending.empty()) {
    std::optional<std::string> line;
    try {
      line = child_.read_line(deadline);
    } catch (const TimeoutError&) {
      alive_ = false;
      child_.kill();
      throw TimeoutError("worker timed out classifying frame " +
                         paths[pending.begin()->second].string());
    }
    if (!line) {
      alive_ = false;
      child_.wait(std::chrono::milliseconds(500));
      throw WorkerCrashError(with_stderr(
          "worker exited while classifying " + paths[pending.begin()->second].string(), child_));
    }
    if (line->empty()) continue;

    WorkerMessage msg;
    try {
      msg = decode(*line);
    } catch (const ProtocolError&) {
      alive_ = false;
      child_.kill();
      throw;
    }
    auto it = pending.find(msg.id);
    if ((msg.type != WorkerMessage::Type::result && msg.type != WorkerMessage::Type::error) ||
        it == pending.end()) {
      alive_ = false;
      child_.kill();
      throw ProtocolError("unexpected worker record: " + *line);
    }
    const std::size_t slot = it->second;
    if (msg.type == WorkerMessage::Type::error) {
      // The worker stays usable; drain the rest of this request first.
      std::string failure = "worker failed on frame " + paths[slot].string() + ": " + msg.message;
      pending.erase(it);
      while (!pending.empty()) {
        auto rest = child_.read_line(deadline);
        if (!rest) {
          alive_ = false;
          break;
        }
        if (rest->empty()) continue;
        pending.erase(decode(*rest).id);
      }
      throw ClassifyError(failure);
    }
    labels[slot] = msg.label;
    pending.erase(it);
  }

  std::vector<FrameLabel> out;
  out.reserve(labels.size());
  for (auto& l : labels) out.push_back(*l);
  return out;
}

int WorkerSession::shutdown() {
  if (!alive_) return child_.wait(std::chrono::milliseconds(0));
  alive_ = false;
  try {
    child_.write_all(encode(WorkerMessage::shutdown()) + "\n");
  } catch (const WorkerCrashError&) {
  }
  child_.close_stdin();
  return child_.wait(std::chrono::milliseconds(2000));
}

struct WorkerClassifier::Scratch {
  TempDir dir{"castscan-frames"};
  std::size_t counter = 0;
};

WorkerClassifier::WorkerClassifier(ClassifierSpec spec) : spec_(std::move(spec)) {
  if (spec_.kind != ClassifierKind::worker) {
    throw ParameterError("WorkerClassifier needs a worker classifier spec");
  }
  spec_.validate();
}

WorkerClassifier::~WorkerClassifier() = default;

std::size_t WorkerClassifier::requests_sent() const {
  std::lock_guard lock(mutex_);
  return finished_requests_ + (session_ ? session_->requests_sent() : 0);
}

std::size_t WorkerClassifier::restarts() const {
  std::lock_guard lock(mutex_);
  return restarts_;
}

WorkerSession& WorkerClassifier::session() {
  if (session_ && !session_->alive()) {
    finished_requests_ += session_->requests_sent();
    session_.reset();
  }
  if (!session_) session_.emplace(WorkerSession::spawn(spec_));
  return *session_;
}

std::vector<FrameLabel> WorkerClassifier::run_batches(std::span<const std::filesystem::path> paths,
                                                      std::span<const std::size_t> indices) {
  std::vector<FrameLabel> out;
  out.reserve(paths.size());
  for (std::size_t begin = 0; begin < paths.size(); begin += spec_.batch_size) {
    const auto count = std::min(spec_.batch_size, paths.size() - begin);
    const auto chunk = paths.subspan(begin, count);
    std::vector<FrameLabel> labels;
    try {
      labels = session().classify_paths(chunk);
    } catch (const WorkerCrashError& first) {
      if (restarts_ >= 1) {
        throw WorkerCrashError(std::string("worker crashed again, giving up (frame ") +
                               std::to_string(indices[begin]) + "): " + first.what());
      }
      ++restarts_;
      try {
        labels = session().classify_paths(chunk);
      } catch (const WorkerCrashError& second) {
        throw WorkerCrashError(std::string("worker crashed again after restart (frame ") +
                               std::to_string(indices[begin]) + "): " + second.what());
      }
    }
    out.insert(out.end(), labels.begin(), labels.end());
  }
  return out;
}

std::vector<FrameLabel> WorkerClassifier::classify_frames(std::string_view,
                                                          std::span<const FrameView> frames) {
  std::lock_guard lock(mutex_);
  std::vector<std::filesystem::path> paths;
  std::vector<std::size_t> indices;
  paths.reserve(frames.size());
  for (const GrayFrame& f : frames) {
    indices.push_back(f.index);
    if (!f.source_path.empty()) {
      paths.push_back(f.source_path);
      continue;
    }
    if (!scratch_) scratch_ = std::make_unique<Scratch>();
    auto path = scratch_->dir.path() / ("frame_" + std::to_string(scratch_->counter++) + ".png");
    save_frame(f, path);
    paths.push_back(std::move(path));
  }
  return run_batches(paths, indices);
}

FrameLabel WorkerClassifier::classify_path(std::string_view, const std::filesystem::path& frame_path,
                                           std::size_t index) {
  std::lock_guard lock(mutex_);
  const std::filesystem::path paths[] = {frame_path};
  const std::size_t indices[] = {index};
  return run_batches(paths, indices).front();
}

}  // namespace castscan
