#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "castscan/classifier.hpp"
#include "castscan/subprocess.hpp"

namespace castscan {

inline constexpr int kProtocolVersion = 1;

/// One record of the newline-delimited worker protocol.
struct WorkerMessage {
  enum class Type { hello, classify, result, error, shutdown };

  Type type = Type::hello;
  std::int64_t id = 0;
  std::string frame_path;
  std::optional<FrameLabel> label;
  std::string message;
  int protocol_version = 0;

  static WorkerMessage hello(int version = kProtocolVersion);
  static WorkerMessage classify(std::int64_t id, std::string frame_path);
  static WorkerMessage result(std::int64_t id, FrameLabel label);
  static WorkerMessage error(std::int64_t id, std::string message);
  static WorkerMessage shutdown();
};

/// Serializes to a single line (no trailing newline) with keys in protocol
/// order, e.g. `{"type":"classify","id":3,"frame_path":"/tmp/f.png"}`.
std::string encode(const WorkerMessage& msg);

/// Parses one line. Throws ProtocolError on malformed records, unknown
/// types, bad labels or confidences outside [0,1].
WorkerMessage decode(std::string_view line);

/// A running worker process that has completed the hello handshake.
class WorkerSession {
 public:
  /// Starts the worker and waits up to spec.timeout_s for its hello.
  /// Throws EnvironmentError if it cannot start, ProtocolError on a missing
  /// or mismatched handshake and TimeoutError if it stays silent.
  static WorkerSession spawn(const ClassifierSpec& spec);

  WorkerSession(WorkerSession&&) noexcept = default;
  WorkerSession& operator=(WorkerSession&&) noexcept = default;
  ~WorkerSession();

  /// Sends every path as one request (a single write of classify records)
  /// and waits for all results, which may arrive in any order. Labels come
  /// back in input order.
  std::vector<FrameLabel> classify_paths(std::span<const std::filesystem::path> paths);

  /// Sends shutdown and waits briefly for a clean exit. Returns the exit
  /// status.
  int shutdown();

  std::size_t requests_sent() const { return requests_; }
  bool alive() const { return alive_; }
  pid_t pid() const { return child_.pid(); }

 private:
  WorkerSession(ChildProcess child, double timeout_s)
      : child_(std::move(child)), timeout_s_(timeout_s) {}

  ChildProcess child_;
  double timeout_s_;
  std::int64_t next_id_ = 1;
  std::size_t requests_ = 0;
  bool alive_ = true;
};

/// Convenience wrapper matching the gateway's spawn operation.
inline WorkerSession spawn_worker(const ClassifierSpec& spec) { return WorkerSession::spawn(spec); }

/// Gateway classifier backed by an external worker process. Frames travel
/// by file path; frames held only in memory are written to a scratch PNG
/// first. Calls are serialized. A crashed worker is restarted once; a
/// second crash is fatal for this classifier.
class WorkerClassifier final : public FrameClassifier {
 public:
  explicit WorkerClassifier(ClassifierSpec spec);
  ~WorkerClassifier() override;

  ClassifierKind kind() const override { return ClassifierKind::worker; }

  FrameLabel classify_path(std::string_view video_id, const std::filesystem::path& frame_path,
                           std::size_t index = 0) override;

  /// Wire requests sent across all sessions so far.
  std::size_t requests_sent() const;
  std::size_t restarts() const;

 protected:
  std::vector<FrameLabel> classify_frames(std::string_view video_id,
                                          std::span<const FrameView> frames) override;

 private:
  struct Scratch;

  std::vector<FrameLabel> run_batches(std::span<const std::filesystem::path> paths,
                                      std::span<const std::size_t> indices);
  WorkerSession& session();

  ClassifierSpec spec_;
  mutable std::mutex mutex_;
  std::optional<WorkerSession> session_;
  std::unique_ptr<Scratch> scratch_;
  std::size_t finished_requests_ = 0;
  std::size_t restarts_ = 0;
};

}  // namespace castscan
