#pragma once

#include <sys/types.h>

#include <chrono>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace castscan {

struct CommandResult {
  int exit_code = -1;
  /// Interleaved stdout and stderr.
  std::string output;
};

/// Runs argv to completion. argv[0] is resolved through PATH. Throws
/// EnvironmentError when the program cannot be started and TimeoutError when
/// `timeout` elapses (the child is killed).
CommandResult run_command(const std::vector<std::string>& argv,
                          std::optional<std::chrono::milliseconds> timeout = {});

/// Splits a command line using POSIX shell quoting rules.
std::vector<std::string> split_command_line(const std::string& line);

/// A child process with piped stdin/stdout/stderr for line-oriented
/// conversations. The destructor kills and reaps the child if still running.
class ChildProcess {
 public:
  using Clock = std::chrono::steady_clock;

  static ChildProcess spawn(const std::vector<std::string>& argv);

  ChildProcess(ChildProcess&& other) noexcept;
  ChildProcess& operator=(ChildProcess&& other) noexcept;
  ChildProcess(const ChildProcess&) = delete;
  ChildProcess& operator=(const ChildProcess&) = delete;
  ~ChildProcess();

  /// Throws WorkerCrashError if the child has closed its stdin.
  void write_all(std::string_view data);

  /// Next line from stdout without the trailing newline. nullopt on EOF.
  /// Throws TimeoutError when `deadline` passes first.
  std::optional<std::string> read_line(Clock::time_point deadline);

  void close_stdin();

  /// Waits up to `grace` for exit, then kills. Returns the exit status
  /// (128 + signal for signaled children).
  int wait(std::chrono::milliseconds grace);

  void kill();

  pid_t pid() const { return pid_; }

  /// Last few KiB the child wrote to stderr.
  const std::string& stderr_tail() const { return stderr_tail_; }

 private:
  ChildProcess() = default;
  void release() noexcept;
  void drain_stderr();

  pid_t pid_ = -1;
  int stdin_fd_ = -1;
  int stdout_fd_ = -1;
  int stderr_fd_ = -1;
  bool reaped_ = false;
  int status_ = 0;
  std::string buffer_;
  std::string stderr_tail_;
};

}  // namespace castscan
