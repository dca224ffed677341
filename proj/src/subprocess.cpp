#include "castscan/subprocess.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <cerrno>
#include <cstring>
#include <thread>
#include <utility>

#include "castscan/errors.hpp"

extern char** environ;

namespace castscan {

namespace {

constexpr std::size_t kStderrTailLimit = 8192;

struct Pipe {
  int read_end = -1;
  int write_end = -1;
};

Pipe make_pipe() {
  int fds[2];
  if (::pipe2(fds, O_CLOEXEC) != 0) {
    throw EnvironmentError(std::string("pipe2 failed: ") + std::strerror(errno));
  }
  return {fds[0], fds[1]};
}

void close_fd(int& fd) noexcept {
  if (fd >= 0) {
    ::close(fd);
    fd = -1;
  }
}

int decode_status(int status) {
  if (WIFEXITED(status)) return WEXITSTATUS(status);
  if (WIFSIGNALED(status)) return 128 + WTERMSIG(status);
  return -1;
}

std::string describe(const std::vector<std::string>& argv) {
  std::string out;
  for (const auto& arg : argv) {
    if (!out.empty()) out += ' ';
    out += arg;
  }
  return out;
}

/// posix_spawnp with the given fds dup'ed onto 0, 1, 2 (-1 keeps ours).
pid_t spawn_with(const std::vector<std::string>& argv, int in_fd, int out_fd,
                 int err_fd) {
  if (argv.empty()) throw ParameterError("empty command");

  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  if (in_fd >= 0) posix_spawn_file_actions_adddup2(&actions, in_fd, 0);
  if (out_fd >= 0) posix_spawn_file_actions_adddup2(&actions, out_fd, 1);
  if (err_fd >= 0) posix_spawn_file_actions_adddup2(&actions, err_fd, 2);

  std::vector<char*> args;
  args.reserve(argv.size() + 1);
  for (const auto& arg : argv) args.push_back(const_cast<char*>(arg.c_str()));
  args.push_back(nullptr);

  pid_t pid = -1;
  int rc = ::posix_spawnp(&pid, args[0], &actions, nullptr, args.data(), environ);
  posix_spawn_file_actions_destroy(&actions);
  if (rc != 0) {
    throw EnvironmentError("cannot start '" + describe(argv) +
                           "': " + std::strerror(rc));
  }
  return pid;
}

}  // namespace

std::vector<std::string> split_command_line(const std::string& line) {
  std::vector<std::string> words;
  std::string word;
  bool in_word = false;
  enum class Quote { none, single, dbl } quote = Quote::none;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quote == Quote::single) {
      if (c == '\'') quote = Quote::none;
      else word += c;
      continue;
    }
    if (quote == Quote::dbl) {
      if (c == '"') {
        quote = Quote::none;
      } else if (c == '\\' && i + 1 < line.size() &&
                 std::strchr("\"\\$`", line[i + 1]) != nullptr) {
        word += line[++i];
      } else {
        word += c;
      }
      continue;
    }
    if (c == ' ' || c == '\t' || c == '\n') {
      if (in_word) words.push_back(std::exchange(word, {}));
      in_word = false;
      continue;
    }
    in_word = true;
    if (c == '\'') quote = Quote::single;
    else if (c == '"') quote = Quote::dbl;
    else if (c == '\\' && i + 1 < line.size()) word += line[++i];
    else word += c;
  }
  if (quote != Quote::none) throw ParameterError("unterminated quote in command: " + line);
  if (in_word) words.push_back(std::move(word));
  return words;
}

CommandResult run_command(const std::vector<std::string>& argv,
                          std::optional<std::chrono::milliseconds> timeout) {
  Pipe out = make_pipe();
  pid_t pid;
  try {
    pid = spawn_with(argv, -1, out.write_end, out.write_end);
  } catch (...) {
    close_fd(out.read_end);
    close_fd(out.write_end);
    throw;
  }
  close_fd(out.write_end);

  const auto deadline =
      timeout ? std::chrono::steady_clock::now() + *timeout
              : std::chrono::steady_clock::time_point::max();
  CommandResult result;
  std::array<char, 4096> chunk{};
  bool timed_out = false;
  for (;;) {
    int wait_ms = -1;
    if (timeout) {
      auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
          deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) {
        timed_out = true;
        break;
      }
      wait_ms = static_cast<int>(left.count());
    }
    pollfd pfd{out.read_end, POLLIN, 0};
    int rc = ::poll(&pfd, 1, wait_ms);
    if (rc < 0 && errno == EINTR) continue;
    if (rc == 0) {
      timed_out = true;
      break;
    }
    ssize_t n = ::read(out.read_end, chunk.data(), chunk.size());
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) break;
    result.output.append(chunk.data(), static_cast<std::size_t>(n));
  }
  close_fd(out.read_end);

  if (timed_out) ::kill(pid, SIGKILL);
  int status = 0;
  while (::waitpid(pid, &status, 0) < 0 && errno == EINTR) {
  }
  if (timed_out) {
    throw TimeoutError("command timed out: " + describe(argv));
  }
  result.exit_code = decode_status(status);
  return result;
}

ChildProcess ChildProcess::spawn(const std::vector<std::string>& argv) {
  Pipe in = make_pipe();
  Pipe out = make_pipe();
  Pipe err = make_pipe();
  ChildProcess child;
  try {
    child.pid_ = spawn_with(argv, in.read_end, out.write_end, err.write_end);
  } catch (...) {
    for (int* fd : {&in.read_end, &in.write_end, &out.read_end, &out.write_end,
                    &err.read_end, &err.write_end}) {
      close_fd(*fd);
    }
    throw;
  }
  close_fd(in.read_end);
  close_fd(out.write_end);
  close_fd(err.write_end);
  child.stdin_fd_ = in.write_end;
  child.stdout_fd_ = out.read_end;
  child.stderr_fd_ = err.read_end;
  ::fcntl(child.stderr_fd_, F_SETFL, ::fcntl(child.stderr_fd_, F_GETFL) | O_NONBLOCK);
  return child;
}

ChildProcess::ChildProcess(ChildProcess&& other) noexcept { *this = std::move(other); }

ChildProcess& ChildProcess::operator=(ChildProcess&& other) noexcept {
  if (this != &other) {
    release();
    pid_ = std::exchange(other.pid_, -1);
    stdin_fd_ = std::exchange(other.stdin_fd_, -1);
    stdout_fd_ = std::exchange(other.stdout_fd_, -1);
    stderr_fd_ = std::exchange(other.stderr_fd_, -1);
    reaped_ = std::exchange(other.reaped_, false);
    status_ = other.status_;
    buffer_ = std::move(other.buffer_);
    stderr_tail_ = std::move(other.stderr_tail_);
  }
  return *this;
}

ChildProcess::~ChildProcess() { release(); }

void ChildProcess::release() noexcept {
  if (pid_ > 0 && !reaped_) {
    ::kill(pid_, SIGKILL);
    int status = 0;
    while (::waitpid(pid_, &status, 0) < 0 && errno == EINTR) {
    }
  }
  close_fd(stdin_fd_);
  close_fd(stdout_fd_);
  close_fd(stderr_fd_);
  pid_ = -1;
  reaped_ = false;
}

void ChildProcess::write_all(std::string_view data) {
  if (stdin_fd_ < 0) throw WorkerCrashError("worker stdin is closed");

  // Keep a dead reader from killing us with SIGPIPE; EPIPE is reported
  // instead and any pending signal is consumed before unblocking.
  sigset_t pipe_set, old_set;
  sigemptyset(&pipe_set);
  sigaddset(&pipe_set, SIGPIPE);
  pthread_sigmask(SIG_BLOCK, &pipe_set, &old_set);

  int error = 0;
  while (!data.empty()) {
    ssize_t n = ::write(stdin_fd_, data.data(), data.size());
    if (n < 0) {
      if (errno == EINTR) continue;
      error = errno;
      break;
    }
    data.remove_prefix(static_cast<std::size_t>(n));
  }

  if (error == EPIPE) {
    timespec zero{0, 0};
    sigtimedwait(&pipe_set, nullptr, &zero);
  }
  pthread_sigmask(SIG_SETMASK, &old_set, nullptr);

  if (error == EPIPE) throw WorkerCrashError("worker closed its input");
  if (error != 0) {
    throw WorkerCrashError(std::string("write to worker failed: ") +
                           std::strerror(error));
  }
}

void ChildProcess::drain_stderr() {
  if (stderr_fd_ < 0) return;
  std::array<char, 4096> chunk{};
  for (;;) {
    ssize_t n = ::read(stderr_fd_, chunk.data(), chunk.size());
    if (n < 0 && errno == EINTR) continue;
    if (n == 0) {
      close_fd(stderr_fd_);
      return;
    }
    if (n < 0) return;
    stderr_tail_.append(chunk.data(), static_cast<std::size_t>(n));
    if (stderr_tail_.size() > kStderrTailLimit) {
      stderr_tail_.erase(0, stderr_tail_.size() - kStderrTailLimit);
    }
  }
}

std::optional<std::string> ChildProcess::read_line(Clock::time_point deadline) {
  std::array<char, 4096> chunk{};
  for (;;) {
    if (auto pos = buffer_.find('\n'); pos != std::string::npos) {
      std::string line = buffer_.substr(0, pos);
      buffer_.erase(0, pos + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      return line;
    }
    if (stdout_fd_ < 0) {
      if (buffer_.empty()) return std::nullopt;
      return std::exchange(buffer_, {});
    }

    auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - Clock::now());
    if (left.count() <= 0) throw TimeoutError("worker did not answer in time");

    std::array<pollfd, 2> fds{pollfd{stdout_fd_, POLLIN, 0},
                              pollfd{stderr_fd_, POLLIN, 0}};
    int nfds = stderr_fd_ >= 0 ? 2 : 1;
    int rc = ::poll(fds.data(), static_cast<nfds_t>(nfds),
                    static_cast<int>(std::min<long long>(left.count(), 1 << 30)));
    if (rc < 0) {
      if (errno == EINTR) continue;
      throw WorkerCrashError(std::string("poll failed: ") + std::strerror(errno));
    }
    if (rc == 0) continue;
    if (nfds == 2 && fds[1].revents != 0) drain_stderr();
    if (fds[0].revents == 0) continue;

    ssize_t n = ::read(stdout_fd_, chunk.data(), chunk.size());
    if (n < 0) {
      if (errno == EINTR) continue;
      close_fd(stdout_fd_);
      continue;
    }
    if (n == 0) {
      drain_stderr();
      close_fd(stdout_fd_);
      continue;
    }
    buffer_.append(chunk.data(), static_cast<std::size_t>(n));
  }
}

void ChildProcess::close_stdin() { close_fd(stdin_fd_); }

int ChildProcess::wait(std::chrono::milliseconds grace) {
  if (pid_ <= 0) return -1;
  if (reaped_) return decode_status(status_);
  const auto deadline = Clock::now() + grace;
  for (;;) {
    pid_t rc = ::waitpid(pid_, &status_, WNOHANG);
    if (rc == pid_) break;
    if (rc < 0 && errno != EINTR) return -1;
    if (Clock::now() >= deadline) {
      ::kill(pid_, SIGKILL);
      while (::waitpid(pid_, &status_, 0) < 0 && errno == EINTR) {
      }
      break;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  reaped_ = true;
  drain_stderr();
  return decode_status(status_);
}

void ChildProcess::kill() {
  if (pid_ > 0 && !reaped_) {
    ::kill(pid_, SIGKILL);
    wait(std::chrono::milliseconds(1000));
  }
}

}  // namespace castscan
