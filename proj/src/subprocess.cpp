#include "hpo/subprocess.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include <fmt/format.h>

namespace hpo {

TimeoutError::TimeoutError(double seconds)
    : Error("Timeout", ErrorCategory::evaluation, fmt::format("evaluation timed out after {} s", seconds)),
      seconds_(seconds) {}

ProcessError::ProcessError(int exit_code, std::string stderr_text, const std::string& what)
    : Error("ProcessError", ErrorCategory::evaluation,
            stderr_text.empty() ? what : what + "\nstderr:\n" + stderr_text),
      exit_code_(exit_code),
      stderr_text_(std::move(stderr_text)) {}

ProtocolError::ProtocolError(std::string raw_line, const std::string& why)
    : Error("ProtocolError", ErrorCategory::llm, fmt::format("{}: {}", why, raw_line)),
      raw_line_(std::move(raw_line)) {}

namespace {

void close_fd(int& fd) {
  if (fd >= 0) ::close(fd);
  fd = -1;
}

}  // namespace

Subprocess::Subprocess(std::vector<std::string> argv, std::string workdir) {
  if (argv.empty()) throw ConfigError("empty command");
  ::signal(SIGPIPE, SIG_IGN);

  int in_pipe[2], out_pipe[2], err_pipe[2];
  if (::pipe2(in_pipe, O_CLOEXEC) || ::pipe2(out_pipe, O_CLOEXEC) || ::pipe2(err_pipe, O_CLOEXEC)) {
    throw ProcessError(-1, {}, fmt::format("pipe: {}", std::strerror(errno)));
  }
  // Reports exec failure back to the parent; closes on successful exec.
  int exec_pipe[2];
  if (::pipe2(exec_pipe, O_CLOEXEC)) throw ProcessError(-1, {}, fmt::format("pipe: {}", std::strerror(errno)));

  std::vector<char*> cargv;
  for (auto& a : argv) cargv.push_back(a.data());
  cargv.push_back(nullptr);

  pid_ = ::fork();
  if (pid_ < 0) throw ProcessError(-1, {}, fmt::format("fork: {}", std::strerror(errno)));
  if (pid_ == 0) {
    ::setpgid(0, 0);
    ::dup2(in_pipe[0], STDIN_FILENO);
    ::dup2(out_pipe[1], STDOUT_FILENO);
    ::dup2(err_pipe[1], STDERR_FILENO);
    if (!workdir.empty() && ::chdir(workdir.c_str()) != 0) {
      int e = errno;
      [[maybe_unused]] auto n = ::write(exec_pipe[1], &e, sizeof(e));
      ::_exit(127);
    }
    ::execvp(cargv[0], cargv.data());
    int e = errno;
    [[maybe_unused]] auto n = ::write(exec_pipe[1], &e, sizeof(e));
    ::_exit(127);
  }

  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
  ::close(err_pipe[1]);
  ::close(exec_pipe[1]);
  stdin_fd_ = in_pipe[1];
  stdout_fd_ = out_pipe[0];
  stderr_fd_ = err_pipe[0];
  ::fcntl(stderr_fd_, F_SETFL, O_NONBLOCK);

  int child_errno = 0;
  const auto n = ::read(exec_pipe[0], &child_errno, sizeof(child_errno));
  ::close(exec_pipe[0]);
  if (n == sizeof(child_errno)) {
    reap(true);
    throw ProcessError(127, {}, fmt::format("cannot start '{}': {}", argv[0], std::strerror(child_errno)));
  }
}

Subprocess::~Subprocess() {
  kill();
  close_fd(stdin_fd_);
  close_fd(stdout_fd_);
  close_fd(stderr_fd_);
}

void Subprocess::write_line(const std::string& line) {
  std::string data = line + "\n";
  std::size_t off = 0;
  while (off < data.size()) {
    const auto n = ::write(stdin_fd_, data.data() + off, data.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      const int code = reap(false);
      drain_stderr();
      throw ProcessError(code, stderr_, fmt::format("write to child failed: {}", std::strerror(errno)));
    }
    off += static_cast<std::size_t>(n);
  }
}

void Subprocess::drain_stderr() {
  if (stderr_fd_ < 0) return;
  char buf[4096];
  while (true) {
    const auto n = ::read(stderr_fd_, buf, sizeof(buf));
    if (n > 0) {
      stderr_.append(buf, static_cast<std::size_t>(n));
      continue;
    }
    if (n == 0) close_fd(stderr_fd_);
    break;
  }
}

std::string Subprocess::read_line(std::chrono::steady_clock::time_point deadline, double timeout_s) {
  while (true) {
    if (auto nl = out_buffer_.find('\n'); nl != std::string::npos) {
      std::string line = out_buffer_.substr(0, nl);
      out_buffer_.erase(0, nl + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      return line;
    }
    if (stdout_fd_ < 0 && !out_buffer_.empty()) {
      std::string line;
      line.swap(out_buffer_);
      return line;
    }
    if (stdout_fd_ < 0) {
      // Give the child a moment to finish writing stderr and exit.
      const int code = reap(true);
      drain_stderr();
      throw ProcessError(code, stderr_, fmt::format("child exited with code {} before responding", code));
    }

    const auto now = std::chrono::steady_clock::now();
    if (now >= deadline) {
      kill();
      throw TimeoutError(timeout_s);
    }
    const auto wait_ms = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now).count();

    pollfd fds[2] = {{stdout_fd_, POLLIN, 0}, {stderr_fd_, POLLIN, 0}};
    const int nfds = stderr_fd_ >= 0 ? 2 : 1;
    const int rc = ::poll(fds, static_cast<nfds_t>(nfds), static_cast<int>(std::min<long long>(wait_ms + 1, 1000)));
    if (rc < 0) {
      if (errno == EINTR) continue;
      throw ProcessError(-1, stderr_, fmt::format("poll: {}", std::strerror(errno)));
    }
    if (nfds == 2 && (fds[1].revents & (POLLIN | POLLHUP))) drain_stderr();
    if (fds[0].revents & (POLLIN | POLLHUP | POLLERR)) {
      char buf[4096];
      const auto n = ::read(stdout_fd_, buf, sizeof(buf));
      if (n > 0) {
        out_buffer_.append(buf, static_cast<std::size_t>(n));
      } else if (n == 0 || errno != EINTR) {
        close_fd(stdout_fd_);
      }
    }
  }
}

int Subprocess::reap(bool block) {
  if (exit_code_) return *exit_code_;
  if (pid_ <= 0) return -1;
  int status = 0;
  const pid_t r = ::waitpid(pid_, &status, block ? 0 : WNOHANG);
  if (r == pid_) {
    exit_code_ = WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
    return *exit_code_;
  }
  return -1;
}

bool Subprocess::running() { return pid_ > 0 && reap(false) < 0 && !exit_code_; }

void Subprocess::kill() {
  if (pid_ > 0 && !exit_code_) {
    ::kill(-pid_, SIGKILL);
    ::kill(pid_, SIGKILL);
    reap(true);
  }
}

NdjsonChannel::NdjsonChannel(std::vector<std::string> argv, double timeout_s, std::string workdir)
    : argv_(std::move(argv)), timeout_s_(timeout_s), workdir_(std::move(workdir)) {}

void NdjsonChannel::restart() { process_.reset(); }

bool NdjsonChannel::alive() const { return process_ && process_->running(); }

json NdjsonChannel::request(const json& message) { return request(message, timeout_s_); }

json NdjsonChannel::request(const json& message, double timeout_s) {
  if (!message.is_object() || !message.contains("type") || !message["type"].is_string()) {
    throw ConfigError("NDJSON requests must be objects with a string \"type\" field");
  }
  if (!process_ || !process_->running()) process_ = std::make_unique<Subprocess>(argv_, workdir_);
  const auto deadline = std::chrono::steady_clock::now() +
                        std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                            std::chrono::duration<double>(timeout_s));
  std::string line;
  try {
    process_->write_line(message.dump());
    line = process_->read_line(deadline, timeout_s);
  } catch (const Error&) {
    process_.reset();
    throw;
  }
  json response;
  try {
    response = json::parse(line);
  } catch (const json::exception&) {
    throw ProtocolError(line, "response is not JSON");
  }
  if (!response.is_object() || !response.contains("type") || !response["type"].is_string()) {
    throw ProtocolError(line, "response lacks a string \"type\" field");
  }
  return response;
}

}  // namespace hpo
