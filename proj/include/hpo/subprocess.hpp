#pragma once

#include <chrono>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hpo/error.hpp"
#include "hpo/json_format.hpp"

namespace hpo {

class TimeoutError : public Error {
 public:
  explicit TimeoutError(double seconds);
  double seconds() const noexcept { return seconds_; }

 private:
  double seconds_;
};

// The child exited (or could not be started) before answering.
class ProcessError : public Error {
 public:
  ProcessError(int exit_code, std::string stderr_text, const std::string& what);
  int exit_code() const noexcept { return exit_code_; }
  const std::string& stderr_text() const noexcept { return stderr_text_; }

 private:
  int exit_code_;
  std::string stderr_text_;
};

// A response line that is not the JSON object the protocol expects.
class ProtocolError : public Error {
 public:
  ProtocolError(std::string raw_line, const std::string& why);
  const std::string& raw_line() const noexcept { return raw_line_; }

 private:
  std::string raw_line_;
};

// A child process with piped stdin/stdout/stderr. The child runs in its own
// process group, which is killed on destruction or timeout.
class Subprocess {
 public:
  Subprocess(std::vector<std::string> argv, std::string workdir = {});
  ~Subprocess();
  Subprocess(const Subprocess&) = delete;
  Subprocess& operator=(const Subprocess&) = delete;

  void write_line(const std::string& line);

  // Next stdout line without the trailing newline. Throws TimeoutError when
  // the deadline passes and ProcessError when stdout closes first.
  std::string read_line(std::chrono::steady_clock::time_point deadline, double timeout_s);

  bool running();
  void kill();
  const std::string& stderr_text() const { return stderr_; }

 private:
  void drain_stderr();
  int reap(bool block);

  int pid_ = -1;
  int stdin_fd_ = -1;
  int stdout_fd_ = -1;
  int stderr_fd_ = -1;
  std::string out_buffer_;
  std::string stderr_;
  std::optional<int> exit_code_;
};

// Newline-delimited JSON request/response over a lazily (re)started child.
// One request line yields exactly one response line. After a timeout the
// child is killed and restarted on the next request.
class NdjsonChannel {
 public:
  NdjsonChannel(std::vector<std::string> argv, double timeout_s, std::string workdir = {});

  json request(const json& message);
  // Per-call timeout override.
  json request(const json& message, double timeout_s);

  const std::vector<std::string>& argv() const { return argv_; }
  double timeout() const { return timeout_s_; }
  void restart();
  // A live child is attached (the next request will not spawn a new one).
  bool alive() const;

 private:
  std::vector<std::string> argv_;
  double timeout_s_;
  std::string workdir_;
  std::unique_ptr<Subprocess> process_;
};

}  // namespace hpo
