#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hpo/objectives.hpp"
#include "hpo/subprocess.hpp"

namespace hpo {

struct ArgSpec {
  std::string name;
  std::string type;  // int, float, bool, str
  std::optional<json> default_value;

  bool operator==(const ArgSpec&) const = default;
};

struct TrainFeedback {
  std::vector<double> train_losses;
  double val_loss = 0.0;
};

// {"type":"error","stage":"parse"|"signature",...} answer to a define.
class DefineError : public Error {
 public:
  DefineError(std::string stage, std::string message)
      : Error("DefineError", ErrorCategory::evaluation, stage + ": " + message),
        stage_(std::move(stage)),
        message_(std::move(message)) {}
  const std::string& stage() const noexcept { return stage_; }
  const std::string& runner_message() const noexcept { return message_; }

 private:
  std::string stage_;
  std::string message_;
};

// Client for the trainer-runner worker:
//   {"type":"define","code":...}            -> defined{arg_specs} | error
//   {"type":"run","arguments":{},"epochs","seed"} -> result{train_losses,val_loss} | error
//   {"type":"ping"}                         -> pong
// A child restarted after a timeout is re-sent the last accepted definition.
class TrainerClient {
 public:
  TrainerClient(std::vector<std::string> command, double timeout_s, std::string workdir = {});

  std::vector<ArgSpec> define(const std::string& code);
  // Throws TrainerError (stage runtime/timeout), TimeoutError, ProcessError or ProtocolError.
  TrainFeedback run(const json& arguments, int epochs, std::uint64_t seed);
  bool ping();

  int run_requests() const { return run_requests_; }

 private:
  NdjsonChannel channel_;
  std::optional<std::string> defined_code_;
  int run_requests_ = 0;
};

}  // namespace hpo
