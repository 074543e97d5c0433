#include "hpo/trainer_client.hpp"

#include <cmath>

namespace hpo {

TrainerClient::TrainerClient(std::vector<std::string> command, double timeout_s, std::string workdir)
    : channel_(std::move(command), timeout_s, std::move(workdir)) {}

namespace {

std::vector<ArgSpec> parse_defined(const json& response) {
  std::vector<ArgSpec> specs;
  try {
    for (const auto& a : response.at("arg_specs")) {
      ArgSpec s;
      s.name = a.at("name").get<std::string>();
      s.type = a.value("type", std::string("float"));
      if (a.contains("default")) s.default_value = a["default"];
      specs.push_back(std::move(s));
    }
  } catch (const json::exception&) {
    throw ProtocolError(response.dump(), "malformed arg_specs");
  }
  return specs;
}

[[noreturn]] void throw_runner_error(const json& response, bool defining) {
  const auto stage = response.value("stage", std::string("unknown"));
  const auto message = response.value("message", std::string{});
  if (defining) throw DefineError(stage, message);
  throw TrainerError(stage, message);
}

}  // namespace

std::vector<ArgSpec> TrainerClient::define(const std::string& code) {
  const json response = channel_.request({{"type", "define"}, {"code", code}});
  const auto type = response["type"].get<std::string>();
  if (type == "error") throw_runner_error(response, true);
  if (type != "defined") throw ProtocolError(response.dump(), "expected a \"defined\" response");
  auto specs = parse_defined(response);
  defined_code_ = code;
  return specs;
}

TrainFeedback TrainerClient::run(const json& arguments, int epochs, std::uint64_t seed) {
  if (!channel_.alive() && defined_code_) define(*defined_code_);
  ++run_requests_;
  const json response =
      channel_.request({{"type", "run"}, {"arguments", arguments}, {"epochs", epochs}, {"seed", seed}});
  const auto type = response["type"].get<std::string>();
  if (type == "error") throw_runner_error(response, false);
  if (type != "result") throw ProtocolError(response.dump(), "expected a \"result\" response");
  TrainFeedback fb;
  try {
    for (const auto& v : response.at("train_losses")) fb.train_losses.push_back(v.get<double>());
    fb.val_loss = response.at("val_loss").get<double>();
  } catch (const json::exception&) {
    throw ProtocolError(response.dump(), "result lacks numeric train_losses/val_loss");
  }
  if (!std::isfinite(fb.val_loss)) throw TrainerError("runtime", "validation loss is not finite");
  for (double v : fb.train_losses) {
    if (!std::isfinite(v)) throw TrainerError("runtime", "training loss is not finite");
  }
  return fb;
}

bool TrainerClient::ping() {
  const json response = channel_.request({{"type", "ping"}});
  return response["type"] == "pong";
}

}  // namespace hpo
