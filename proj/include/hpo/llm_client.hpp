#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "hpo/error.hpp"
#include "hpo/json_format.hpp"

namespace hpo::llm {

enum class Role { system, user, assistant };

std::string to_string(Role role);

struct Message {
  Role role;
  std::string content;

  bool operator==(const Message&) const = default;
};

struct CompletionRequest {
  std::string model;
  double temperature = 0.0;
  std::vector<Message> messages;
  // OpenAI "tools" array and "tool_choice" value, passed through verbatim.
  std::optional<json> tools;
  std::optional<json> tool_choice;
  std::optional<int> max_tokens;
};

// Chat-completions request body. Identical requests give identical bytes.
std::string serialize(const CompletionRequest& request);

struct ToolCall {
  std::string name;
  std::string arguments;  // JSON text as produced by the model
};

struct CompletionResponse {
  std::string text;
  std::optional<ToolCall> tool_call;
  int tokens_in = 0;
  int tokens_out = 0;
  bool usage_estimated = false;
  std::string finish_reason;
  int attempts = 1;
};

// Fallback when the provider reports no usage: ceil(chars / 4).
int estimate_tokens(std::size_t chars);
int estimate_request_tokens(const CompletionRequest& request);

class LlmError : public Error {
 public:
  LlmError(std::string name, int status, std::string payload, const std::string& what)
      : Error(std::move(name), ErrorCategory::llm, what), status_(status), payload_(std::move(payload)) {}
  int status() const noexcept { return status_; }
  const std::string& payload() const noexcept { return payload_; }
  // RateLimited, ServerError and TransportError are retried.
  bool retryable() const noexcept {
    return name() == "RateLimited" || name() == "ServerError" || name() == "TransportError";
  }

 private:
  int status_;
  std::string payload_;
};

class Client {
 public:
  virtual ~Client() = default;
  virtual CompletionResponse complete(const CompletionRequest& request) = 0;
  // False when the endpoint is known not to accept "tools".
  virtual bool supports_tools() const { return true; }
};

struct RetryPolicy {
  int max_attempts = 5;
  std::chrono::milliseconds base_delay{1000};
  double factor = 2.0;
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

// Calls `attempt` until it succeeds, a non-retryable LlmError is thrown, or
// max_attempts is reached; sleeps base * factor^(k-1) after failure k.
// The returned response carries the number of attempts used.
CompletionResponse with_retries(const RetryPolicy& policy, const Sleeper& sleep,
                                const std::function<CompletionResponse()>& attempt);

struct EndpointConfig {
  std::string base_url = "https://api.openai.com/v1";
  std::string api_key;
  std::string model;
  double timeout_s = 120.0;
};

// Reads LLM_API_KEY, LLM_BASE_URL and LLM_MODEL. Throws ConfigError when the
// key is missing.
EndpointConfig endpoint_from_env();

// Parses an OpenAI-compatible chat-completions response body.
CompletionResponse parse_completion_body(const std::string& body, const CompletionRequest& request);

class HttpClient : public Client {
 public:
  explicit HttpClient(EndpointConfig endpoint, RetryPolicy retry = {}, Sleeper sleep = {});
  CompletionResponse complete(const CompletionRequest& request) override;

 private:
  CompletionResponse attempt_once(const CompletionRequest& request);

  EndpointConfig endpoint_;
  RetryPolicy retry_;
  Sleeper sleep_;
  std::string host_;
  std::string path_prefix_;
};

// Offline double: returns canned entries in order and records every request.
class ScriptedClient : public Client {
 public:
  using Entry = std::variant<std::string, CompletionResponse, LlmError>;

  explicit ScriptedClient(std::vector<Entry> script, bool tools = true);
  static ScriptedClient from_texts(const std::vector<std::string>& texts);

  CompletionResponse complete(const CompletionRequest& request) override;
  bool supports_tools() const override { return tools_; }

  std::vector<CompletionRequest> requests() const;
  std::size_t calls() const;

 private:
  mutable std::mutex mutex_;
  std::vector<Entry> script_;
  std::vector<CompletionRequest> requests_;
  bool tools_;
};

struct Price {
  double input_per_1k = 0.0;
  double output_per_1k = 0.0;
};

struct Usage {
  int tokens_in = 0;
  int tokens_out = 0;
  bool estimated = false;
};

class UnknownModel : public Error {
 public:
  explicit UnknownModel(const std::string& model)
      : Error("UnknownModel", ErrorCategory::config, "no price for model '" + model + "'") {}
};

// Running token and currency totals. Safe for concurrent record() calls.
class CostLedger {
 public:
  CostLedger();  // built-in price table
  explicit CostLedger(std::map<std::string, Price> prices);

  void set_price(const std::string& model, Price price);
  bool has_price(const std::string& model) const;

  // total += in/1000 * p_in + out/1000 * p_out. Throws UnknownModel.
  double record(const Usage& usage, const std::string& model);

  long long tokens_in() const;
  long long tokens_out() const;
  double total() const;
  bool any_estimated() const;
  json summary() const;

 private:
  mutable std::mutex mutex_;
  std::map<std::string, Price> prices_;
  long long tokens_in_ = 0;
  long long tokens_out_ = 0;
  double total_ = 0.0;
  bool estimated_ = false;
};

}  // namespace hpo::llm
