#include "hpo/llm_client.hpp"

#include <cmath>
#include <cstdlib>
#include <thread>

#include <fmt/format.h>
#include <httplib.h>

namespace hpo::llm {

std::string to_string(Role role) {
  switch (role) {
    case Role::system: return "system";
    case Role::user: return "user";
    case Role::assistant: return "assistant";
  }
  return "user";
}

namespace {

ordered_json wire_body(const CompletionRequest& request) {
  ordered_json body = ordered_json::object();
  body["model"] = request.model;
  body["temperature"] = request.temperature;
  ordered_json messages = ordered_json::array();
  for (const auto& m : request.messages) {
    ordered_json msg = ordered_json::object();
    msg["role"] = to_string(m.role);
    msg["content"] = m.content;
    messages.push_back(std::move(msg));
  }
  body["messages"] = std::move(messages);
  if (request.tools) body["tools"] = ordered_json::parse(request.tools->dump());
  if (request.tool_choice) body["tool_choice"] = ordered_json::parse(request.tool_choice->dump());
  if (request.max_tokens) body["max_tokens"] = *request.max_tokens;
  return body;
}

}  // namespace

std::string serialize(const CompletionRequest& request) { return wire_body(request).dump(); }

int estimate_tokens(std::size_t chars) { return static_cast<int>((chars + 3) / 4); }

int estimate_request_tokens(const CompletionRequest& request) {
  std::size_t chars = 0;
  for (const auto& m : request.messages) chars += m.content.size();
  return estimate_tokens(chars);
}

CompletionResponse with_retries(const RetryPolicy& policy, const Sleeper& sleep,
                                const std::function<CompletionResponse()>& attempt) {
  auto delay = std::chrono::duration<double, std::milli>(policy.base_delay);
  for (int k = 1;; ++k) {
    try {
      CompletionResponse r = attempt();
      r.attempts = k;
      return r;
    } catch (const LlmError& e) {
      if (!e.retryable() || k >= policy.max_attempts) throw;
      const auto wait = std::chrono::duration_cast<std::chrono::milliseconds>(delay);
      if (sleep) {
        sleep(wait);
      } else {
        std::this_thread::sleep_for(wait);
      }
      delay *= policy.factor;
    }
  }
}

EndpointConfig endpoint_from_env() {
  EndpointConfig cfg;
  const char* key = std::getenv("LLM_API_KEY");
  if (key == nullptr || *key == '\0') throw ConfigError("MissingApiKey", "LLM_API_KEY is not set");
  cfg.api_key = key;
  if (const char* url = std::getenv("LLM_BASE_URL"); url != nullptr && *url != '\0') cfg.base_url = url;
  if (const char* model = std::getenv("LLM_MODEL"); model != nullptr && *model != '\0') cfg.model = model;
  return cfg;
}

CompletionResponse parse_completion_body(const std::string& body, const CompletionRequest& request) {
  json doc;
  try {
    doc = json::parse(body);
  } catch (const json::exception& e) {
    throw LlmError("BadResponse", 200, body, fmt::format("completion body is not JSON: {}", e.what()));
  }
  try {
    CompletionResponse r;
    const auto& choice = doc.at("choices").at(0);
    const auto& message = choice.at("message");
    if (message.contains("content") && message["content"].is_string()) r.text = message["content"].get<std::string>();
    if (message.contains("tool_calls") && message["tool_calls"].is_array() && !message["tool_calls"].empty()) {
      const auto& fn = message["tool_calls"][0].at("function");
      r.tool_call = ToolCall{fn.at("name").get<std::string>(), fn.value("arguments", std::string("{}"))};
    }
    r.finish_reason = choice.value("finish_reason", std::string{});
    if (doc.contains("usage") && doc["usage"].is_object()) {
      r.tokens_in = doc["usage"].value("prompt_tokens", 0);
      r.tokens_out = doc["usage"].value("completion_tokens", 0);
    } else {
      r.tokens_in = estimate_request_tokens(request);
      r.tokens_out = estimate_tokens(r.text.size() + (r.tool_call ? r.tool_call->arguments.size() : 0));
      r.usage_estimated = true;
    }
    return r;
  } catch (const json::exception& e) {
    throw LlmError("BadResponse", 200, body, fmt::format("unexpected completion shape: {}", e.what()));
  }
}

HttpClient::HttpClient(EndpointConfig endpoint, RetryPolicy retry, Sleeper sleep)
    : endpoint_(std::move(endpoint)), retry_(retry), sleep_(std::move(sleep)) {
  // "https://host[:port]/prefix" -> host part and path prefix.
  const auto scheme_end = endpoint_.base_url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError(fmt::format("bad LLM_BASE_URL '{}'", endpoint_.base_url));
  const auto path_start = endpoint_.base_url.find('/', scheme_end + 3);
  host_ = endpoint_.base_url.substr(0, path_start);
  path_prefix_ = path_start == std::string::npos ? "" : endpoint_.base_url.substr(path_start);
  while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
}

CompletionResponse HttpClient::complete(const CompletionRequest& request) {
  return with_retries(retry_, sleep_, [&] { return attempt_once(request); });
}

CompletionResponse HttpClient::attempt_once(const CompletionRequest& request) {
  httplib::Client cli(host_);
  const auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(
      std::chrono::duration<double>(endpoint_.timeout_s));
  cli.set_read_timeout(timeout);
  cli.set_write_timeout(timeout);
  cli.set_connection_timeout(std::chrono::seconds(30));
  httplib::Headers headers = {{"Authorization", "Bearer " + endpoint_.api_key}};

  auto res = cli.Post(path_prefix_ + "/chat/completions", headers, serialize(request), "application/json");
  if (!res) {
    throw LlmError("TransportError", 0, {}, fmt::format("request failed: {}", httplib::to_string(res.error())));
  }
  const int status = res->status;
  if (status == 401 || status == 403) throw LlmError("AuthError", status, res->body, "authentication failed");
  if (status == 429) throw LlmError("RateLimited", status, res->body, "rate limited");
  if (status >= 500) throw LlmError("ServerError", status, res->body, fmt::format("server error {}", status));
  if (status != 200) throw LlmError("RequestError", status, res->body, fmt::format("request rejected ({})", status));
  return parse_completion_body(res->body, request);
}

ScriptedClient::ScriptedClient(std::vector<Entry> script, bool tools) : script_(std::move(script)), tools_(tools) {}

ScriptedClient ScriptedClient::from_texts(const std::vector<std::string>& texts) {
  std::vector<Entry> entries(texts.begin(), texts.end());
  return ScriptedClient(std::move(entries));
}

CompletionResponse ScriptedClient::complete(const CompletionRequest& request) {
  std::lock_guard lock(mutex_);
  const std::size_t n = requests_.size();
  requests_.push_back(request);
  if (n >= script_.size()) {
    throw ScriptExhausted(fmt::format("scripted client has {} responses, call {} requested", script_.size(), n + 1));
  }
  const Entry& entry = script_[n];
  if (const auto* err = std::get_if<LlmError>(&entry)) throw *err;
  CompletionResponse r;
  if (const auto* text = std::get_if<std::string>(&entry)) {
    r.text = *text;
    r.finish_reason = "stop";
  } else {
    r = std::get<CompletionResponse>(entry);
  }
  if (r.tokens_in == 0 && r.tokens_out == 0) {
    r.tokens_in = estimate_request_tokens(request);
    r.tokens_out = estimate_tokens(r.text.size() + (r.tool_call ? r.tool_call->arguments.size() : 0));
    r.usage_estimated = true;
  }
  return r;
}

std::vector<CompletionRequest> ScriptedClient::requests() const {
  std::lock_guard lock(mutex_);
  return requests_;
}

std::size_t ScriptedClient::calls() const {
  std::lock_guard lock(mutex_);
  return requests_.size();
}

// Cost --------------------------------------------------------------------

CostLedger::CostLedger()
    : CostLedger({{"gpt-4-1106-preview", {0.01, 0.03}},
                  {"gpt-4-0613", {0.03, 0.06}},
                  {"gpt-3.5-turbo-0613", {0.0015, 0.002}}}) {}

CostLedger::CostLedger(std::map<std::string, Price> prices) : prices_(std::move(prices)) {}

void CostLedger::set_price(const std::string& model, Price price) {
  std::lock_guard lock(mutex_);
  prices_[model] = price;
}

bool CostLedger::has_price(const std::string& model) const {
  std::lock_guard lock(mutex_);
  return prices_.contains(model);
}

double CostLedger::record(const Usage& usage, const std::string& model) {
  std::lock_guard lock(mutex_);
  auto it = prices_.find(model);
  if (it == prices_.end()) throw UnknownModel(model);
  const double cost = usage.tokens_in / 1000.0 * it->second.input_per_1k +
                      usage.tokens_out / 1000.0 * it->second.output_per_1k;
  tokens_in_ += usage.tokens_in;
  tokens_out_ += usage.tokens_out;
  total_ += cost;
  estimated_ = estimated_ || usage.estimated;
  return cost;
}

long long CostLedger::tokens_in() const {
  std::lock_guard lock(mutex_);
  return tokens_in_;
}

long long CostLedger::tokens_out() const {
  std::lock_guard lock(mutex_);
  return tokens_out_;
}

double CostLedger::total() const {
  std::lock_guard lock(mutex_);
  return total_;
}

bool CostLedger::any_estimated() const {
  std::lock_guard lock(mutex_);
  return estimated_;
}

json CostLedger::summary() const {
  std::lock_guard lock(mutex_);
  return {{"tokens_in", tokens_in_}, {"tokens_out", tokens_out_}, {"total_usd", total_},
          {"usage_estimated", estimated_}};
}

}  // namespace hpo::llm
