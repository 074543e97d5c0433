#include <doctest.h>
#include <httplib.h>

#include <atomic>
#include <cstdlib>
#include <thread>

#include "hpo/llm_client.hpp"

using namespace hpo;
using namespace hpo::llm;

namespace {

CompletionRequest sample_request() {
  CompletionRequest r;
  r.model = "gpt-4-0613";
  r.temperature = 0.1;
  r.messages = {{Role::system, "You are a machine learning expert"}, {Role::user, "hello"}};
  return r;
}

std::string ok_body(const std::string& text, bool usage = true) {
  json body{{"choices", json::array({{{"message", {{"role", "assistant"}, {"content", text}}}, {"finish_reason", "stop"}}})}};
  if (usage) body["usage"] = {{"prompt_tokens", 12}, {"completion_tokens", 5}};
  return body.dump();
}

// Local chat-completions endpoint whose responses come from a callback.
class FakeEndpoint {
 public:
  explicit FakeEndpoint(std::function<void(const httplib::Request&, httplib::Response&)> handler) {
    server_.Post("/v1/chat/completions", [this, handler](const httplib::Request& req, httplib::Response& res) {
      ++hits;
      last_body = req.body;
      last_auth = req.get_header_value("Authorization");
      handler(req, res);
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeEndpoint() {
    server_.stop();
    thread_.join();
  }
  EndpointConfig endpoint() const {
    EndpointConfig e;
    e.base_url = "http://127.0.0.1:" + std::to_string(port_) + "/v1";
    e.api_key = "test-key";
    e.model = "gpt-4-0613";
    e.timeout_s = 5;
    return e;
  }
  std::atomic<int> hits{0};
  std::string last_body;
  std::string last_auth;

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

}  // namespace

TEST_CASE("request serialization is stable and OpenAI-shaped") {
  auto r = sample_request();
  r.max_tokens = 64;
  const auto a = serialize(r), b = serialize(r);
  CHECK(a == b);
  const auto doc = json::parse(a);
  CHECK(doc["model"] == "gpt-4-0613");
  CHECK(doc["temperature"] == 0.1);
  CHECK(doc["messages"][0]["role"] == "system");
  CHECK(doc["messages"][1]["content"] == "hello");
  CHECK(doc["max_tokens"] == 64);
  CHECK_FALSE(doc.contains("tools"));
  r.tools = json::array({{{"type", "function"}}});
  r.tool_choice = "auto";
  const auto t = json::parse(serialize(r));
  CHECK(t["tools"].size() == 1);
  CHECK(t["tool_choice"] == "auto");
}

TEST_CASE("completion body parsing") {
  const auto req = sample_request();
  const auto r = parse_completion_body(ok_body("  {\"C\": 1}\n"), req);
  CHECK(r.text == "  {\"C\": 1}\n");
  CHECK(r.tokens_in == 12);
  CHECK(r.tokens_out == 5);
  CHECK_FALSE(r.usage_estimated);
  CHECK(r.finish_reason == "stop");

  const auto est = parse_completion_body(ok_body("abcdefgh", false), req);
  CHECK(est.usage_estimated);
  CHECK(est.tokens_out == 2);

  json tool{{"choices", json::array({{{"message",
                                       {{"role", "assistant"},
                                        {"content", nullptr},
                                        {"tool_calls", json::array({{{"type", "function"},
                                                                     {"function",
                                                                      {{"name", "make_model_and_optimizer"},
                                                                       {"arguments", "{\"lr\": 0.1}"}}}}})}}}}})}};
  const auto tc = parse_completion_body(tool.dump(), req);
  REQUIRE(tc.tool_call);
  CHECK(tc.tool_call->name == "make_model_and_optimizer");
  CHECK(tc.tool_call->arguments == "{\"lr\": 0.1}");
  CHECK(tc.text.empty());

  CHECK_THROWS_AS(parse_completion_body("not json", req), LlmError);
  CHECK_THROWS_AS(parse_completion_body("{\"choices\": []}", req), LlmError);
}

TEST_CASE("token estimate") {
  CHECK(estimate_tokens(0) == 0);
  CHECK(estimate_tokens(1) == 1);
  CHECK(estimate_tokens(8) == 2);
  CHECK(estimate_tokens(9) == 3);
}

TEST_CASE("with_retries backs off exponentially on retryable errors") {
  std::vector<long> sleeps;
  int calls = 0;
  const auto r = with_retries({}, [&](std::chrono::milliseconds d) { sleeps.push_back(d.count()); }, [&] {
    if (++calls < 3) throw LlmError("RateLimited", 429, "{}", "slow down");
    return CompletionResponse{"ok"};
  });
  CHECK(r.attempts == 3);
  CHECK(sleeps == std::vector<long>{1000, 2000});

  calls = 0;
  sleeps.clear();
  CHECK_THROWS_AS(with_retries({}, [&](auto d) { sleeps.push_back(d.count()); },
                               [&]() -> CompletionResponse {
                                 ++calls;
                                 throw LlmError("ServerError", 503, "{}", "down");
                               }),
                  LlmError);
  CHECK(calls == 5);
  CHECK(sleeps == std::vector<long>{1000, 2000, 4000, 8000});

  calls = 0;
  CHECK_THROWS_AS(with_retries({}, [](auto) {},
                               [&]() -> CompletionResponse {
                                 ++calls;
                                 throw LlmError("AuthError", 401, "{}", "bad key");
                               }),
                  LlmError);
  CHECK(calls == 1);
}

TEST_CASE("HTTP client against a local endpoint") {
  std::vector<long> sleeps;
  auto sleeper = [&](std::chrono::milliseconds d) { sleeps.push_back(d.count()); };

  SUBCASE("two rate limits then success") {
    std::atomic<int> n{0};
    FakeEndpoint ep([&](const httplib::Request&, httplib::Response& res) {
      if (++n <= 2) {
        res.status = 429;
        res.set_content(R"({"error": {"message": "rate limit"}})", "application/json");
      } else {
        res.set_content(ok_body("{\"C\": 1.0, \"gamma\": 0.1}"), "application/json");
      }
    });
    HttpClient client(ep.endpoint(), {}, sleeper);
    const auto r = client.complete(sample_request());
    CHECK(r.attempts == 3);
    CHECK(r.text == "{\"C\": 1.0, \"gamma\": 0.1}");
    CHECK(ep.hits == 3);
    CHECK(sleeps == std::vector<long>{1000, 2000});
    CHECK(ep.last_auth == "Bearer test-key");
    CHECK(ep.last_body == serialize(sample_request()));
  }
  SUBCASE("auth failure is not retried and keeps the payload") {
    FakeEndpoint ep([](const httplib::Request&, httplib::Response& res) {
      res.status = 401;
      res.set_content(R"({"error": "invalid key"})", "application/json");
    });
    HttpClient client(ep.endpoint(), {}, sleeper);
    try {
      client.complete(sample_request());
      FAIL("expected AuthError");
    } catch (const LlmError& e) {
      CHECK(e.name() == "AuthError");
      CHECK(e.status() == 401);
      CHECK(e.payload() == R"({"error": "invalid key"})");
    }
    CHECK(ep.hits == 1);
  }
  SUBCASE("server errors exhaust the attempts") {
    FakeEndpoint ep([](const httplib::Request&, httplib::Response& res) { res.status = 502; });
    HttpClient client(ep.endpoint(), {}, sleeper);
    CHECK_THROWS_AS(client.complete(sample_request()), LlmError);
    CHECK(ep.hits == 5);
  }
  SUBCASE("other client errors are not retried") {
    FakeEndpoint ep([](const httplib::Request&, httplib::Response& res) { res.status = 400; });
    HttpClient client(ep.endpoint(), {}, sleeper);
    try {
      client.complete(sample_request());
      FAIL("expected RequestError");
    } catch (const LlmError& e) {
      CHECK(e.name() == "RequestError");
    }
    CHECK(ep.hits == 1);
  }
}

TEST_CASE("endpoint configuration from the environment") {
  ::unsetenv("LLM_API_KEY");
  try {
    endpoint_from_env();
    FAIL("expected MissingApiKey");
  } catch (const ConfigError& e) {
    CHECK(e.name() == "MissingApiKey");
  }
  ::setenv("LLM_API_KEY", "k", 1);
  ::setenv("LLM_BASE_URL", "http://localhost:1/v1", 1);
  ::setenv("LLM_MODEL", "gpt-4-0613", 1);
  const auto e = endpoint_from_env();
  CHECK(e.api_key == "k");
  CHECK(e.base_url == "http://localhost:1/v1");
  CHECK(e.model == "gpt-4-0613");
  ::unsetenv("LLM_API_KEY");
  ::unsetenv("LLM_BASE_URL");
  ::unsetenv("LLM_MODEL");
}

TEST_CASE("scripted client") {
  ScriptedClient client({std::string("a"), LlmError("RateLimited", 429, "", "x"), std::string("c")});
  auto req = sample_request();
  req.temperature = 0.7;
  CHECK(client.complete(req).text == "a");
  CHECK_THROWS_AS(client.complete(req), LlmError);
  CHECK(client.complete(req).text == "c");
  CHECK_THROWS_AS(client.complete(req), ScriptExhausted);
  CHECK(client.calls() == 4);
  CHECK(client.requests()[0].temperature == 0.7);
  CHECK(client.requests()[0].messages == req.messages);
}

TEST_CASE("cost ledger") {
  CostLedger ledger;
  CHECK(ledger.record({1000, 500, false}, "gpt-4-1106-preview") == doctest::Approx(0.025));
  CHECK(ledger.record({0, 0, false}, "gpt-4-1106-preview") == 0.0);
  CHECK(ledger.total() == doctest::Approx(0.025));
  CHECK(ledger.tokens_in() == 1000);
  CHECK_THROWS_AS(ledger.record({1, 1, false}, "mystery-model"), UnknownModel);
  ledger.set_price("mystery-model", {1.0, 2.0});
  ledger.record({1000, 1000, true}, "mystery-model");
  CHECK(ledger.total() == doctest::Approx(3.025));
  CHECK(ledger.any_estimated());

  CostLedger shared;
  std::vector<std::thread> threads;
  for (int i = 0; i < 8; ++i)
    threads.emplace_back([&] {
      for (int k = 0; k < 1000; ++k) shared.record({10, 10, false}, "gpt-3.5-turbo-0613");
    });
  for (auto& t : threads) t.join();
  CHECK(shared.tokens_in() == 80000);
  CHECK(shared.total() == doctest::Approx(80000 / 1000.0 * (0.0015 + 0.002)));
}
