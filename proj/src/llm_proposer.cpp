#include "hpo/llm_proposer.hpp"

#include <fmt/format.h>

namespace hpo {

using llm::Message;
using llm::Role;

LlmProposer::LlmProposer(std::shared_ptr<llm::Client> client, prompts::PromptTemplateSet templates,
                         LlmProposerOptions options, std::shared_ptr<llm::CostLedger> ledger)
    : client_(std::move(client)),
      templates_(std::move(templates)),
      options_(std::move(options)),
      ledger_(std::move(ledger)),
      fallback_rng_(options_.fallback_seed) {
  if (!client_) throw ConfigError("LLM proposer needs a client");
  if (options_.max_retries < 0) throw ConfigError("max_retries must be >= 0");
}

std::vector<Message> LlmProposer::build_messages(const SearchSpace& space, const History& history, int step) const {
  if (step < 1 || step > history.budget()) {
    throw ConfigError(fmt::format("step {} outside budget {}", step, history.budget()));
  }
  std::vector<Message> messages;
  if (options_.expert) messages.push_back({Role::system, templates_.expert_system});

  if (options_.mode == prompts::PromptMode::compressed) {
    messages.push_back({Role::user, prompts::build_compressed(templates_, space, history.prefix(step - 1),
                                                              history.budget(), options_.toy_prompt)});
    return messages;
  }

  messages.push_back(
      {Role::user, prompts::build_initial_prompt(templates_, space, history.budget(), options_.toy_prompt)});
  for (int i = 0; i < step - 1; ++i) {
    const Trial& t = history.trials()[static_cast<std::size_t>(i)];
    const auto& ann = t.annotations;
    std::string said = ann.contains("raw_response") && ann["raw_response"].is_string()
                           ? ann["raw_response"].get<std::string>()
                           : canonical_json(space, t.config);
    messages.push_back({Role::assistant, std::move(said)});
    const bool is_last = t.step + 1 == history.budget();
    messages.push_back({Role::user, prompts::build_transition(templates_, t.loss, options_.reasoning, is_last)});
  }
  return messages;
}

Proposal LlmProposer::propose(const SearchSpace& space, const History& history, int step) {
  const auto base = build_messages(space, history, step);
  auto messages = base;

  int tokens_in = 0;
  int tokens_out = 0;
  bool estimated = false;
  std::string last_error;
  json failures = json::array();

  for (int attempt = 0; attempt <= options_.max_retries; ++attempt) {
    llm::CompletionRequest request{options_.model, options_.temperature, messages, {}, {}, options_.max_tokens};
    const auto response = client_->complete(request);
    tokens_in += response.tokens_in;
    tokens_out += response.tokens_out;
    estimated = estimated || response.usage_estimated;
    if (ledger_) ledger_->record({response.tokens_in, response.tokens_out, response.usage_estimated}, options_.model);

    try {
      auto parsed = prompts::parse_response(response.text);
      Config config = validate_json(space, parsed.config_raw, options_.bounds);
      json ann = {{"raw_response", response.text},
                  {"tokens_in", tokens_in},
                  {"tokens_out", tokens_out},
                  {"completions", attempt + 1}};
      if (estimated) ann["usage_estimated"] = true;
      if (parsed.analysis) ann["analysis"] = *parsed.analysis;
      if (!failures.empty()) ann["rejected"] = failures;
      return {std::move(config), options_.id, std::move(ann)};
    } catch (const Error& e) {
      if (e.name() != "NoJson" && e.name() != "BadJson" && e.name() != "ValidationError") throw;
      last_error = e.what();
      failures.push_back({{"raw_response", response.text}, {"error", e.name()}, {"message", e.what()}});
      messages = base;
      messages.push_back({Role::assistant, response.text});
      messages.push_back({Role::user, templates_.retry});
    }
  }

  if (options_.fallback_random) {
    json ann = {{"fallback", "random"},
                {"tokens_in", tokens_in},
                {"tokens_out", tokens_out},
                {"completions", options_.max_retries + 1},
                {"rejected", failures}};
    return {random_propose(space, fallback_rng_), options_.id, std::move(ann)};
  }
  throw ProposalFailed(options_.max_retries + 1, last_error);
}

}  // namespace hpo
