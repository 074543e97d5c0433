#pragma once

#include <memory>
#include <optional>

#include "hpo/llm_client.hpp"
#include "hpo/prompts.hpp"

namespace hpo {

class ProposalFailed : public Error {
 public:
  ProposalFailed(int attempts, const std::string& last_error)
      : Error("ProposalFailed", ErrorCategory::llm,
              "no valid config after " + std::to_string(attempts) + " completions: " + last_error) {}
};

struct LlmProposerOptions {
  std::string id = "llm";
  std::string model;
  double temperature = 0.0;
  prompts::PromptMode mode = prompts::PromptMode::chat;
  prompts::Reasoning reasoning = prompts::Reasoning::plain;
  bool expert = false;
  int toy_prompt = 2;
  int max_retries = 3;
  bool fallback_random = false;
  std::uint64_t fallback_seed = 0;
  BoundsPolicy bounds = BoundsPolicy::reject;
  std::optional<int> max_tokens;
};

// Proposes by prompting a chat model. The transcript is rebuilt from the
// History on every call: assistant turns are the recorded raw responses (or
// the canonical JSON of configs proposed by someone else).
class LlmProposer : public Proposer {
 public:
  LlmProposer(std::shared_ptr<llm::Client> client, prompts::PromptTemplateSet templates, LlmProposerOptions options,
              std::shared_ptr<llm::CostLedger> ledger = nullptr);

  std::string id() const override { return options_.id; }
  Proposal propose(const SearchSpace& space, const History& history, int step) override;

  // Messages sent for the first attempt at `step`.
  std::vector<llm::Message> build_messages(const SearchSpace& space, const History& history, int step) const;

  const LlmProposerOptions& options() const { return options_; }

 private:
  std::shared_ptr<llm::Client> client_;
  prompts::PromptTemplateSet templates_;
  LlmProposerOptions options_;
  std::shared_ptr<llm::CostLedger> ledger_;
  Rng fallback_rng_;
};

}  // namespace hpo
