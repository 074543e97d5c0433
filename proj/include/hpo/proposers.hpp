#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "hpo/rng.hpp"
#include "hpo/space.hpp"

namespace hpo {

struct Trial {
  int step = 0;
  Config config;
  double loss = 0.0;
  std::string proposer_id;
  double duration_s = 0.0;
  // raw_response, tokens_in, tokens_out, analysis, snapped_from, ...
  json annotations = json::object();
};

class EmptyHistory : public Error {
 public:
  EmptyHistory() : Error("EmptyHistory", ErrorCategory::config, "history has no trials") {}
};

class BudgetExceeded : public Error {
 public:
  explicit BudgetExceeded(int budget)
      : Error("BudgetExceeded", ErrorCategory::config, "budget of " + std::to_string(budget) + " exhausted") {}
};

// The evaluated trials of one run, in step order. Single writer.
class History {
 public:
  explicit History(int budget);

  int budget() const { return budget_; }
  const std::vector<Trial>& trials() const { return trials_; }
  std::size_t size() const { return trials_.size(); }
  bool empty() const { return trials_.empty(); }
  const Trial& back() const { return trials_.back(); }

  // Assigns step = size() + 1. Throws BudgetExceeded when full.
  const Trial& append(Trial trial);

  // First `n` trials as a new history with the same budget.
  History prefix(std::size_t n) const;

 private:
  int budget_;
  std::vector<Trial> trials_;
};

// Minimum loss, earliest step on ties. Throws EmptyHistory.
const Trial& best_so_far(const History& history);

// Running minimum of the loss after each step.
std::vector<double> running_best(const History& history);

struct Proposal {
  Config config;
  std::string proposer_id;
  json annotations = json::object();
};

class Proposer {
 public:
  virtual ~Proposer() = default;
  virtual std::string id() const = 0;
  // Keeps state across calls beyond what History records.
  virtual bool stateful() const { return false; }
  // Next config for `step` (1-based). The returned config validates against `space`.
  virtual Proposal propose(const SearchSpace& space, const History& history, int step) = 0;
};

// Independent draw through sample() with fresh uniforms.
Config random_propose(const SearchSpace& space, Rng& rng);

class RandomProposer : public Proposer {
 public:
  explicit RandomProposer(std::uint64_t seed);
  std::string id() const override { return "random"; }
  bool stateful() const override { return true; }
  Proposal propose(const SearchSpace& space, const History& history, int step) override;

 private:
  Rng rng_;
};

// script[step - 1]; throws ScriptExhausted past the end.
const Config& replay_propose(const std::vector<Config>& script, int step);

class ReplayProposer : public Proposer {
 public:
  explicit ReplayProposer(std::vector<Config> script, std::string id = "replay");
  std::string id() const override { return id_; }
  Proposal propose(const SearchSpace& space, const History& history, int step) override;

 private:
  std::vector<Config> script_;
  std::string id_;
};

// Steps <= switch_step go to `first`, later ones to `second`, which sees the
// full history including the trials proposed by `first`.
class HybridProposer : public Proposer {
 public:
  HybridProposer(std::shared_ptr<Proposer> first, std::shared_ptr<Proposer> second, int switch_step);
  std::string id() const override;
  bool stateful() const override { return first_->stateful() || second_->stateful(); }
  Proposal propose(const SearchSpace& space, const History& history, int step) override;

 private:
  std::shared_ptr<Proposer> first_;
  std::shared_ptr<Proposer> second_;
  int switch_step_;
};

// One JSONL line: {step, config, loss, proposer_id, duration_s, annotations}.
std::string trial_to_jsonl(const SearchSpace& space, const Trial& trial);
Trial trial_from_json(const SearchSpace& space, const json& line);
std::vector<Trial> read_trial_log(const SearchSpace& space, const std::string& path);

}  // namespace hpo
