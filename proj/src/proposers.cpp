#include "hpo/proposers.hpp"

#include <fstream>
#include <limits>

#include <fmt/format.h>

namespace hpo {

History::History(int budget) : budget_(budget) {
  if (budget < 1) throw ConfigError(fmt::format("budget must be >= 1, got {}", budget));
}

const Trial& History::append(Trial trial) {
  if (static_cast<int>(trials_.size()) >= budget_) throw BudgetExceeded(budget_);
  trial.step = static_cast<int>(trials_.size()) + 1;
  trials_.push_back(std::move(trial));
  return trials_.back();
}

History History::prefix(std::size_t n) const {
  History h(budget_);
  h.trials_.assign(trials_.begin(), trials_.begin() + static_cast<std::ptrdiff_t>(std::min(n, trials_.size())));
  return h;
}

const Trial& best_so_far(const History& history) {
  if (history.empty()) throw EmptyHistory();
  const Trial* best = &history.trials().front();
  for (const auto& t : history.trials()) {
    if (t.loss < best->loss) best = &t;
  }
  return *best;
}

std::vector<double> running_best(const History& history) {
  std::vector<double> out;
  double best = std::numeric_limits<double>::infinity();
  for (const auto& t : history.trials()) {
    best = std::min(best, t.loss);
    out.push_back(best);
  }
  return out;
}

Config random_propose(const SearchSpace& space, Rng& rng) {
  std::vector<double> unit(space.size());
  for (auto& u : unit) u = rng.uniform();
  return sample(space, unit);
}

RandomProposer::RandomProposer(std::uint64_t seed) : rng_(seed) {}

Proposal RandomProposer::propose(const SearchSpace& space, const History&, int) {
  return {random_propose(space, rng_), id(), json::object()};
}

const Config& replay_propose(const std::vector<Config>& script, int step) {
  if (step < 1 || static_cast<std::size_t>(step) > script.size()) {
    throw ScriptExhausted(fmt::format("replay script has {} entries, step {} requested", script.size(), step));
  }
  return script[static_cast<std::size_t>(step) - 1];
}

ReplayProposer::ReplayProposer(std::vector<Config> script, std::string id)
    : script_(std::move(script)), id_(std::move(id)) {}

Proposal ReplayProposer::propose(const SearchSpace& space, const History&, int step) {
  return {validate(space, replay_propose(script_, step).values), id_, json::object()};
}

HybridProposer::HybridProposer(std::shared_ptr<Proposer> first, std::shared_ptr<Proposer> second, int switch_step)
    : first_(std::move(first)), second_(std::move(second)), switch_step_(switch_step) {
  if (switch_step_ < 0) throw ConfigError("switch_step must be >= 0");
}

std::string HybridProposer::id() const {
  return fmt::format("hybrid({}->{}@{})", first_->id(), second_->id(), switch_step_);
}

Proposal HybridProposer::propose(const SearchSpace& space, const History& history, int step) {
  return step <= switch_step_ ? first_->propose(space, history, step) : second_->propose(space, history, step);
}

std::string trial_to_jsonl(const SearchSpace& space, const Trial& trial) {
  ordered_json j = ordered_json::object();
  j["step"] = trial.step;
  j["config"] = config_to_json(space, trial.config);
  j["loss"] = trial.loss;
  j["proposer_id"] = trial.proposer_id;
  j["duration_s"] = trial.duration_s;
  j["annotations"] = ordered_json::parse(trial.annotations.dump());
  return dump_compact(j);
}

Trial trial_from_json(const SearchSpace& space, const json& line) {
  try {
    Trial t;
    t.step = line.at("step").get<int>();
    t.config = validate_json(space, line.at("config"));
    t.loss = line.at("loss").get<double>();
    t.proposer_id = line.value("proposer_id", std::string{});
    t.duration_s = line.value("duration_s", 0.0);
    t.annotations = line.value("annotations", json::object());
    return t;
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("malformed trial line: {}", e.what()));
  }
}

std::vector<Trial> read_trial_log(const SearchSpace& space, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open trial log '{}'", path));
  std::vector<Trial> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw ConfigError(fmt::format("trial log '{}': {}", path, e.what()));
    }
    out.push_back(trial_from_json(space, j));
  }
  return out;
}

}  // namespace hpo
