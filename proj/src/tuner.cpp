#include "hpo/tuner.hpp"

#include <cmath>

namespace hpo {

void continue_tuning(Objective& objective, Proposer& proposer, History& history, const TrialCallback& on_trial) {
  const auto& space = objective.space();
  while (static_cast<int>(history.size()) < history.budget()) {
    const int step = static_cast<int>(history.size()) + 1;
    Proposal proposal = proposer.propose(space, history, step);
    EvalResult result = objective.evaluate(proposal.config);

    Trial trial;
    trial.config = proposal.config;
    trial.loss = result.loss;
    trial.proposer_id = proposal.proposer_id;
    trial.duration_s = result.duration_s;
    trial.annotations = std::move(proposal.annotations);
    if (result.evaluated_config) {
      trial.annotations["snapped_from"] = json::parse(canonical_json(space, proposal.config));
      trial.config = *result.evaluated_config;
    }
    if (!result.train_losses.empty()) trial.annotations["train_losses"] = result.train_losses;
    const Trial& stored = history.append(std::move(trial));
    if (on_trial) on_trial(stored);
  }
}

History run_tuning(Objective& objective, Proposer& proposer, int budget, const TrialCallback& on_trial) {
  History history(budget);
  continue_tuning(objective, proposer, history, on_trial);
  return history;
}

std::vector<ReplayMismatch> verify_replay(Objective& objective, const std::vector<Trial>& trials, double tolerance) {
  std::vector<ReplayMismatch> out;
  for (const auto& t : trials) {
    const double loss = objective.evaluate(t.config).loss;
    const bool ok = tolerance == 0.0 ? loss == t.loss : std::abs(loss - t.loss) <= tolerance;
    if (!ok) out.push_back({t.step, t.loss, loss});
  }
  return out;
}

}  // namespace hpo
