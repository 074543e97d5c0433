#pragma once

#include <functional>

#include "hpo/objectives.hpp"
#include "hpo/proposers.hpp"

namespace hpo {

using TrialCallback = std::function<void(const Trial&)>;

// The sequential loop: propose, evaluate, record, until `budget` trials exist.
// Never evaluates more than `budget` configs. Proposer and evaluation errors
// propagate; trials recorded before the failure are passed to `on_trial`.
History run_tuning(Objective& objective, Proposer& proposer, int budget, const TrialCallback& on_trial = {});

// Continues an existing history up to its budget.
void continue_tuning(Objective& objective, Proposer& proposer, History& history, const TrialCallback& on_trial = {});

struct ReplayMismatch {
  int step;
  double logged;
  double recomputed;
};

// Re-evaluates each logged config and compares losses with |a-b| <= tolerance
// (0 means exact equality).
std::vector<ReplayMismatch> verify_replay(Objective& objective, const std::vector<Trial>& trials, double tolerance);

}  // namespace hpo
