#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hpo/space.hpp"
#include "hpo/subprocess.hpp"

namespace hpo {

using Point2 = std::array<double, 2>;

struct Interval {
  double lower;
  double upper;
};

enum class ToyKind { ackley, branin, rosenbrock, himmelblau, quad2d, quad2d_illcond };

struct ToyFunction {
  ToyKind kind;
  std::string name;
  std::array<Interval, 2> domain;
  double known_min;
  Point2 minimizer;
  // Quadratic parameters: (x - center)^T diag(1, condition) (x - center).
  Point2 center{3.7, 3.7};
  double condition = 1.0;
};

// ackley, branin, rosenbrock, himmelblau, quad2d, quad2d_illcond.
ToyFunction make_toy(std::string_view name);
const std::vector<std::string>& toy_names();

double eval_toy(const ToyFunction& f, Point2 x);

struct ShiftedObjective {
  ToyFunction base;
  Point2 shift;
  std::uint64_t seed;

  double eval(Point2 x) const { return eval_toy(base, {x[0] - shift[0], x[1] - shift[1]}); }
};

// shift components drawn from U(0, 1) by a generator seeded with `seed`.
ShiftedObjective make_shifted(const ToyFunction& f, std::uint64_t seed);

// Two real parameters x1, x2 over the function's domain, exchanged as {"x": [x1, x2]}.
SearchSpace toy_space(const ToyFunction& f);

struct EvalResult {
  double loss = 0.0;
  std::vector<double> train_losses;
  double duration_s = 0.0;
  // Set when the objective evaluated a different config than requested
  // (grid snapping on tabular tasks).
  std::optional<Config> evaluated_config;
};

class EvaluationError : public Error {
 public:
  EvaluationError(std::string name, const std::string& message)
      : Error(std::move(name), ErrorCategory::evaluation, message) {}
};

class MissingRow : public EvaluationError {
 public:
  explicit MissingRow(std::string key)
      : EvaluationError("MissingRow", "no tabulated row for " + key), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

// The trainer answered with {"type":"error",...}.
class TrainerError : public EvaluationError {
 public:
  TrainerError(std::string stage, std::string message)
      : EvaluationError("TrainerError", stage + ": " + message), stage_(std::move(stage)), message_(std::move(message)) {}
  const std::string& stage() const noexcept { return stage_; }
  const std::string& trainer_message() const noexcept { return message_; }

 private:
  std::string stage_;
  std::string message_;
};

// Loss oracle over a search space.
class Objective {
 public:
  virtual ~Objective() = default;
  virtual std::string name() const = 0;
  virtual const SearchSpace& space() const = 0;
  // Throws EvaluationError (or a subclass) instead of returning a non-finite loss.
  virtual EvalResult evaluate(const Config& config) = 0;
  // Recorded in run logs (includes the shift for shifted landscapes).
  virtual json info() const = 0;
};

class ToyObjective : public Objective {
 public:
  explicit ToyObjective(ToyFunction f);
  ToyObjective(ToyFunction f, std::uint64_t shift_seed);

  std::string name() const override;
  const SearchSpace& space() const override { return space_; }
  EvalResult evaluate(const Config& config) override;
  json info() const override;

  double eval(Point2 x) const;
  const ToyFunction& function() const { return f_; }
  const std::optional<ShiftedObjective>& shifted() const { return shifted_; }

 private:
  ToyFunction f_;
  std::optional<ShiftedObjective> shifted_;
  SearchSpace space_;
};

struct TabularTask {
  SearchSpace space;
  std::string metric_name;
  // canonical_json(config) -> loss
  std::map<std::string, double> rows;
  std::vector<Config> configs;  // file order
};

// {space: <inline space | builtin name | path>, metric_name, rows: [{config, loss}]}
TabularTask tabular_from_json(const json& doc, const std::string& base_dir = {});
TabularTask load_tabular(const std::string& path);

// Exact match on the canonical key. Throws MissingRow.
double lookup(const TabularTask& task, const Config& config);

// Nearest tabulated config in normalized (log where flagged) coordinates;
// ties go to the earliest row.
const Config& nearest_row(const TabularTask& task, const Config& config);

class TabularObjective : public Objective {
 public:
  TabularObjective(TabularTask task, std::string name, bool snap_to_grid);

  std::string name() const override { return name_; }
  const SearchSpace& space() const override { return task_.space; }
  EvalResult evaluate(const Config& config) override;
  json info() const override;
  const TabularTask& task() const { return task_; }

 private:
  TabularTask task_;
  std::string name_;
  bool snap_;
};

// One evaluation == one {"type":"run","config":{...}} exchange with a
// long-lived trainer process. With `task` set the request is
// {"type":"eval","task":...,"config":{...}} instead.
class ExternalObjective : public Objective {
 public:
  ExternalObjective(SearchSpace space, std::vector<std::string> command, double timeout_s,
                    std::string workdir = {}, std::string task = {});

  std::string name() const override;
  const SearchSpace& space() const override { return space_; }
  EvalResult evaluate(const Config& config) override;
  json info() const override;

 private:
  SearchSpace space_;
  NdjsonChannel channel_;
  std::string workdir_;
  std::string task_;
};

EvalResult run_external(ExternalObjective& objective, const Config& config);

// Builds an objective from a JSON description:
//   {"toy": "branin", "shift_seed": 3}
//   {"tabular": "file.json", "snap": true}
//   {"external": ["python3", "trainer.py"], "space": "svm", "timeout": 60, "task": "svm"}
std::unique_ptr<Objective> make_objective(const json& spec, const std::string& base_dir = {});

}  // namespace hpo
