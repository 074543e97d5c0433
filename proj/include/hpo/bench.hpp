#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hpo/llm_client.hpp"
#include "hpo/objectives.hpp"
#include "hpo/proposers.hpp"

namespace hpo::bench {

struct RandomPool {
  std::string task;
  std::vector<double> losses;
  std::uint64_t seed = 0;
};

// n independent random configs, evaluated in order. Evaluation errors propagate.
RandomPool build_random_pool(Objective& objective, int n = 500, std::uint64_t seed = 0, std::string task = {});

struct BootstrapEstimate {
  double mean = 0.0;
  double stderr_ = 0.0;  // std / sqrt(B)
  double stddev = 0.0;   // spread of best-of-k across resamples
};

// B resamples of k losses drawn with replacement; statistics of their minima.
BootstrapEstimate bootstrap_best(const std::vector<double>& pool, int k, int B = 1000, std::uint64_t seed = 0);

class ZeroBaseline : public Error {
 public:
  ZeroBaseline() : Error("ZeroBaseline", ErrorCategory::config, "relative change needs a positive random error") {}
};

// 100 (e_random - e_method) / e_random.
double relative_change(double e_random, double e_method);

class MissingEntry : public Error {
 public:
  explicit MissingEntry(const std::string& what) : Error("MissingEntry", ErrorCategory::config, what) {}
};

// Per-task ascending ranks with ties averaged, then the mean over tasks.
// errors[method][task]; every method needs the same number of tasks.
std::map<std::string, double> mean_rank(const std::map<std::string, std::vector<double>>& errors);

// Proposer construction from a JSON description:
//   {"kind":"random"} {"kind":"bo","xi":0.01,"candidates":2048,"initial_design":3}
//   {"kind":"llm","model":..,"temperature":0,"mode":"chat","reasoning":"cot","expert":false,"script":"file.json"}
//   {"kind":"replay","trace":"trials.jsonl"}
//   {"kind":"hybrid","first":{..},"second":{..},"switch_step":10}
struct ProposerContext {
  const SearchSpace* space = nullptr;
  std::string base_dir;
  std::shared_ptr<llm::CostLedger> ledger;
};

std::shared_ptr<Proposer> make_proposer(const json& spec, std::uint64_t seed, const ProposerContext& context);

struct TaskSpec {
  std::string name;
  json objective;
};

struct ProposerSpec {
  std::string id;
  json settings;
};

struct ExperimentSpec {
  std::vector<TaskSpec> tasks;
  std::vector<ProposerSpec> proposers;
  int budget = 10;
  std::vector<std::uint64_t> seeds;
  int pool_size = 500;
  int bootstrap_B = 1000;
  std::uint64_t pool_seed = 0;
  std::string output_dir = "bench_out";
  int jobs = 1;
  std::string base_dir;  // relative paths in the spec resolve against this
};

ExperimentSpec spec_from_json(const json& doc, const std::string& base_dir = {});
ExperimentSpec load_spec(const std::string& path);

struct RunRecord {
  std::string task;
  std::string proposer_id;
  std::uint64_t seed = 0;
  std::vector<Trial> trials;
  json cost = json::object();
  std::string error;  // set when the run failed part-way
};

std::optional<double> best_loss(const RunRecord& record);

struct RandomBaseline {
  std::string task;
  int pool_size = 0;
  BootstrapEstimate estimate;
  double pool_min = 0.0;
  double pool_max = 0.0;
};

struct MetricsReport {
  std::vector<std::string> tasks;
  std::vector<std::string> methods;  // proposers in spec order
  // method -> per-task mean best error over seeds (NaN when no run succeeded)
  std::map<std::string, std::vector<double>> errors;
  std::vector<RandomBaseline> random;
  std::map<std::string, double> beats_random;
  std::map<std::string, double> median_change;
  std::map<std::string, double> mean_change;
  std::map<std::string, double> mean_rank;  // "random" included
};

MetricsReport compute_report(const std::vector<RunRecord>& records, const std::vector<RandomBaseline>& random,
                             const std::vector<std::string>& methods);
std::string report_csv(const MetricsReport& report);
std::string report_markdown(const MetricsReport& report);

json record_to_json(const SearchSpace& space, const RunRecord& record);
json baseline_to_json(const RandomBaseline& baseline);
RandomBaseline baseline_from_json(const json& doc);

struct ExperimentResult {
  std::vector<RunRecord> records;
  std::vector<RandomBaseline> random;
  MetricsReport report;
};

// Runs tasks x proposers x seeds on `jobs` threads and writes records.jsonl,
// random_baseline.jsonl, report.csv and report.md under output_dir.
ExperimentResult run_experiment(const ExperimentSpec& spec);

// Rebuilds the report from the files written by run_experiment.
MetricsReport report_from_files(const std::string& records_path, const std::string& baseline_path = {});

}  // namespace hpo::bench
