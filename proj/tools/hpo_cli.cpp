#include <CLI11.hpp>
#include <fmt/format.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "hpo/assets.hpp"
#include "hpo/bench.hpp"
#include "hpo/codegen.hpp"
#include "hpo/llm_proposer.hpp"
#include "hpo/tuner.hpp"

namespace fs = std::filesystem;
using namespace hpo;

namespace {

std::vector<std::string> split_command(const std::string& text) {
  std::istringstream in(text);
  std::vector<std::string> argv;
  for (std::string word; in >> word;) argv.push_back(word);
  if (argv.empty()) throw ConfigError("empty command");
  return argv;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
}

json read_json(const std::string& path) {
  try {
    return json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

struct TuneArgs {
  std::string space;
  std::string objective;
  std::string external;
  std::string task;
  double timeout = 600.0;
  std::optional<std::uint64_t> shift_seed;
  std::string proposer = "random";
  std::string first = "llm";
  std::string second = "bo";
  int switch_step = 10;
  std::string trace;
  std::string script;
  int budget = 10;
  std::uint64_t seed = 0;
  std::string mode = "chat";
  std::string reasoning = "plain";
  bool expert = false;
  double temperature = 0.0;
  int toy_prompt = 2;
  std::string model;
  bool clamp = false;
  bool fallback = false;
  std::string out;
};

// Objective description in the make_objective format.
json objective_spec(const TuneArgs& a) {
  if (!a.external.empty()) {
    if (a.space.empty()) throw ConfigError("--external needs --space");
    json j{{"external", split_command(a.external)}, {"space", a.space}, {"timeout", a.timeout}};
    if (!a.task.empty()) j["task"] = a.task;
    return j;
  }
  if (a.objective.empty()) throw ConfigError("one of --objective or --external is required");
  if (fs::exists(a.objective)) {
    const auto doc = read_json(a.objective);
    const auto path = fs::absolute(a.objective).string();
    if (doc.contains("rows")) return {{"tabular", path}};
    return doc;
  }
  json j{{"toy", a.objective}};
  if (a.shift_seed) j["shift_seed"] = *a.shift_seed;
  return j;
}

json proposer_spec(const TuneArgs& a, const std::string& kind) {
  json j{{"kind", kind}};
  if (kind == "llm") {
    j["mode"] = a.mode;
    j["reasoning"] = a.reasoning;
    j["expert"] = a.expert;
    j["temperature"] = a.temperature;
    j["toy_prompt"] = a.toy_prompt;
    j["clamp"] = a.clamp;
    j["fallback"] = a.fallback;
    if (!a.model.empty()) j["model"] = a.model;
    if (!a.script.empty()) j["script"] = fs::absolute(a.script).string();
  } else if (kind == "replay") {
    if (a.trace.empty()) throw ConfigError("--proposer replay needs --trace");
    j["trace"] = fs::absolute(a.trace).string();
  } else if (kind == "hybrid") {
    j["first"] = proposer_spec(a, a.first);
    j["second"] = proposer_spec(a, a.second);
    j["switch_step"] = a.switch_step;
  } else if (kind != "random" && kind != "bo") {
    throw ConfigError("UnknownProposer", "unknown proposer " + kind);
  }
  return j;
}

int cmd_tune(const TuneArgs& a) {
  const auto ospec = objective_spec(a);
  auto objective = make_objective(ospec);
  const auto pspec = proposer_spec(a, a.proposer);
  auto ledger = std::make_shared<llm::CostLedger>();
  auto proposer = bench::make_proposer(pspec, a.seed, {&objective->space(), {}, ledger});

  std::ofstream log;
  if (!a.out.empty()) {
    fs::create_directories(a.out);
    log.open(fs::path(a.out) / "trials.jsonl", std::ios::binary);
  }
  const auto& space = objective->space();
  auto history = run_tuning(*objective, *proposer, a.budget, [&](const Trial& t) {
    if (log) log << trial_to_jsonl(space, t) << '\n' << std::flush;
  });

  const auto& best = best_so_far(history);
  ordered_json summary;
  summary["objective"] = ospec;
  summary["objective_info"] = objective->info();
  summary["proposer"] = pspec;
  summary["budget"] = a.budget;
  summary["seed"] = a.seed;
  summary["best_step"] = best.step;
  summary["best_config"] = config_to_json(space, best.config);
  summary["best_loss"] = best.loss;
  summary["cost"] = ledger->summary();
  if (!a.out.empty()) write_text(fs::path(a.out) / "run.json", summary.dump(2) + "\n");
  std::cout << fmt::format("best loss {} at step {}: {}\n", format_float(best.loss), best.step,
                           canonical_json(space, best.config));
  std::cout << "cost " << ordered_json(ledger->summary()).dump() << '\n';
  return 0;
}

int cmd_replay(const std::string& trace, const std::string& run_file, TuneArgs a, std::optional<double> tolerance) {
  json ospec;
  const auto run_path = !run_file.empty() ? fs::path(run_file) : fs::path(trace).parent_path() / "run.json";
  if (a.objective.empty() && a.external.empty()) {
    if (!fs::exists(run_path)) throw ConfigError("no run.json next to the trace; pass --objective or --run");
    ospec = read_json(run_path.string()).at("objective");
  } else {
    ospec = objective_spec(a);
  }
  auto objective = make_objective(ospec);
  const auto trials = read_trial_log(objective->space(), trace);
  const double tol = tolerance.value_or(ospec.contains("toy") ? 1e-12 : 0.0);
  const auto mismatches = verify_replay(*objective, trials, tol);
  for (const auto& m : mismatches)
    std::cout << fmt::format("step {}: logged {} recomputed {}\n", m.step, format_float(m.logged),
                             format_float(m.recomputed));
  std::cout << fmt::format("{} trials, {} mismatches (tolerance {})\n", trials.size(), mismatches.size(),
                           format_float(tol));
  return mismatches.empty() ? 0 : 1;
}

int cmd_bench(const std::string& spec_path, std::optional<int> jobs, const std::string& out) {
  auto spec = bench::load_spec(spec_path);
  if (jobs) spec.jobs = *jobs;
  if (!out.empty()) spec.output_dir = out;
  const auto result = bench::run_experiment(spec);
  std::cout << bench::report_csv(result.report);
  std::size_t failed = 0;
  for (const auto& r : result.records)
    if (!r.error.empty()) ++failed;
  if (failed) std::cerr << failed << " runs failed; see records.jsonl\n";
  std::cout << "wrote " << spec.output_dir << '\n';
  return 0;
}

int cmd_report(const std::string& records, const std::string& baseline, const std::string& out) {
  const auto rep = bench::report_from_files(records, baseline);
  if (out.empty()) {
    std::cout << bench::report_markdown(rep);
    return 0;
  }
  fs::create_directories(out);
  write_text(fs::path(out) / "report.csv", bench::report_csv(rep));
  write_text(fs::path(out) / "report.md", bench::report_markdown(rep));
  return 0;
}

struct CodegenArgs {
  std::string dataset;
  int budget = 5;
  std::string runner;
  double timeout = 600.0;
  int epochs = 10;
  std::uint64_t seed = 0;
  int max_regen = 3;
  std::string script;
  std::string model;
  double temperature = 0.0;
  std::string out;
};

int cmd_codegen(const CodegenArgs& a) {
  const auto dataset = codegen::load_dataset(a.dataset);
  std::unique_ptr<llm::Client> client;
  std::string model = a.model;
  if (!a.script.empty()) {
    std::vector<llm::ScriptedClient::Entry> entries;
    for (const auto& t : read_json(a.script)) entries.emplace_back(t.get<std::string>());
    client = std::make_unique<llm::ScriptedClient>(std::move(entries), false);
    if (model.empty()) model = "scripted";
  } else {
    auto endpoint = llm::endpoint_from_env();
    if (!model.empty()) endpoint.model = model;
    if (endpoint.model.empty()) throw ConfigError("MissingModel", "set LLM_MODEL or --model");
    model = endpoint.model;
    client = std::make_unique<llm::HttpClient>(endpoint);
  }
  auto runner_cmd = a.runner.empty() ? std::vector<std::string>{"trainer-runner", "--dataset", a.dataset}
                                     : split_command(a.runner);
  TrainerClient runner(runner_cmd, a.timeout);

  std::ofstream log;
  if (!a.out.empty()) {
    fs::create_directories(a.out);
    log.open(fs::path(a.out) / "codegen.jsonl", std::ios::binary);
  }
  codegen::CodegenOptions o;
  o.budget = a.budget;
  o.max_regen = a.max_regen;
  o.epochs = a.epochs;
  o.seed = a.seed;
  o.model = model;
  o.temperature = a.temperature;
  o.log = [&](const std::string& kind, const json& payload) {
    if (log) log << ordered_json{{"event", kind}, {"data", payload}}.dump() << '\n' << std::flush;
  };
  const auto result =
      codegen::run_codegen_session(*client, runner, dataset, codegen::CodegenTemplates::load_default(), o);
  if (!a.out.empty()) {
    write_text(fs::path(a.out) / "program.py", result.program.code);
    json transcript = json::array();
    for (const auto& m : result.transcript) transcript.push_back({{"role", llm::to_string(m.role)}, {"content", m.content}});
    write_text(fs::path(a.out) / "transcript.json", transcript.dump(2) + "\n");
  }
  if (!result.best) {
    std::cout << "no trial produced a validation loss\n";
    return 3;
  }
  const auto& best = result.trials[*result.best];
  std::cout << fmt::format("best val_loss {} at trial {}: {}\n", format_fixed3(best.feedback->val_loss),
                           best.index + 1, best.arguments.dump());
  return 0;
}

int exit_code(const Error& e) {
  switch (e.category()) {
    case ErrorCategory::config: return 2;
    case ErrorCategory::evaluation: return 3;
    case ErrorCategory::llm: return 4;
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hyperparameter optimization with pluggable proposers"};
  app.require_subcommand(1);

  TuneArgs tune;
  auto add_objective_flags = [](CLI::App* c, TuneArgs& a) {
    c->add_option("--space", a.space, "Built-in space (svm, lr, rf, nn) or space JSON file");
    c->add_option("--objective", a.objective, "Toy function name, tabular task file or objective JSON file");
    c->add_option("--external", a.external, "Trainer command speaking the NDJSON protocol");
    c->add_option("--task", a.task, "Task name sent to the external trainer");
    c->add_option("--timeout", a.timeout, "Seconds per external evaluation");
    c->add_option("--shift-seed", a.shift_seed, "Shift a toy function by c ~ U(0,1)^2 drawn from this seed");
  };
  auto* t = app.add_subcommand("tune", "Run one tuning loop");
  add_objective_flags(t, tune);
  t->add_option("--proposer", tune.proposer, "random, bo, llm, replay or hybrid")
      ->check(CLI::IsMember({"random", "bo", "llm", "replay", "hybrid"}));
  t->add_option("--first", tune.first, "Hybrid: proposer for the first steps");
  t->add_option("--second", tune.second, "Hybrid: proposer after the switch");
  t->add_option("--switch-step", tune.switch_step, "Hybrid: last step handled by --first");
  t->add_option("--trace", tune.trace, "Replay: trials.jsonl to re-propose");
  t->add_option("--script", tune.script, "LLM: JSON list of canned responses instead of an endpoint");
  t->add_option("--budget", tune.budget)->check(CLI::PositiveNumber);
  t->add_option("--seed", tune.seed);
  t->add_option("--mode", tune.mode)->check(CLI::IsMember({"chat", "compressed"}));
  t->add_option("--reasoning", tune.reasoning)->check(CLI::IsMember({"plain", "cot"}));
  t->add_flag("--expert", tune.expert, "Add the expert system prompt");
  t->add_option("--temperature", tune.temperature)->check(CLI::NonNegativeNumber);
  t->add_option("--toy-prompt", tune.toy_prompt)->check(CLI::Range(0, 3));
  t->add_option("--model", tune.model);
  t->add_flag("--clamp", tune.clamp, "Clamp out-of-range LLM proposals instead of re-asking");
  t->add_flag("--fallback", tune.fallback, "Fall back to a random config when the LLM gives no valid config");
  t->add_option("--out", tune.out, "Directory for trials.jsonl and run.json");

  TuneArgs rargs;
  std::string trace, run_file;
  std::optional<double> tolerance;
  auto* r = app.add_subcommand("replay", "Re-evaluate a logged trajectory and compare losses");
  r->add_option("--trace", trace)->required();
  r->add_option("--run", run_file, "run.json describing the objective (default: next to the trace)");
  r->add_option("--tolerance", tolerance);
  add_objective_flags(r, rargs);

  std::string spec_path, bench_out;
  std::optional<int> jobs;
  auto* b = app.add_subcommand("bench", "Run an experiment grid");
  b->add_option("--spec", spec_path)->required();
  b->add_option("--jobs", jobs)->check(CLI::PositiveNumber);
  b->add_option("--out", bench_out, "Override the spec's output_dir");

  std::string records, baseline, report_out;
  auto* rep = app.add_subcommand("report", "Recompute metrics from bench records");
  rep->add_option("--records", records)->required();
  rep->add_option("--baseline", baseline, "random_baseline.jsonl (default: next to the records)");
  rep->add_option("--out", report_out, "Write report.csv and report.md here instead of printing");

  CodegenArgs cg;
  auto* c = app.add_subcommand("codegen", "Generate and tune a model-building program");
  c->add_option("--dataset", cg.dataset)->required();
  c->add_option("--budget", cg.budget)->check(CLI::PositiveNumber);
  c->add_option("--runner", cg.runner, "Trainer-runner command (default: trainer-runner --dataset FILE)");
  c->add_option("--timeout", cg.timeout);
  c->add_option("--epochs", cg.epochs)->check(CLI::PositiveNumber);
  c->add_option("--seed", cg.seed);
  c->add_option("--max-regen", cg.max_regen)->check(CLI::NonNegativeNumber);
  c->add_option("--script", cg.script, "JSON list of canned responses instead of an endpoint");
  c->add_option("--model", cg.model);
  c->add_option("--temperature", cg.temperature)->check(CLI::NonNegativeNumber);
  c->add_option("--out", cg.out);

  CLI11_PARSE(app, argc, argv);

  try {
    if (t->parsed()) return cmd_tune(tune);
    if (r->parsed()) return cmd_replay(trace, run_file, rargs, tolerance);
    if (b->parsed()) return cmd_bench(spec_path, jobs, bench_out);
    if (rep->parsed()) return cmd_report(records, baseline, report_out);
    if (c->parsed()) return cmd_codegen(cg);
  } catch (const Error& e) {
    std::cerr << e.name() << ": " << e.what() << '\n';
    return exit_code(e);
  } catch (const std::exception& e) {
    std::cerr << "InternalError: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
