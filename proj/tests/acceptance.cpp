// Acceptance suite: one PASS/FAIL/SKIP line per criterion, non-zero exit on any FAIL.
#include <fmt/format.h>
#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>
#include <thread>

#include "hpo/assets.hpp"
#include "hpo/bench.hpp"
#include "hpo/bo.hpp"
#include "hpo/llm_proposer.hpp"
#include "hpo/prompts.hpp"
#include "hpo/tuner.hpp"

namespace fs = std::filesystem;
using namespace hpo;

namespace {

struct Outcome {
  enum Kind { pass, fail, skip } kind = pass;
  std::string detail;
};

// Collects failures inside one criterion.
struct Checker {
  std::vector<std::string> failures;
  void expect(bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  }
  Outcome done(const std::string& summary) const {
    if (failures.empty()) return {Outcome::pass, summary};
    std::string d = failures.front();
    if (failures.size() > 1) d += fmt::format(" (+{} more)", failures.size() - 1);
    return {Outcome::fail, d};
  }
};

const fs::path kFixtures = HPO_TEST_FIXTURES;
const fs::path kAssets = kFixtures / ".." / ".." / "assets";

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string golden(const std::string& name) { return slurp(kFixtures / "golden" / name); }

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("hpo_acceptance_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

const prompts::PromptTemplateSet& templates() {
  static const auto t = prompts::PromptTemplateSet::load_default();
  return t;
}

std::vector<std::string> toy_cot_responses(int n) {
  std::vector<std::string> out;
  for (int i = 0; i < n; ++i)
    out.push_back(fmt::format("Analysis: step {} moves along the valley.\nConfig: {{\"x\": [{}, {}]}}", i + 1,
                              -3.0 + 1.25 * i, 1.5 * i));
  return out;
}

std::shared_ptr<llm::ScriptedClient> scripted(const std::vector<std::string>& texts) {
  return std::make_shared<llm::ScriptedClient>(std::vector<llm::ScriptedClient::Entry>(texts.begin(), texts.end()));
}

// Reference formulas, written out independently of the library.
double ref_toy(const std::string& name, double x, double y) {
  const double pi = std::numbers::pi;
  if (name == "ackley")
    return -20.0 * std::exp(-0.2 * std::sqrt(0.5 * (x * x + y * y))) -
           std::exp(0.5 * (std::cos(2 * pi * x) + std::cos(2 * pi * y))) + std::numbers::e + 20.0;
  if (name == "branin") {
    const double b = 5.1 / (4 * pi * pi), c = 5 / pi, t = 1 / (8 * pi);
    return std::pow(y - b * x * x + c * x - 6, 2) + 10 * (1 - t) * std::cos(x) + 10;
  }
  if (name == "rosenbrock") return std::pow(1 - x, 2) + 100 * std::pow(y - x * x, 2);
  if (name == "himmelblau") return std::pow(x * x + y - 11, 2) + std::pow(x + y * y - 7, 2);
  throw std::runtime_error("no reference for " + name);
}

// --- criteria ---------------------------------------------------------------

Outcome golden_prompts() {
  Checker c;
  int n = 0;
  for (const char* name : {"svm", "lr", "rf", "nn"}) {
    const auto space = load_builtin_or_file_space(name);
    c.expect(prompts::build_initial_prompt(templates(), space, 10) == golden(std::string("initial_") + name + ".txt"),
             std::string("initial prompt ") + name);
    ++n;
  }
  const auto branin = toy_space(make_toy("branin"));
  for (int p = 0; p < 4; ++p, ++n)
    c.expect(prompts::build_initial_prompt(templates(), branin, 10, p) ==
                 golden(fmt::format("toy_prompt_{}_branin.txt", p)),
             fmt::format("toy prompt {}", p));
  c.expect(prompts::build_initial_prompt(templates(), toy_space(make_toy("ackley")), 30, 2) ==
               golden("toy_prompt_2_ackley_b30.txt"),
           "toy prompt 2 ackley");
  using prompts::Reasoning;
  const std::pair<std::string, std::string> transitions[] = {
      {prompts::build_transition(templates(), 0.1234, Reasoning::plain, false), "transition_plain.txt"},
      {prompts::build_transition(templates(), 0.1234, Reasoning::cot, false), "transition_cot.txt"},
      {prompts::build_transition(templates(), 0.1234, Reasoning::plain, true), "transition_plain_last.txt"},
      {prompts::build_transition(templates(), 0.1234, Reasoning::cot, true), "transition_cot_last.txt"},
      {prompts::build_transition(templates(), 12345.678, Reasoning::plain, false), "transition_plain_large.txt"}};
  for (const auto& [text, file] : transitions) c.expect(text == golden(file), file), ++n;
  c.expect(prompts::build_transition(templates(), 0.1234, Reasoning::plain, false).starts_with("loss = 1.2340e-01."),
           "loss formatting");
  c.expect(templates().expert_system == golden("expert_system.txt"), "expert system prompt");
  ++n;
  return c.done(fmt::format("{} texts byte-identical", n + 1));
}

Outcome protocol_laws() {
  Checker c;
  ToyObjective obj(make_toy("branin"));
  int runs = 0;
  for (bool expert : {false, true})
    for (auto reasoning : {prompts::Reasoning::plain, prompts::Reasoning::cot}) {
      auto client = scripted((toy_cot_responses(10)));
      LlmProposerOptions o;
      o.expert = expert;
      o.reasoning = reasoning;
      o.model = "scripted";
      LlmProposer p(client, templates(), o);
      run_tuning(obj, p, 10);
      ++runs;
      const auto reqs = client->requests();
      c.expect(reqs.size() == 10, "chat run made " + std::to_string(reqs.size()) + " requests");
      for (std::size_t n = 1; n <= reqs.size(); ++n) {
        const auto& msgs = reqs[n - 1].messages;
        c.expect(msgs.size() == 2 * n - 1 + (expert ? 1 : 0), fmt::format("step {} sent {} messages", n, msgs.size()));
        for (std::size_t k = 0; k < msgs.size(); ++k) {
          const bool carries = msgs[k].content.find("This is the last try.") != std::string::npos;
          const bool should = n == 10 && k + 1 == msgs.size();
          c.expect(carries == should, fmt::format("last-try preface at step {} message {}", n, k));
        }
      }
    }
  auto client = scripted((toy_cot_responses(10)));
  LlmProposerOptions o;
  o.mode = prompts::PromptMode::compressed;
  o.model = "scripted";
  LlmProposer p(client, templates(), o);
  run_tuning(obj, p, 10);
  for (const auto& r : client->requests())
    c.expect(r.messages.size() == 1 && r.messages[0].role == llm::Role::user, "compressed request not one user message");
  return c.done(fmt::format("{} chat runs and 1 compressed run of budget 10", runs));
}

Outcome parser_suite() {
  Checker c;
  const auto cases = json::parse(slurp(kFixtures / "parser_cases.json"));
  c.expect(cases.size() >= 20, "fewer than 20 fixtures");
  for (const auto& k : cases) {
    const auto name = k["name"].get<std::string>();
    const auto text = k["text"].get<std::string>();
    try {
      const auto parsed = prompts::parse_response(text);
      c.expect(!k.contains("error"), name + ": parsed but expected " + k.value("error", std::string{}));
      if (k.contains("config")) c.expect(parsed.config_raw == k["config"], name + ": config");
      c.expect(parsed.analysis.has_value() == k.contains("analysis"), name + ": analysis presence");
      if (parsed.analysis && k.contains("analysis")) c.expect(*parsed.analysis == k["analysis"], name + ": analysis");
    } catch (const prompts::ParseError& e) {
      c.expect(k.contains("error") && e.name() == k["error"], name + ": unexpected " + e.name());
    }
  }
  // Retry policy: persistent garbage consumes at most 1 + R completions.
  ToyObjective obj(make_toy("branin"));
  std::size_t worst = 0;
  for (int good_at = 0; good_at <= 5; ++good_at) {
    std::vector<std::string> texts(6, "I cannot decide.");
    texts[static_cast<std::size_t>(good_at)] = R"({"x": [1, 2]})";
    auto client = scripted((texts));
    LlmProposerOptions o;
    o.model = "scripted";
    LlmProposer p(client, templates(), o);
    History h(10);
    bool ok = true;
    try {
      p.propose(obj.space(), h, 1);
    } catch (const ProposalFailed&) {
      ok = false;
    }
    c.expect(ok == (good_at <= 3), fmt::format("valid reply at attempt {}: success={}", good_at + 1, ok));
    worst = std::max(worst, client->calls());
  }
  c.expect(worst == 4, fmt::format("max completions per step {}", worst));
  return c.done(fmt::format("{} fixtures; at most {} completions per step (R=3)", cases.size(), worst));
}

Outcome toy_correctness() {
  Checker c;
  c.expect(eval_toy(make_toy("ackley"), {0, 0}) == 0.0, "ackley(0,0)");
  c.expect(eval_toy(make_toy("rosenbrock"), {1, 1}) == 0.0, "rosenbrock(1,1)");
  c.expect(eval_toy(make_toy("himmelblau"), {3, 2}) == 0.0, "himmelblau(3,2)");
  const auto branin = make_toy("branin");
  const double pi = std::numbers::pi;
  for (Point2 m : {Point2{-pi, 12.275}, Point2{pi, 2.275}, Point2{9.42478, 2.475}})
    c.expect(std::abs(eval_toy(branin, m) - 0.397887) <= 1e-5, fmt::format("branin at ({}, {})", m[0], m[1]));
  double grid_min = INFINITY;
  for (int i = 0; i <= 600; ++i)
    for (int j = 0; j <= 600; ++j)
      grid_min = std::min(grid_min, eval_toy(branin, {-5 + 15.0 * i / 600, 15.0 * j / 600}));
  c.expect(grid_min >= 0.397887 - 1e-5 && grid_min <= 0.4, fmt::format("branin grid min {}", grid_min));

  std::mt19937_64 gen(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int points = 0;
  for (const auto& name : toy_names()) {
    const auto f = make_toy(name);
    const bool has_ref = name != "quad2d" && name != "quad2d_illcond";
    for (int i = 0; i < 100000; ++i, ++points) {
      const double x = f.domain[0].lower + u(gen) * (f.domain[0].upper - f.domain[0].lower);
      const double y = f.domain[1].lower + u(gen) * (f.domain[1].upper - f.domain[1].lower);
      const double v = eval_toy(f, {x, y});
      if (!(v >= 0.0)) c.expect(false, fmt::format("{}({}, {}) = {}", name, x, y, v));
      if (has_ref && i < 2000) {
        const double r = ref_toy(name, x, y);
        if (std::abs(v - r) > 1e-9 * std::max(1.0, std::abs(r))) c.expect(false, name + " disagrees with reference");
      }
    }
    // Shift identity: f_c(x) == f(x - c) with c drawn from the documented generator.
    for (std::uint64_t seed : {0ull, 1ull, 7ull, 123456789ull}) {
      std::mt19937_64 e(seed);
      const double c1 = static_cast<double>(e() >> 11) * 0x1.0p-53;
      const double c2 = static_cast<double>(e() >> 11) * 0x1.0p-53;
      ToyObjective shifted(f, seed);
      for (int i = 0; i < 1000; ++i) {
        const double x = f.domain[0].lower + u(gen) * (f.domain[0].upper - f.domain[0].lower);
        const double y = f.domain[1].lower + u(gen) * (f.domain[1].upper - f.domain[1].lower);
        if (shifted.eval({x, y}) != eval_toy(f, {x - c1, y - c2})) {
          c.expect(false, fmt::format("shift identity {} seed {}", name, seed));
          break;
        }
      }
    }
  }
  return c.done(fmt::format("exact minima, branin grid min {:.6f}, {} points nonnegative, shifts bit-exact", grid_min,
                            points));
}

// Exact E[min of k draws with replacement] by enumerating every k-tuple.
double exhaustive_best(const std::vector<double>& pool, int k) {
  const std::size_t n = pool.size();
  std::size_t total = 1;
  for (int i = 0; i < k; ++i) total *= n;
  double sum = 0.0;
  for (std::size_t code = 0; code < total; ++code) {
    double best = INFINITY;
    for (std::size_t c = code, i = 0; i < static_cast<std::size_t>(k); ++i, c /= n) best = std::min(best, pool[c % n]);
    sum += best;
  }
  return sum / static_cast<double>(total);
}

Outcome bootstrap_oracle() {
  Checker c;
  std::vector<double> pool;
  for (int i = 1; i <= 10; ++i) pool.push_back(i / 10.0);
  const double exact2 = exhaustive_best(pool, 2), exact1 = exhaustive_best(pool, 1);
  c.expect(std::abs(exact2 - 0.385) < 1e-12, fmt::format("enumeration k=2 gives {}", exact2));
  c.expect(std::abs(exact1 - 0.55) < 1e-12, fmt::format("enumeration k=1 gives {}", exact1));
  const auto b2 = bench::bootstrap_best(pool, 2, 100000, 11);
  const auto b1 = bench::bootstrap_best(pool, 1, 100000, 12);
  c.expect(std::abs(b2.mean - exact2) <= 3 * b2.stderr_, fmt::format("k=2 bootstrap {} se {}", b2.mean, b2.stderr_));
  c.expect(std::abs(b1.mean - exact1) <= 3 * b1.stderr_, fmt::format("k=1 bootstrap {} se {}", b1.mean, b1.stderr_));
  const auto k = bench::bootstrap_best(std::vector<double>(37, 4.25), 10, 1000, 3);
  c.expect(k.mean == 4.25 && k.stddev == 0.0, "constant pool");
  return c.done(fmt::format("k=2 {:.5f} (exact 0.385, se {:.1e}); k=1 {:.5f}; constant pool exact", b2.mean,
                            b2.stderr_, b1.mean));
}

Outcome random_calibration() {
  Checker c;
  struct Target {
    const char* toy;
    double mean;
    double tol;
  };
  std::string summary;
  for (const auto& t : {Target{"ackley", 5.28, 1.0}, Target{"branin", 5.83, 2.0}, Target{"himmelblau", 20.39, 6.0},
                        Target{"rosenbrock", 481.0, 250.0}}) {
    ToyObjective obj(make_toy(t.toy));
    double sum = 0.0;
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
      RandomProposer p(seed);
      sum += best_so_far(run_tuning(obj, p, 10)).loss;
    }
    const double mean = sum / 1000;
    c.expect(std::abs(mean - t.mean) <= t.tol, fmt::format("{} mean best-of-10 {:.4g} vs {} ± {}", t.toy, mean,
                                                           t.mean, t.tol));
    summary += fmt::format("{}{} {:.4g}", summary.empty() ? "" : ", ", t.toy, mean);
  }
  return c.done(summary + " (1000 runs each)");
}

Outcome bo_sanity() {
  Checker c;
  // Interpolation at training points.
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto branin = make_toy("branin");
  Eigen::MatrixXd X(12, 2);
  Eigen::VectorXd y(12);
  for (Eigen::Index i = 0; i < 12; ++i) {
    X(i, 0) = u(gen);
    X(i, 1) = u(gen);
    y(i) = eval_toy(branin, {-5 + 15 * X(i, 0), 15 * X(i, 1)});
  }
  const auto gp = bo::fit(X, y);
  double max_var = 0.0, max_err = 0.0;
  for (Eigen::Index i = 0; i < 12; ++i) {
    const auto p = bo::posterior(gp, X.row(i).transpose());
    max_var = std::max(max_var, p.variance);
    max_err = std::max(max_err, std::abs(gp.scaler.destandardize(p.mean) - y(i)) / gp.scaler.scale);
  }
  c.expect(max_var <= 1e-5, fmt::format("posterior variance at data {}", max_var));
  c.expect(max_err <= 1e-2, fmt::format("posterior mean misses data by {}", max_err));

  // EI against Monte Carlo, one fixed stream per triple, and against trapezoid quadrature.
  int ei_ok = 0;
  double max_quad_err = 0.0;
  for (int t = 0; t < 20; ++t) {
    const double mu = -2.0 + 4.0 * u(gen), sigma = 0.05 + 2.0 * u(gen), best = -1.0 + 2.0 * u(gen);
    const double xi = t % 2 ? 0.01 : 0.0;
    const double ei = bo::expected_improvement(mu, sigma, best, xi);
    // Integral of (best - xi - f) N(f; mu, sigma) over f < best - xi.
    const double hi = best - xi, lo = std::min(hi, mu) - 12 * sigma;
    const int steps = 200000;
    const double h = (hi - lo) / steps;
    double quad = 0.0;
    for (int i = 0; i <= steps; ++i) {
      const double f = lo + i * h, z = (f - mu) / sigma;
      const double g = (hi - f) * std::exp(-0.5 * z * z) / (sigma * std::sqrt(2 * std::numbers::pi));
      quad += (i == 0 || i == steps ? 0.5 : 1.0) * g;
    }
    quad *= h;
    max_quad_err = std::max(max_quad_err, std::abs(quad - ei));
    c.expect(std::abs(quad - ei) <= 1e-9, fmt::format("EI({}, {}, {}) = {} vs quadrature {}", mu, sigma, best, ei, quad));

    std::mt19937_64 mc(1000 + t);
    std::normal_distribution<double> normal(0.0, 1.0);
    const int N = 1000000;
    double s = 0.0, s2 = 0.0;
    for (int i = 0; i < N; ++i) {
      const double imp = std::max(best - xi - (mu + sigma * normal(mc)), 0.0);
      s += imp;
      s2 += imp * imp;
    }
    const double m = s / N, se = std::sqrt((s2 / N - m * m) / N);
    if (std::abs(ei - m) <= 3 * se + 1e-12)
      ++ei_ok;
    else
      c.expect(false, fmt::format("EI({}, {}, {}) = {} vs MC {} ± {}", mu, sigma, best, ei, m, se));
  }

  // GP-EI vs the bootstrapped random baseline on the toy benchmark.
  auto spec = bench::load_spec((kAssets / "bench" / "toy_spec.json").string());
  spec.seeds.clear();
  for (std::uint64_t s = 0; s < 20; ++s) spec.seeds.push_back(s);
  spec.output_dir = scratch("bo_vs_random").string();
  spec.jobs = std::max(1u, std::thread::hardware_concurrency());
  std::erase_if(spec.proposers, [](const auto& p) { return p.settings.value("kind", "") != "bo"; });
  const auto result = bench::run_experiment(spec);
  const auto& id = spec.proposers.front().id;
  int wins = 0;
  std::string losses;
  for (std::size_t t = 0; t < result.report.tasks.size(); ++t) {
    if (result.report.errors.at(id)[t] < result.random[t].estimate.mean)
      ++wins;
    else
      losses += " " + result.report.tasks[t];
  }
  for (const auto& r : result.records) c.expect(r.error.empty(), "bo run failed: " + r.error);
  c.expect(wins >= 7, fmt::format("GP-EI beats random on {}/10 tasks", wins));
  return c.done(fmt::format("max var at data {:.1e}; EI within 3 SE at {}/20, quadrature error {:.1e}; GP-EI beats random on {}/{} tasks{}",
                            max_var, ei_ok, max_quad_err, wins, result.report.tasks.size(),
                            losses.empty() ? "" : " (not:" + losses + ")"));
}

Outcome metrics() {
  Checker c;
  c.expect(bench::relative_change(0.2, 0.1) == 50.0, "relative_change(0.2, 0.1)");
  c.expect(bench::relative_change(0.1, 0.1) == 0.0, "relative_change(0.1, 0.1)");
  // Hand ranks: task 1 ties b and c for second place, task 2 ties all three.
  const auto r = bench::mean_rank({{"a", {0.1, 0.5, 3.0}}, {"b", {0.2, 0.5, 2.0}}, {"c", {0.2, 0.5, 1.0}}});
  c.expect(r.at("a") == (1.0 + 2.0 + 3.0) / 3, "rank a");
  c.expect(r.at("b") == (2.5 + 2.0 + 2.0) / 3, "rank b");
  c.expect(r.at("c") == (2.5 + 2.0 + 1.0) / 3, "rank c");
  std::map<std::string, std::vector<double>> same;
  for (int m = 0; m < 6; ++m) same["m" + std::to_string(m)] = {0.3, 0.7};
  for (const auto& [m, v] : bench::mean_rank(same)) c.expect(v == 3.5, "identical methods rank " + std::to_string(v));

  auto spec = bench::load_spec((kAssets / "bench" / "toy_spec.json").string());
  spec.output_dir = scratch("metrics_a").string();
  spec.jobs = 1;
  bench::run_experiment(spec);
  auto again = spec;
  again.output_dir = scratch("metrics_b").string();
  again.jobs = 4;
  bench::run_experiment(again);
  for (const char* f : {"records.jsonl", "random_baseline.jsonl", "report.csv", "report.md"})
    c.expect(slurp(fs::path(spec.output_dir) / f) == slurp(fs::path(again.output_dir) / f),
             std::string(f) + " differs between runs");
  const auto rebuilt = bench::report_from_files((fs::path(spec.output_dir) / "records.jsonl").string());
  c.expect(bench::report_csv(rebuilt) == slurp(fs::path(spec.output_dir) / "report.csv"), "report.csv not reproducible");
  c.expect(bench::report_markdown(rebuilt) == slurp(fs::path(spec.output_dir) / "report.md"),
           "report.md not reproducible");
  return c.done("relative change, tie ranks, 6-way tie 3.5, report bytes identical across runs and recomputation");
}

int shell(const std::string& cmd) {
  const int raw = std::system(cmd.c_str());
  return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

Outcome end_to_end() {
  Checker c;
  const auto dir = scratch("e2e");
  json script = json::array();
  for (const auto& t : toy_cot_responses(10)) script.push_back(t);
  std::ofstream(dir / "script.json") << script.dump();
  const std::string cli = HPO_CLI;
  const int tune = shell(fmt::format(
      "'{}' tune --objective branin --shift-seed 3 --proposer llm --reasoning cot --script '{}' --budget 10 "
      "--out '{}' >'{}' 2>&1",
      cli, (dir / "script.json").string(), (dir / "run").string(), (dir / "tune.log").string()));
  c.expect(tune == 0, fmt::format("tune exited {}", tune));
  std::vector<json> trials;
  if (fs::exists(dir / "run" / "trials.jsonl")) {
    std::ifstream in(dir / "run" / "trials.jsonl");
    for (std::string line; std::getline(in, line);)
      if (!line.empty()) trials.push_back(json::parse(line));
  }
  c.expect(trials.size() == 10, fmt::format("{} trials logged", trials.size()));
  for (std::size_t i = 0; i < trials.size(); ++i) {
    const auto& a = trials[i]["annotations"];
    c.expect(a.value("raw_response", std::string{}) == script[i], fmt::format("raw response of trial {}", i + 1));
    c.expect(a.value("tokens_in", 0) > 0 && a.value("tokens_out", 0) > 0, fmt::format("tokens of trial {}", i + 1));
    c.expect(a.contains("analysis"), fmt::format("analysis of trial {}", i + 1));
  }
  const int replay = shell(fmt::format("'{}' replay --trace '{}' --tolerance 1e-12 >'{}' 2>&1", cli,
                                       (dir / "run" / "trials.jsonl").string(), (dir / "replay.log").string()));
  c.expect(replay == 0, "replay reported mismatches: " + slurp(dir / "replay.log"));

  // Independent recomputation of the logged losses.
  std::mt19937_64 e(3);
  const double c1 = static_cast<double>(e() >> 11) * 0x1.0p-53;
  const double c2 = static_cast<double>(e() >> 11) * 0x1.0p-53;
  for (const auto& t : trials) {
    const auto x = t["config"]["x"];
    const double ref = ref_toy("branin", x[0].get<double>() - c1, x[1].get<double>() - c2);
    c.expect(std::abs(ref - t["loss"].get<double>()) <= 1e-9 * std::max(1.0, ref), "loss disagrees with reference");
  }
  return c.done("10 CoT trials with raw responses and token counts; replay exact to 1e-12");
}

Outcome live_smoke() {
  const char* key = std::getenv("LLM_API_KEY");
  if (key == nullptr || *key == '\0') return {Outcome::skip, "LLM_API_KEY not set"};
  Checker c;
  try {
    auto endpoint = llm::endpoint_from_env();
    if (endpoint.model.empty()) return {Outcome::skip, "LLM_MODEL not set"};
    auto client = std::make_shared<llm::HttpClient>(endpoint);
    LlmProposerOptions o;
    o.model = endpoint.model;
    LlmProposer p(client, templates(), o, std::make_shared<llm::CostLedger>());
    ToyObjective obj(make_toy("branin"));
    try {
      const auto h = run_tuning(obj, p, 3);
      for (const auto& t : h.trials())
        c.expect(check(obj.space(), t.config.values).empty(), "out-of-range config");
      return c.done(fmt::format("{} trials, best {:.4g}", h.size(), best_so_far(h).loss));
    } catch (const ProposalFailed& e) {
      return c.done(std::string("clean ProposalFailed: ") + e.what());
    }
  } catch (const std::exception& e) {
    return {Outcome::fail, e.what()};
  }
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"golden prompts", golden_prompts},
      {"protocol laws", protocol_laws},
      {"parser suite", parser_suite},
      {"toy-function correctness", toy_correctness},
      {"bootstrap oracle", bootstrap_oracle},
      {"random-baseline calibration", random_calibration},
      {"BO sanity", bo_sanity},
      {"metrics", metrics},
      {"end-to-end scripted LLM run", end_to_end},
      {"live smoke", live_smoke},
  };
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {Outcome::fail, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const char* tag = o.kind == Outcome::pass ? "PASS" : o.kind == Outcome::fail ? "FAIL" : "SKIP";
    if (o.kind == Outcome::fail) ++failed;
    std::cout << fmt::format("{} {} [{:.2f}s]: {}", tag, name, secs, o.detail) << std::endl;
  }
  return failed ? 1 : 0;
}
