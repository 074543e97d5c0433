#include "hpo/bench.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "hpo/assets.hpp"
#include "hpo/bo.hpp"
#include "hpo/llm_proposer.hpp"
#include "hpo/tuner.hpp"

namespace fs = std::filesystem;

namespace hpo::bench {

namespace {

constexpr const char* kBaselineName = "random_baseline";

std::string resolve(const std::string& base_dir, const std::string& path) {
  if (path.empty() || base_dir.empty() || fs::path(path).is_absolute()) return path;
  return (fs::path(base_dir) / path).string();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
}

std::string fmt_num(double v) {
  if (std::isnan(v)) return "nan";
  return fmt::format("{:.6g}", v);
}

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

RandomPool build_random_pool(Objective& objective, int n, std::uint64_t seed, std::string task) {
  if (n < 1) throw ConfigError("pool size must be positive");
  RandomPool pool{std::move(task), {}, seed};
  pool.losses.reserve(static_cast<std::size_t>(n));
  Rng rng(seed);
  for (int i = 0; i < n; ++i) pool.losses.push_back(objective.evaluate(random_propose(objective.space(), rng)).loss);
  return pool;
}

BootstrapEstimate bootstrap_best(const std::vector<double>& pool, int k, int B, std::uint64_t seed) {
  if (k < 1) throw ConfigError("bootstrap needs k >= 1");
  if (B < 1) throw ConfigError("bootstrap needs B >= 1");
  if (pool.empty()) throw ConfigError("bootstrap needs a non-empty pool");
  Rng rng(seed);
  std::vector<double> mins(static_cast<std::size_t>(B));
  for (auto& m : mins) {
    double best = std::numeric_limits<double>::infinity();
    for (int j = 0; j < k; ++j) best = std::min(best, pool[rng.below(pool.size())]);
    m = best;
  }
  // Accumulate deviations from the first minimum so a constant pool is exact.
  const double ref = mins.front();
  double dev = 0.0;
  for (double m : mins) dev += m - ref;
  const double mean = ref + dev / B;
  double ss = 0.0;
  for (double m : mins) ss += (m - mean) * (m - mean);
  const double sd = B > 1 ? std::sqrt(ss / (B - 1)) : 0.0;
  return {mean, sd / std::sqrt(static_cast<double>(B)), sd};
}

double relative_change(double e_random, double e_method) {
  if (!(e_random > 0.0)) throw ZeroBaseline();
  return 100.0 * (e_random - e_method) / e_random;
}

std::map<std::string, double> mean_rank(const std::map<std::string, std::vector<double>>& errors) {
  std::map<std::string, double> out;
  if (errors.empty()) return out;
  const auto n_tasks = errors.begin()->second.size();
  for (const auto& [m, col] : errors)
    if (col.size() != n_tasks)
      throw MissingEntry(fmt::format("method {} has {} tasks, expected {}", m, col.size(), n_tasks));
  std::vector<std::string> methods;
  for (const auto& [m, col] : errors) methods.push_back(m), out[m] = 0.0;
  for (std::size_t t = 0; t < n_tasks; ++t) {
    std::vector<std::size_t> order(methods.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](auto a, auto b) { return errors.at(methods[a])[t] < errors.at(methods[b])[t]; });
    for (std::size_t i = 0; i < order.size();) {
      std::size_t j = i;
      const double v = errors.at(methods[order[i]])[t];
      while (j + 1 < order.size() && errors.at(methods[order[j + 1]])[t] == v) ++j;
      const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
      for (std::size_t q = i; q <= j; ++q) out[methods[order[q]]] += rank;
      i = j + 1;
    }
  }
  if (n_tasks)
    for (auto& [m, r] : out) r /= static_cast<double>(n_tasks);
  return out;
}

std::shared_ptr<Proposer> make_proposer(const json& spec, std::uint64_t seed, const ProposerContext& ctx) {
  const auto kind = spec.value("kind", std::string{});
  if (kind == "random") return std::make_shared<RandomProposer>(seed);
  if (kind == "bo") {
    bo::AcquisitionConfig acq;
    acq.xi = spec.value("xi", acq.xi);
    acq.candidate_count = spec.value("candidates", acq.candidate_count);
    acq.initial_design = spec.value("initial_design", acq.initial_design);
    return std::make_shared<bo::BoProposer>(seed, acq, spec.value("id", std::string("bo_gp")));
  }
  if (kind == "replay") {
    if (!ctx.space) throw ConfigError("replay proposer needs a search space");
    std::vector<Config> script;
    for (const auto& t : read_trial_log(*ctx.space, resolve(ctx.base_dir, spec.at("trace").get<std::string>())))
      script.push_back(t.config);
    return std::make_shared<ReplayProposer>(std::move(script), spec.value("id", std::string("replay")));
  }
  if (kind == "hybrid") {
    return std::make_shared<HybridProposer>(make_proposer(spec.at("first"), seed, ctx),
                                            make_proposer(spec.at("second"), seed, ctx),
                                            spec.value("switch_step", 10));
  }
  if (kind == "llm") {
    LlmProposerOptions o;
    o.id = spec.value("id", std::string("llm"));
    o.temperature = spec.value("temperature", 0.0);
    const auto mode = spec.value("mode", std::string("chat"));
    if (mode != "chat" && mode != "compressed") throw ConfigError("unknown prompt mode " + mode);
    o.mode = mode == "chat" ? prompts::PromptMode::chat : prompts::PromptMode::compressed;
    const auto reasoning = spec.value("reasoning", std::string("plain"));
    if (reasoning != "plain" && reasoning != "cot") throw ConfigError("unknown reasoning " + reasoning);
    o.reasoning = reasoning == "cot" ? prompts::Reasoning::cot : prompts::Reasoning::plain;
    o.expert = spec.value("expert", false);
    o.toy_prompt = spec.value("toy_prompt", 2);
    o.max_retries = spec.value("max_retries", 3);
    o.fallback_random = spec.value("fallback", false);
    o.fallback_seed = seed;
    o.bounds = spec.value("clamp", false) ? BoundsPolicy::clamp : BoundsPolicy::reject;
    if (spec.contains("max_tokens")) o.max_tokens = spec["max_tokens"].get<int>();

    std::shared_ptr<llm::Client> client;
    if (spec.contains("script")) {
      const auto doc = json::parse(read_text_file(resolve(ctx.base_dir, spec["script"].get<std::string>())));
      std::vector<llm::ScriptedClient::Entry> entries;
      for (const auto& t : doc) entries.emplace_back(t.get<std::string>());
      client = std::make_shared<llm::ScriptedClient>(std::move(entries));
      o.model = spec.value("model", std::string("scripted"));
    } else {
      auto endpoint = llm::endpoint_from_env();
      o.model = spec.value("model", endpoint.model);
      if (o.model.empty()) throw ConfigError("MissingModel", "set LLM_MODEL or the proposer's \"model\"");
      endpoint.model = o.model;
      client = std::make_shared<llm::HttpClient>(endpoint);
    }
    if (ctx.ledger && !ctx.ledger->has_price(o.model)) ctx.ledger->set_price(o.model, {});
    return std::make_shared<LlmProposer>(client, prompts::PromptTemplateSet::load_default(), o, ctx.ledger);
  }
  throw ConfigError("UnknownProposer", "unknown proposer kind '" + kind + "'");
}

ExperimentSpec spec_from_json(const json& doc, const std::string& base_dir) {
  ExperimentSpec s;
  s.base_dir = base_dir;
  try {
    for (const auto& t : doc.at("tasks")) s.tasks.push_back({t.at("name").get<std::string>(), t.at("objective")});
    for (const auto& p : doc.at("proposers")) {
      const auto id = p.value("id", p.value("kind", std::string{}));
      s.proposers.push_back({id, p});
    }
    s.budget = doc.value("budget", s.budget);
    s.seeds = doc.at("seeds").get<std::vector<std::uint64_t>>();
    s.pool_size = doc.value("pool_size", s.pool_size);
    s.bootstrap_B = doc.value("bootstrap_B", s.bootstrap_B);
    s.pool_seed = doc.value("pool_seed", s.pool_seed);
    s.output_dir = resolve(base_dir, doc.value("output_dir", s.output_dir));
    s.jobs = doc.value("jobs", s.jobs);
  } catch (const json::exception& e) {
    throw ConfigError("InvalidSpec", e.what());
  }
  if (s.tasks.empty() || s.proposers.empty() || s.seeds.empty())
    throw ConfigError("InvalidSpec", "tasks, proposers and seeds must be non-empty");
  if (s.budget < 1) throw ConfigError("InvalidSpec", "budget must be positive");
  for (std::size_t i = 0; i < s.proposers.size(); ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (s.proposers[i].id == s.proposers[j].id)
        throw ConfigError("InvalidSpec", "duplicate proposer id " + s.proposers[i].id);
  return s;
}

ExperimentSpec load_spec(const std::string& path) {
  json doc;
  try {
    doc = json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw ConfigError("InvalidSpec", path + ": " + e.what());
  }
  return spec_from_json(doc, fs::path(path).parent_path().string());
}

std::optional<double> best_loss(const RunRecord& r) {
  if (r.trials.empty()) return std::nullopt;
  double best = r.trials.front().loss;
  for (const auto& t : r.trials) best = std::min(best, t.loss);
  return best;
}

MetricsReport compute_report(const std::vector<RunRecord>& records, const std::vector<RandomBaseline>& random,
                             const std::vector<std::string>& methods) {
  MetricsReport rep;
  rep.methods = methods;
  rep.random = random;
  for (const auto& b : random) rep.tasks.push_back(b.task);
  const double nan = std::numeric_limits<double>::quiet_NaN();

  for (const auto& m : methods) {
    auto& col = rep.errors[m];
    for (const auto& task : rep.tasks) {
      double sum = 0.0;
      int n = 0;
      for (const auto& r : records)
        if (r.task == task && r.proposer_id == m && r.error.empty())
          if (auto b = best_loss(r)) sum += *b, ++n;
      col.push_back(n ? sum / n : nan);
    }
  }

  std::map<std::string, std::vector<double>> rank_table;
  std::vector<double> random_col;
  for (const auto& b : random) random_col.push_back(b.estimate.mean);
  for (const auto& m : methods) {
    const auto& col = rep.errors[m];
    int wins = 0, n = 0;
    std::vector<double> changes;
    for (std::size_t t = 0; t < col.size(); ++t) {
      if (std::isnan(col[t])) continue;
      ++n;
      if (col[t] < random_col[t]) ++wins;
      if (random_col[t] > 0.0) changes.push_back(relative_change(random_col[t], col[t]));
    }
    rep.beats_random[m] = n ? static_cast<double>(wins) / n : nan;
    rep.median_change[m] = median(changes);
    rep.mean_change[m] =
        changes.empty() ? nan : std::accumulate(changes.begin(), changes.end(), 0.0) / static_cast<double>(changes.size());
    // Failed cells rank last.
    std::vector<double> ranked = col;
    for (auto& v : ranked)
      if (std::isnan(v)) v = std::numeric_limits<double>::infinity();
    rank_table[m] = ranked;
  }
  rank_table[kBaselineName] = random_col;
  rep.mean_rank = mean_rank(rank_table);
  return rep;
}

std::string report_csv(const MetricsReport& rep) {
  std::ostringstream os;
  os << "task";
  for (const auto& m : rep.methods) os << ',' << m;
  os << ",random_mean,random_std\n";
  for (std::size_t t = 0; t < rep.tasks.size(); ++t) {
    os << rep.tasks[t];
    for (const auto& m : rep.methods) os << ',' << fmt_num(rep.errors.at(m)[t]);
    os << ',' << fmt_num(rep.random[t].estimate.mean) << ',' << fmt_num(rep.random[t].estimate.stddev) << '\n';
  }
  return os.str();
}

std::string report_markdown(const MetricsReport& rep) {
  std::ostringstream os;
  os << "# Benchmark report\n\n";
  os << "| method | beats random | median change (%) | mean change (%) | mean rank |\n";
  os << "|---|---|---|---|---|\n";
  for (const auto& m : rep.methods)
    os << "| " << m << " | " << fmt_num(rep.beats_random.at(m)) << " | " << fmt_num(rep.median_change.at(m)) << " | "
       << fmt_num(rep.mean_change.at(m)) << " | " << fmt_num(rep.mean_rank.at(m)) << " |\n";
  os << "| " << kBaselineName << " | | | | " << fmt_num(rep.mean_rank.at(kBaselineName)) << " |\n\n";
  os << "## Best error per task\n\n| task |";
  for (const auto& m : rep.methods) os << ' ' << m << " |";
  os << " random (mean ± std) |\n|---|";
  for (std::size_t i = 0; i <= rep.methods.size(); ++i) os << "---|";
  os << '\n';
  for (std::size_t t = 0; t < rep.tasks.size(); ++t) {
    os << "| " << rep.tasks[t] << " |";
    for (const auto& m : rep.methods) os << ' ' << fmt_num(rep.errors.at(m)[t]) << " |";
    os << ' ' << fmt_num(rep.random[t].estimate.mean) << " ± " << fmt_num(rep.random[t].estimate.stddev) << " |\n";
  }
  return os.str();
}

json record_to_json(const SearchSpace& space, const RunRecord& r) {
  ordered_json out;
  out["task"] = r.task;
  out["proposer_id"] = r.proposer_id;
  out["seed"] = r.seed;
  ordered_json trials = ordered_json::array();
  for (const auto& t : r.trials) trials.push_back(ordered_json::parse(trial_to_jsonl(space, t)));
  out["trials"] = trials;
  const auto b = best_loss(r);
  out["best_loss"] = b ? json(*b) : json(nullptr);
  out["cost"] = r.cost;
  if (!r.error.empty()) out["error"] = r.error;
  return json(out);
}

json baseline_to_json(const RandomBaseline& b) {
  return json(ordered_json{{"task", b.task},
                           {"pool_size", b.pool_size},
                           {"mean", b.estimate.mean},
                           {"stderr", b.estimate.stderr_},
                           {"std", b.estimate.stddev},
                           {"pool_min", b.pool_min},
                           {"pool_max", b.pool_max}});
}

RandomBaseline baseline_from_json(const json& d) {
  RandomBaseline b;
  b.task = d.at("task").get<std::string>();
  b.pool_size = d.at("pool_size").get<int>();
  b.estimate = {d.at("mean").get<double>(), d.at("stderr").get<double>(), d.at("std").get<double>()};
  b.pool_min = d.at("pool_min").get<double>();
  b.pool_max = d.at("pool_max").get<double>();
  return b;
}

namespace {

std::string dump_line(const json& j) { return ordered_json(j).dump(); }

struct Cell {
  std::size_t task;
  std::size_t proposer;
  std::uint64_t seed;
};

RunRecord run_cell(const ExperimentSpec& spec, const Cell& cell) {
  const auto& task = spec.tasks[cell.task];
  const auto& prop = spec.proposers[cell.proposer];
  RunRecord rec;
  rec.task = task.name;
  rec.proposer_id = prop.id;
  rec.seed = cell.seed;
  auto ledger = std::make_shared<llm::CostLedger>();
  try {
    auto objective = make_objective(task.objective, spec.base_dir);
    auto proposer = make_proposer(prop.settings, cell.seed, {&objective->space(), spec.base_dir, ledger});
    auto history = run_tuning(*objective, *proposer, spec.budget, [&](const Trial& t) { rec.trials.push_back(t); });
    rec.trials = history.trials();
  } catch (const std::exception& e) {
    const auto* err = dynamic_cast<const Error*>(&e);
    rec.error = err ? err->name() + ": " + e.what() : e.what();
  }
  rec.cost = ledger->summary();
  return rec;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentSpec& spec) {
  ExperimentResult result;
  fs::create_directories(spec.output_dir);

  // Random baselines: one pool per task, built up front (also validates objectives).
  for (std::size_t t = 0; t < spec.tasks.size(); ++t) {
    auto objective = make_objective(spec.tasks[t].objective, spec.base_dir);
    const auto pool = build_random_pool(*objective, spec.pool_size, spec.pool_seed + t, spec.tasks[t].name);
    RandomBaseline b;
    b.task = spec.tasks[t].name;
    b.pool_size = spec.pool_size;
    b.estimate = bootstrap_best(pool.losses, spec.budget, spec.bootstrap_B, spec.pool_seed + t);
    b.pool_min = *std::min_element(pool.losses.begin(), pool.losses.end());
    b.pool_max = *std::max_element(pool.losses.begin(), pool.losses.end());
    result.random.push_back(b);
  }

  std::vector<Cell> cells;
  for (std::size_t t = 0; t < spec.tasks.size(); ++t)
    for (std::size_t p = 0; p < spec.proposers.size(); ++p)
      for (auto seed : spec.seeds) cells.push_back({t, p, seed});

  result.records.resize(cells.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next++) < cells.size();) result.records[i] = run_cell(spec, cells[i]);
  };
  const int jobs = std::max(1, std::min<int>(spec.jobs, static_cast<int>(cells.size())));
  std::vector<std::thread> threads;
  for (int j = 1; j < jobs; ++j) threads.emplace_back(worker);
  worker();
  for (auto& th : threads) th.join();

  std::string records, baselines;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    auto objective = make_objective(spec.tasks[cells[i].task].objective, spec.base_dir);
    records += dump_line(record_to_json(objective->space(), result.records[i])) + "\n";
  }
  for (const auto& b : result.random) baselines += dump_line(baseline_to_json(b)) + "\n";

  std::vector<std::string> methods;
  for (const auto& p : spec.proposers) methods.push_back(p.id);
  result.report = compute_report(result.records, result.random, methods);

  const fs::path out(spec.output_dir);
  write_file(out / "records.jsonl", records);
  write_file(out / "random_baseline.jsonl", baselines);
  write_file(out / "report.csv", report_csv(result.report));
  write_file(out / "report.md", report_markdown(result.report));
  return result;
}

MetricsReport report_from_files(const std::string& records_path, const std::string& baseline_path) {
  const auto bpath =
      baseline_path.empty() ? (fs::path(records_path).parent_path() / "random_baseline.jsonl").string() : baseline_path;
  auto lines = [](const std::string& path) {
    std::vector<json> out;
    std::istringstream in(read_text_file(path));
    for (std::string line; std::getline(in, line);) {
      if (line.empty()) continue;
      try {
        out.push_back(json::parse(line));
      } catch (const json::parse_error& e) {
        throw ConfigError("InvalidRecords", path + ": " + e.what());
      }
    }
    return out;
  };
  std::vector<RunRecord> records;
  std::vector<std::string> methods;
  for (const auto& j : lines(records_path)) {
    RunRecord r;
    r.task = j.at("task").get<std::string>();
    r.proposer_id = j.at("proposer_id").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& t : j.at("trials")) {
      Trial trial;
      trial.step = t.at("step").get<int>();
      trial.loss = t.at("loss").get<double>();
      r.trials.push_back(trial);
    }
    r.cost = j.value("cost", json::object());
    r.error = j.value("error", std::string{});
    if (std::find(methods.begin(), methods.end(), r.proposer_id) == methods.end()) methods.push_back(r.proposer_id);
    records.push_back(std::move(r));
  }
  std::vector<RandomBaseline> random;
  for (const auto& j : lines(bpath)) random.push_back(baseline_from_json(j));
  return compute_report(records, random, methods);
}

}  // namespace hpo::bench
