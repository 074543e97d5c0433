#include "hpo/objectives.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <limits>
#include <numbers>

#include <fmt/format.h>

#include "hpo/assets.hpp"
#include "hpo/rng.hpp"

namespace hpo {

namespace {

using std::numbers::pi;

const std::vector<std::string> kToyNames = {"ackley", "branin", "rosenbrock", "himmelblau", "quad2d",
                                            "quad2d_illcond"};

std::string range_text(const Interval& iv) {
  auto num = [](double v) {
    return std::floor(v) == v && std::abs(v) < 1e15 ? fmt::format("{}", static_cast<long long>(v))
                                                    : format_float(v);
  };
  return fmt::format("[{}, {}]", num(iv.lower), num(iv.upper));
}

void require_finite(double loss, const std::string& what) {
  if (!std::isfinite(loss)) throw EvaluationError("NonFiniteLoss", fmt::format("{} returned a non-finite loss", what));
}

}  // namespace

const std::vector<std::string>& toy_names() { return kToyNames; }

ToyFunction make_toy(std::string_view name) {
  if (name == "ackley") return {ToyKind::ackley, "ackley", {{{-5, 5}, {-5, 5}}}, 0.0, {0, 0}};
  if (name == "branin") {
    return {ToyKind::branin, "branin", {{{-5, 10}, {0, 15}}}, 5.0 / (4.0 * pi), {pi, 2.275}};
  }
  if (name == "rosenbrock") return {ToyKind::rosenbrock, "rosenbrock", {{{-5, 10}, {-5, 10}}}, 0.0, {1, 1}};
  if (name == "himmelblau") return {ToyKind::himmelblau, "himmelblau", {{{-5, 5}, {-5, 5}}}, 0.0, {3, 2}};
  if (name == "quad2d" || name == "quad2d_illcond") {
    ToyFunction f{name == "quad2d" ? ToyKind::quad2d : ToyKind::quad2d_illcond,
                  std::string(name),
                  {{{-5, 5}, {-5, 5}}},
                  0.0,
                  {3.7, 3.7}};
    f.condition = name == "quad2d" ? 1.0 : 10.0;
    return f;
  }
  throw ConfigError("UnknownObjective", fmt::format("unknown toy function '{}'", name));
}

double eval_toy(const ToyFunction& f, Point2 x) {
  const double x1 = x[0];
  const double x2 = x[1];
  switch (f.kind) {
    case ToyKind::ackley: {
      // 20(1 - e^{-0.2 r}) + (e - e^{mean cos}) is the usual closed form
      // regrouped so that both terms are >= 0 and vanish exactly at the origin.
      const double r = std::sqrt(0.5 * (x1 * x1 + x2 * x2));
      const double c = 0.5 * (std::cos(2.0 * pi * x1) + std::cos(2.0 * pi * x2));
      return 20.0 * (1.0 - std::exp(-0.2 * r)) + (std::numbers::e - std::exp(c));
    }
    case ToyKind::branin: {
      constexpr double a = 1.0;
      constexpr double b = 5.1 / (4.0 * pi * pi);
      constexpr double c = 5.0 / pi;
      constexpr double r = 6.0;
      constexpr double s = 10.0;
      constexpr double t = 1.0 / (8.0 * pi);
      const double inner = x2 - b * x1 * x1 + c * x1 - r;
      return a * inner * inner + s * (1.0 - t) * std::cos(x1) + s;
    }
    case ToyKind::rosenbrock: {
      const double d = x2 - x1 * x1;
      return (1.0 - x1) * (1.0 - x1) + 100.0 * d * d;
    }
    case ToyKind::himmelblau: {
      const double a = x1 * x1 + x2 - 11.0;
      const double b = x1 + x2 * x2 - 7.0;
      return a * a + b * b;
    }
    case ToyKind::quad2d:
    case ToyKind::quad2d_illcond: {
      const double d1 = x1 - f.center[0];
      const double d2 = x2 - f.center[1];
      return d1 * d1 + f.condition * d2 * d2;
    }
  }
  return std::numeric_limits<double>::quiet_NaN();
}

ShiftedObjective make_shifted(const ToyFunction& f, std::uint64_t seed) {
  Rng rng(seed);
  const double c1 = rng.uniform();
  const double c2 = rng.uniform();
  return {f, {c1, c2}, seed};
}

SearchSpace toy_space(const ToyFunction& f) {
  std::vector<ParamSpec> params;
  for (int i = 0; i < 2; ++i) {
    ParamSpec p;
    p.name = fmt::format("x{}", i + 1);
    p.kind = ParamKind::real;
    p.lower = f.domain[i].lower;
    p.upper = f.domain[i].upper;
    p.default_value = 0.5 * (p.lower + p.upper);
    p.description = fmt::format("{}, Type: UniformFloat, Range: {}", p.name, range_text(f.domain[i]));
    params.push_back(std::move(p));
  }
  return SearchSpace(f.name, std::move(params), R"({"x": [x1, x2]})", "x");
}

ToyObjective::ToyObjective(ToyFunction f) : f_(std::move(f)), space_(toy_space(f_)) {}

ToyObjective::ToyObjective(ToyFunction f, std::uint64_t shift_seed)
    : f_(std::move(f)), shifted_(make_shifted(f_, shift_seed)), space_(toy_space(f_)) {}

std::string ToyObjective::name() const { return shifted_ ? "shifted_" + f_.name : f_.name; }

double ToyObjective::eval(Point2 x) const { return shifted_ ? shifted_->eval(x) : eval_toy(f_, x); }

EvalResult ToyObjective::evaluate(const Config& config) {
  EvalResult r;
  r.loss = eval({config.at("x1"), config.at("x2")});
  require_finite(r.loss, name());
  return r;
}

json ToyObjective::info() const {
  json j = {{"kind", "toy"}, {"function", f_.name}, {"name", name()}};
  if (shifted_) {
    j["shift"] = {shifted_->shift[0], shifted_->shift[1]};
    j["shift_seed"] = shifted_->seed;
  }
  if (f_.kind == ToyKind::quad2d || f_.kind == ToyKind::quad2d_illcond) {
    j["center"] = {f_.center[0], f_.center[1]};
    j["condition"] = f_.condition;
  }
  return j;
}

// Tabular ------------------------------------------------------------------

TabularTask tabular_from_json(const json& doc, const std::string& base_dir) {
  TabularTask task;
  try {
    const auto& sj = doc.at("space");
    if (sj.is_object()) {
      task.space = space_from_json(sj);
    } else {
      std::string ref = sj.get<std::string>();
      if (!base_dir.empty() && ref.find('/') != std::string::npos && !std::filesystem::path(ref).is_absolute()) {
        ref = (std::filesystem::path(base_dir) / ref).string();
      }
      task.space = load_builtin_or_file_space(ref);
    }
    task.metric_name = doc.value("metric_name", std::string("loss"));
    for (const auto& row : doc.at("rows")) {
      Config c = validate_json(task.space, row.at("config"));
      const double loss = row.at("loss").get<double>();
      if (!std::isfinite(loss)) throw ConfigError("tabular row with non-finite loss");
      auto key = canonical_json(task.space, c);
      if (!task.rows.emplace(key, loss).second) throw ConfigError("duplicate tabular row " + key);
      task.configs.push_back(std::move(c));
    }
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("malformed tabular task: {}", e.what()));
  }
  if (task.rows.empty()) throw ConfigError("tabular task has no rows");
  return task;
}

TabularTask load_tabular(const std::string& path) {
  json doc;
  try {
    doc = json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("tabular file '{}': {}", path, e.what()));
  }
  return tabular_from_json(doc, std::filesystem::path(path).parent_path().string());
}

double lookup(const TabularTask& task, const Config& config) {
  auto key = canonical_json(task.space, config);
  auto it = task.rows.find(key);
  if (it == task.rows.end()) throw MissingRow(std::move(key));
  return it->second;
}

const Config& nearest_row(const TabularTask& task, const Config& config) {
  const Config* best = nullptr;
  double best_d = std::numeric_limits<double>::infinity();
  for (const auto& row : task.configs) {
    double d = 0.0;
    for (const auto& p : task.space.params()) {
      const double diff = unit_coordinate(p, row.at(p.name)) - unit_coordinate(p, config.at(p.name));
      d += diff * diff;
    }
    if (d < best_d) {
      best_d = d;
      best = &row;
    }
  }
  return *best;
}

TabularObjective::TabularObjective(TabularTask task, std::string name, bool snap_to_grid)
    : task_(std::move(task)), name_(std::move(name)), snap_(snap_to_grid) {}

EvalResult TabularObjective::evaluate(const Config& config) {
  EvalResult r;
  if (snap_) {
    const Config& snapped = nearest_row(task_, config);
    r.loss = lookup(task_, snapped);
    if (!(snapped == config)) r.evaluated_config = snapped;
  } else {
    r.loss = lookup(task_, config);
  }
  return r;
}

json TabularObjective::info() const {
  return {{"kind", "tabular"}, {"name", name_}, {"metric_name", task_.metric_name},
          {"rows", task_.rows.size()}, {"snap_to_grid", snap_}};
}

// External -----------------------------------------------------------------

ExternalObjective::ExternalObjective(SearchSpace space, std::vector<std::string> command, double timeout_s,
                                     std::string workdir, std::string task)
    : space_(std::move(space)),
      channel_(std::move(command), timeout_s, workdir),
      workdir_(std::move(workdir)),
      task_(std::move(task)) {}

std::string ExternalObjective::name() const {
  return task_.empty() ? fmt::format("external:{}", channel_.argv().front()) : "external:" + task_;
}

EvalResult ExternalObjective::evaluate(const Config& config) {
  ordered_json request = ordered_json::object();
  if (task_.empty()) {
    request["type"] = "run";
  } else {
    request["type"] = "eval";
    request["task"] = task_;
  }
  request["config"] = config_to_json(space_, config);

  const auto start = std::chrono::steady_clock::now();
  const json response = channel_.request(json::parse(dump_compact(request)));
  EvalResult r;
  r.duration_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  const auto type = response.at("type").get<std::string>();
  if (type == "error") {
    throw TrainerError(response.value("stage", std::string("unknown")), response.value("message", std::string{}));
  }
  if (type != "result") throw ProtocolError(response.dump(), "unexpected response type");
  const json* loss = nullptr;
  if (response.contains("loss")) {
    loss = &response["loss"];
  } else if (response.contains("val_loss")) {
    loss = &response["val_loss"];
  }
  if (loss == nullptr || !loss->is_number()) throw ProtocolError(response.dump(), "result without numeric loss");
  r.loss = loss->get<double>();
  require_finite(r.loss, name());
  if (response.contains("train_losses")) {
    for (const auto& v : response["train_losses"]) {
      if (!v.is_number()) throw ProtocolError(response.dump(), "non-numeric train loss");
      r.train_losses.push_back(v.get<double>());
    }
  }
  return r;
}

json ExternalObjective::info() const {
  return {{"kind", "external"}, {"command", channel_.argv()}, {"timeout_s", channel_.timeout()},
          {"task", task_}, {"workdir", workdir_}};
}

EvalResult run_external(ExternalObjective& objective, const Config& config) { return objective.evaluate(config); }

std::unique_ptr<Objective> make_objective(const json& spec, const std::string& base_dir) {
  try {
    if (spec.contains("toy")) {
      std::string fname = spec.at("toy").get<std::string>();
      bool shifted = spec.contains("shift_seed");
      if (fname.rfind("shifted_", 0) == 0) {
        fname = fname.substr(8);
        shifted = true;
      }
      auto f = make_toy(fname);
      if (shifted) return std::make_unique<ToyObjective>(f, spec.value("shift_seed", std::uint64_t{0}));
      return std::make_unique<ToyObjective>(f);
    }
    if (spec.contains("tabular")) {
      std::string path = spec.at("tabular").get<std::string>();
      if (!base_dir.empty() && !std::filesystem::path(path).is_absolute()) {
        path = (std::filesystem::path(base_dir) / path).string();
      }
      const auto name = spec.value("name", std::filesystem::path(path).stem().string());
      return std::make_unique<TabularObjective>(load_tabular(path), name, spec.value("snap", true));
    }
    if (spec.contains("external")) {
      auto command = spec.at("external").get<std::vector<std::string>>();
      auto space = load_builtin_or_file_space(spec.at("space").get<std::string>());
      return std::make_unique<ExternalObjective>(std::move(space), std::move(command),
                                                 spec.value("timeout", 600.0), spec.value("workdir", std::string{}),
                                                 spec.value("task", std::string{}));
    }
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("malformed objective spec {}: {}", spec.dump(), e.what()));
  }
  throw ConfigError(fmt::format("objective spec needs one of toy/tabular/external: {}", spec.dump()));
}

}  // namespace hpo
