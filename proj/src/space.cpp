#include "hpo/space.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

namespace hpo {

namespace {

bool is_integral(double v) { return std::isfinite(v) && std::floor(v) == v; }

double round_half_up(double v) { return std::floor(v + 0.5); }

}  // namespace

SearchSpace::SearchSpace(std::string model_name, std::vector<ParamSpec> params,
                         std::string example_config_text, std::string vector_key)
    : model_name_(std::move(model_name)),
      params_(std::move(params)),
      example_config_text_(std::move(example_config_text)),
      vector_key_(std::move(vector_key)) {
  std::set<std::string> seen;
  for (const auto& p : params_) {
    if (p.name.empty()) throw ConfigError("parameter with empty name");
    if (!seen.insert(p.name).second) throw ConfigError(fmt::format("duplicate parameter '{}'", p.name));
    if (!(p.lower <= p.default_value && p.default_value <= p.upper)) {
      throw ConfigError(fmt::format("parameter '{}': default {} outside [{}, {}]", p.name,
                                    p.default_value, p.lower, p.upper));
    }
    if (p.log_scale && !(p.lower > 0)) {
      throw ConfigError(fmt::format("parameter '{}': log scale requires lower > 0", p.name));
    }
    if (p.kind == ParamKind::integer &&
        !(is_integral(p.lower) && is_integral(p.upper) && is_integral(p.default_value))) {
      throw ConfigError(fmt::format("parameter '{}': integer bounds and default must be integral", p.name));
    }
  }
}

const ParamSpec* SearchSpace::find(const std::string& name) const {
  auto it = std::find_if(params_.begin(), params_.end(), [&](const ParamSpec& p) { return p.name == name; });
  return it == params_.end() ? nullptr : &*it;
}

Config SearchSpace::defaults() const {
  Config c;
  for (const auto& p : params_) c.values[p.name] = p.default_value;
  return c;
}

std::string to_string(FieldError::Kind kind) {
  switch (kind) {
    case FieldError::Kind::missing: return "missing";
    case FieldError::Kind::extra: return "extra";
    case FieldError::Kind::out_of_range: return "out_of_range";
    case FieldError::Kind::non_integral: return "non_integral";
    case FieldError::Kind::not_a_number: return "not_a_number";
  }
  return "unknown";
}

namespace {

std::string join_errors(const std::vector<FieldError>& errors) {
  std::string out;
  for (const auto& e : errors) {
    if (!out.empty()) out += "; ";
    out += fmt::format("{}({})", to_string(e.kind), e.field);
    if (!e.detail.empty()) out += ": " + e.detail;
  }
  return out;
}

}  // namespace

ValidationError::ValidationError(std::vector<FieldError> errors)
    : Error("ValidationError", ErrorCategory::config, "invalid config: " + join_errors(errors)),
      errors_(std::move(errors)) {}

std::vector<FieldError> check(const SearchSpace& space, const std::map<std::string, double>& raw,
                              BoundsPolicy policy) {
  std::vector<FieldError> errors;
  for (const auto& p : space.params()) {
    auto it = raw.find(p.name);
    if (it == raw.end()) {
      errors.push_back({FieldError::Kind::missing, p.name, {}});
      continue;
    }
    const double v = it->second;
    if (!std::isfinite(v)) {
      errors.push_back({FieldError::Kind::not_a_number, p.name, "value is not finite"});
      continue;
    }
    if (policy == BoundsPolicy::clamp) continue;
    if (v < p.lower || v > p.upper) {
      errors.push_back({FieldError::Kind::out_of_range, p.name,
                        fmt::format("{} not in [{}, {}]", format_float(v), format_float(p.lower),
                                    format_float(p.upper))});
    }
    if (p.kind == ParamKind::integer && !is_integral(v)) {
      errors.push_back({FieldError::Kind::non_integral, p.name, format_float(v)});
    }
  }
  for (const auto& [name, value] : raw) {
    if (space.find(name) == nullptr) errors.push_back({FieldError::Kind::extra, name, {}});
  }
  return errors;
}

Config validate(const SearchSpace& space, const std::map<std::string, double>& raw, BoundsPolicy policy) {
  auto errors = check(space, raw, policy);
  if (!errors.empty()) throw ValidationError(std::move(errors));
  Config config;
  for (const auto& p : space.params()) {
    double v = raw.at(p.name);
    if (policy == BoundsPolicy::clamp) {
      if (p.kind == ParamKind::integer) v = round_half_up(v);
      v = std::clamp(v, p.lower, p.upper);
    }
    config.values[p.name] = v;
  }
  return config;
}

Config validate_json(const SearchSpace& space, const json& raw, BoundsPolicy policy) {
  if (!raw.is_object()) {
    throw ValidationError({{FieldError::Kind::not_a_number, "<root>", "config must be a JSON object"}});
  }
  std::map<std::string, double> values;
  std::vector<FieldError> type_errors;

  auto take = [&](const std::string& name, const json& v) {
    if (v.is_number()) {
      values[name] = v.get<double>();
    } else {
      type_errors.push_back({FieldError::Kind::not_a_number, name, v.dump()});
    }
  };

  if (!space.vector_key().empty()) {
    const auto& key = space.vector_key();
    for (auto it = raw.begin(); it != raw.end(); ++it) {
      if (it.key() != key) type_errors.push_back({FieldError::Kind::extra, it.key(), {}});
    }
    if (!raw.contains(key)) {
      type_errors.push_back({FieldError::Kind::missing, key, {}});
    } else if (const auto& arr = raw.at(key); !arr.is_array() || arr.size() != space.size()) {
      type_errors.push_back(
          {FieldError::Kind::not_a_number, key, fmt::format("expected an array of {} numbers", space.size())});
    } else {
      for (std::size_t i = 0; i < space.size(); ++i) take(space.params()[i].name, arr[i]);
    }
  } else {
    for (auto it = raw.begin(); it != raw.end(); ++it) {
      if (space.find(it.key()) == nullptr) {
        values[it.key()] = 0.0;  // reported as extra by check()
      } else {
        take(it.key(), it.value());
      }
    }
  }

  auto errors = check(space, values, policy);
  // A non-numeric value is also absent from `values`; drop the duplicate "missing".
  std::erase_if(errors, [&](const FieldError& e) {
    return e.kind == FieldError::Kind::missing &&
           std::any_of(type_errors.begin(), type_errors.end(),
                       [&](const FieldError& t) { return t.field == e.field; });
  });
  if (!space.vector_key().empty() && !type_errors.empty()) {
    std::erase_if(errors, [](const FieldError& e) { return e.kind == FieldError::Kind::missing; });
  }
  type_errors.insert(type_errors.end(), errors.begin(), errors.end());
  if (!type_errors.empty()) throw ValidationError(std::move(type_errors));
  return validate(space, values, policy);
}

double sample_param(const ParamSpec& p, double u) {
  double v;
  if (p.log_scale) {
    const double lo = std::log(p.lower);
    const double hi = std::log(p.upper);
    v = std::exp(lo + u * (hi - lo));
    // exp(log(x)) is not always x; pin the endpoints.
    if (u <= 0.0) v = p.lower;
    if (u >= 1.0) v = p.upper;
  } else {
    v = p.lower + u * (p.upper - p.lower);
  }
  if (p.kind == ParamKind::integer) v = round_half_up(v);
  return std::clamp(v, p.lower, p.upper);
}

double unit_coordinate(const ParamSpec& p, double value) {
  if (p.upper == p.lower) return 0.0;
  if (p.log_scale) return (std::log(value) - std::log(p.lower)) / (std::log(p.upper) - std::log(p.lower));
  return (value - p.lower) / (p.upper - p.lower);
}

Config sample(const SearchSpace& space, std::span<const double> unit) {
  if (unit.size() != space.size()) {
    throw ConfigError(fmt::format("sample: expected {} unit values, got {}", space.size(), unit.size()));
  }
  Config c;
  for (std::size_t i = 0; i < space.size(); ++i) {
    c.values[space.params()[i].name] = sample_param(space.params()[i], unit[i]);
  }
  return c;
}

std::string describe(const SearchSpace& space) {
  std::string out;
  for (std::size_t i = 0; i < space.size(); ++i) {
    if (i) out += "\n";
    out += space.params()[i].description;
  }
  return out;
}

namespace {

ordered_json value_json(const ParamSpec& p, double v) {
  if (p.kind == ParamKind::integer) return ordered_json(static_cast<std::int64_t>(v));
  return ordered_json(v);
}

}  // namespace

ordered_json config_to_json(const SearchSpace& space, const Config& config) {
  ordered_json out = ordered_json::object();
  if (!space.vector_key().empty()) {
    ordered_json arr = ordered_json::array();
    for (const auto& p : space.params()) arr.push_back(value_json(p, config.at(p.name)));
    out[space.vector_key()] = std::move(arr);
    return out;
  }
  for (const auto& p : space.params()) out[p.name] = value_json(p, config.at(p.name));
  return out;
}

std::string canonical_json(const SearchSpace& space, const Config& config) {
  return dump_compact(config_to_json(space, config));
}

SearchSpace space_from_json(const json& doc) {
  try {
    std::vector<ParamSpec> params;
    for (const auto& pj : doc.at("params")) {
      ParamSpec p;
      p.name = pj.at("name").get<std::string>();
      const auto kind = pj.at("kind").get<std::string>();
      if (kind == "float") {
        p.kind = ParamKind::real;
      } else if (kind == "integer") {
        p.kind = ParamKind::integer;
      } else {
        throw ConfigError(fmt::format("parameter '{}': unknown kind '{}'", p.name, kind));
      }
      p.lower = pj.at("lower").get<double>();
      p.upper = pj.at("upper").get<double>();
      p.log_scale = pj.value("log_scale", false);
      p.default_value = pj.at("default").get<double>();
      p.description = pj.value("description", std::string{});
      params.push_back(std::move(p));
    }
    return SearchSpace(doc.at("model_name").get<std::string>(), std::move(params),
                       doc.value("example_config_text", std::string{}), doc.value("vector_key", std::string{}));
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("malformed space definition: {}", e.what()));
  }
}

json space_to_json(const SearchSpace& space) {
  json params = json::array();
  for (const auto& p : space.params()) {
    params.push_back({{"name", p.name},
                      {"kind", p.kind == ParamKind::integer ? "integer" : "float"},
                      {"lower", p.lower},
                      {"upper", p.upper},
                      {"log_scale", p.log_scale},
                      {"default", p.default_value},
                      {"description", p.description}});
  }
  json doc = {{"model_name", space.model_name()},
              {"params", std::move(params)},
              {"example_config_text", space.example_config_text()}};
  if (!space.vector_key().empty()) doc["vector_key"] = space.vector_key();
  return doc;
}

SearchSpace load_space(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open space file '{}'", path));
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("space file '{}': {}", path, e.what()));
  }
  return space_from_json(doc);
}

}  // namespace hpo
