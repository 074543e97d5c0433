#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hpo/error.hpp"
#include "hpo/json_format.hpp"

namespace hpo {

enum class ParamKind { real, integer };

struct ParamSpec {
  std::string name;
  ParamKind kind = ParamKind::real;
  double lower = 0.0;
  double upper = 1.0;
  bool log_scale = false;
  double default_value = 0.0;
  // Verbatim line used in prompts. Stored, never generated from the fields.
  std::string description;
};

// A hyperparameter assignment. Key order is irrelevant here; the owning
// SearchSpace defines the canonical order.
struct Config {
  std::map<std::string, double> values;

  double at(const std::string& name) const { return values.at(name); }
  bool operator==(const Config&) const = default;
};

// Immutable after construction.
class SearchSpace {
 public:
  SearchSpace() = default;
  // Throws ConfigError when a ParamSpec invariant is violated.
  SearchSpace(std::string model_name, std::vector<ParamSpec> params, std::string example_config_text,
              std::string vector_key = {});

  const std::string& model_name() const { return model_name_; }
  const std::vector<ParamSpec>& params() const { return params_; }
  const std::string& example_config_text() const { return example_config_text_; }
  std::size_t size() const { return params_.size(); }

  // Non-empty for spaces whose configs are exchanged as {"x": [x1, x2]}
  // (the 2-D landscapes) instead of one key per parameter.
  const std::string& vector_key() const { return vector_key_; }

  const ParamSpec* find(const std::string& name) const;
  Config defaults() const;

 private:
  std::string model_name_;
  std::vector<ParamSpec> params_;
  std::string example_config_text_;
  std::string vector_key_;
};

struct FieldError {
  enum class Kind { missing, extra, out_of_range, non_integral, not_a_number };
  Kind kind;
  std::string field;
  std::string detail;

  bool operator==(const FieldError&) const = default;
};

std::string to_string(FieldError::Kind kind);

class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<FieldError> errors);
  const std::vector<FieldError>& errors() const noexcept { return errors_; }

 private:
  std::vector<FieldError> errors_;
};

// How out-of-range proposals are treated. The default rejects them; clamp
// pulls values into [lower, upper] and rounds integer params half-up.
enum class BoundsPolicy { reject, clamp };

// Every violation in `raw`, in space order followed by extras. Empty means valid.
std::vector<FieldError> check(const SearchSpace& space, const std::map<std::string, double>& raw,
                              BoundsPolicy policy = BoundsPolicy::reject);

// Throws ValidationError carrying all violations.
Config validate(const SearchSpace& space, const std::map<std::string, double>& raw,
                BoundsPolicy policy = BoundsPolicy::reject);

// Accepts either the per-key object or, for vector spaces, {"<key>": [..]}.
// Non-numeric values are reported as not_a_number.
Config validate_json(const SearchSpace& space, const json& raw, BoundsPolicy policy = BoundsPolicy::reject);

// Inverse-CDF map of one unit value per parameter.
Config sample(const SearchSpace& space, std::span<const double> unit);

// Maps a single unit value through one parameter's distribution.
double sample_param(const ParamSpec& param, double u);

// Position of `value` in [0, 1] under the parameter's (log-)uniform prior;
// the continuous inverse of sample_param.
double unit_coordinate(const ParamSpec& param, double value);

std::string describe(const SearchSpace& space);

ordered_json config_to_json(const SearchSpace& space, const Config& config);
std::string canonical_json(const SearchSpace& space, const Config& config);

SearchSpace space_from_json(const json& doc);
json space_to_json(const SearchSpace& space);
SearchSpace load_space(const std::string& path);

}  // namespace hpo
