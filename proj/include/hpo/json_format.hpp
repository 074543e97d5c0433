#pragma once

#include <string>

#include <json.hpp>

namespace hpo {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

// Shortest round-trip rendering following Python's float repr: "1.0", "0.1",
// "1e-05", "1e+16". Non-finite values render as NaN/Infinity like json.dumps.
std::string format_float(double value);

// Single-line JSON with ", " and ": " separators (json.dumps defaults).
// Integral numbers stored as json integers print without a decimal point,
// floats through format_float. Object key order is preserved.
std::string dump_compact(const ordered_json& value);

// {:.4e} and {:.3f}, as in the prompt templates.
std::string format_sci4(double value);
std::string format_fixed3(double value);

}  // namespace hpo
