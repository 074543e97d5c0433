#include "hpo/prompts.hpp"

#include <cmath>
#include <filesystem>

#include <fmt/format.h>

#include "hpo/assets.hpp"

namespace hpo::prompts {

PromptTemplateSet PromptTemplateSet::load(const std::string& prompt_dir) {
  auto read = [&](const char* name) {
    return read_text_file((std::filesystem::path(prompt_dir) / (std::string(name) + ".txt")).string());
  };
  PromptTemplateSet t;
  t.beginning = read("hpo_beginning");
  t.end = read("hpo_end");
  t.transition_plain = read("transition_plain");
  t.transition_cot = read("transition_cot");
  t.last_try = read("last_try");
  t.expert_system = read("expert_system");
  t.retry = read("retry");
  t.compressed_header = read("compressed_header");
  t.compressed_line = read("compressed_line");
  t.compressed_end = read("compressed_end");
  for (int i = 0; i < 4; ++i) t.toy_prompts[static_cast<std::size_t>(i)] = read(fmt::format("toy_prompt_{}", i).c_str());
  return t;
}

PromptTemplateSet PromptTemplateSet::load_default() {
  return load((std::filesystem::path(asset_dir()) / "prompts").string());
}

std::string fill(std::string_view text, const std::map<std::string, std::string>& slots) {
  std::string out;
  std::size_t i = 0;
  while (i < text.size()) {
    if (text[i] == '{') {
      const auto close = text.find('}', i);
      if (close != std::string_view::npos) {
        auto it = slots.find(std::string(text.substr(i + 1, close - i - 1)));
        if (it != slots.end()) {
          out += it->second;
          i = close + 1;
          continue;
        }
      }
    }
    out.push_back(text[i++]);
  }
  return out;
}

std::string range_repr(const ParamSpec& param) {
  auto num = [](double v) {
    return std::floor(v) == v && std::abs(v) < 1e15 ? fmt::format("{}", static_cast<long long>(v)) : format_float(v);
  };
  return fmt::format("[{}, {}]", num(param.lower), num(param.upper));
}

std::string build_initial_prompt(const PromptTemplateSet& t, const SearchSpace& space, int budget, int toy_prompt) {
  if (budget < 1) throw ConfigError("budget must be >= 1");
  if (!space.vector_key().empty()) {
    if (toy_prompt < 0 || toy_prompt > 3) throw ConfigError(fmt::format("toy prompt must be 0..3, got {}", toy_prompt));
    if (space.size() != 2) throw ConfigError("toy prompts need a two-parameter space");
    return fill(t.toy_prompts[static_cast<std::size_t>(toy_prompt)],
                {{"x1_range", range_repr(space.params()[0])},
                 {"x2_range", range_repr(space.params()[1])},
                 {"budget", std::to_string(budget)}});
  }
  return fill(t.beginning, {{"model", space.model_name()}}) + "\n" + describe(space) + "\n" +
         fill(t.end, {{"budget", std::to_string(budget)}, {"example_config", space.example_config_text()}});
}

std::string build_transition(const PromptTemplateSet& t, double loss, Reasoning reasoning, bool is_last) {
  if (!std::isfinite(loss)) throw ConfigError("transition needs a finite loss");
  const auto& body = reasoning == Reasoning::cot ? t.transition_cot : t.transition_plain;
  std::string text = fill(body, {{"loss", format_sci4(loss)}});
  return is_last ? t.last_try + text : text;
}

std::string build_compressed(const PromptTemplateSet& t, const SearchSpace& space, const History& history,
                             int budget, int toy_prompt) {
  std::string problem = build_initial_prompt(t, space, budget, toy_prompt);
  while (!problem.empty() && std::isspace(static_cast<unsigned char>(problem.back()))) problem.pop_back();
  if (problem.ends_with("Config:")) problem.erase(problem.size() - 7);
  while (!problem.empty() && std::isspace(static_cast<unsigned char>(problem.back()))) problem.pop_back();

  std::string out = problem;
  if (!history.empty()) {
    out += "\n" + t.compressed_header;
    for (const auto& trial : history.trials()) {
      out += "\n" + fill(t.compressed_line, {{"n", std::to_string(trial.step)},
                                             {"config", canonical_json(space, trial.config)},
                                             {"loss", format_sci4(trial.loss)}});
    }
  }
  out += "\n" + t.compressed_end;
  return out;
}

namespace {

// End (exclusive) of the balanced {...} starting at `open`, honoring JSON
// strings; npos when unbalanced.
std::size_t balanced_end(std::string_view s, std::size_t open) {
  int depth = 0;
  bool in_string = false;
  for (std::size_t i = open; i < s.size(); ++i) {
    const char c = s[i];
    if (in_string) {
      if (c == '\\') {
        ++i;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '{') {
      ++depth;
    } else if (c == '}') {
      if (--depth == 0) return i + 1;
    }
  }
  return std::string_view::npos;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

json parse_object(std::string_view candidate, const std::string& raw) {
  json j;
  try {
    j = json::parse(candidate);
  } catch (const json::exception& e) {
    throw ParseError("BadJson", raw, fmt::format("invalid JSON in response: {}", e.what()));
  }
  if (!j.is_object()) throw ParseError("BadJson", raw, "JSON in response is not an object");
  return j;
}

}  // namespace

ParsedProposal parse_response(std::string_view text) {
  ParsedProposal out;
  out.raw_response = std::string(text);

  // Split into lines, remembering each line's offset.
  std::vector<std::pair<std::size_t, std::string_view>> lines;
  for (std::size_t start = 0; start <= text.size();) {
    const auto nl = text.find('\n', start);
    const auto end = nl == std::string_view::npos ? text.size() : nl;
    lines.emplace_back(start, text.substr(start, end - start));
    if (nl == std::string_view::npos) break;
    start = nl + 1;
  }

  std::optional<std::size_t> config_offset;
  for (const auto& [offset, line] : lines) {
    const auto t = trim(line);
    if (const auto at = t.find("Analysis:"); at != std::string_view::npos) {
      auto a = t.substr(at + 9);
      if (auto cfg = a.find("Config:"); cfg != std::string_view::npos) a = a.substr(0, cfg);
      out.analysis = std::string(trim(a));
    }
    if (t.starts_with("Config:")) {
      config_offset = offset + static_cast<std::size_t>(t.data() - line.data()) + 7;
    }
  }

  if (config_offset) {
    const auto open = text.find('{', *config_offset);
    if (open != std::string_view::npos) {
      const auto end = balanced_end(text, open);
      if (end == std::string_view::npos) {
        // Truncated object: let the JSON parser describe what is missing.
        out.config_raw = parse_object(text.substr(open), out.raw_response);
        return out;
      }
      out.config_raw = parse_object(text.substr(open, end - open), out.raw_response);
      return out;
    }
  }

  // Last balanced top-level block.
  std::optional<std::pair<std::size_t, std::size_t>> last;
  std::optional<std::size_t> unbalanced;
  for (std::size_t i = 0; i < text.size();) {
    if (text[i] != '{') {
      ++i;
      continue;
    }
    const auto end = balanced_end(text, i);
    if (end == std::string_view::npos) {
      unbalanced = i;
      break;
    }
    last = {i, end};
    i = end;
  }
  if (last) {
    out.config_raw = parse_object(text.substr(last->first, last->second - last->first), out.raw_response);
    return out;
  }
  if (unbalanced) {
    out.config_raw = parse_object(text.substr(*unbalanced), out.raw_response);
    return out;
  }
  throw ParseError("NoJson", out.raw_response, "no JSON object found in response");
}

}  // namespace hpo::prompts
