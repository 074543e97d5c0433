#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "hpo/proposers.hpp"
#include "hpo/space.hpp"

namespace hpo::prompts {

enum class Reasoning { plain, cot };
enum class PromptMode { chat, compressed };

// Verbatim template texts, loaded from <assets>/prompts/<name>.txt.
struct PromptTemplateSet {
  std::string beginning;
  std::string end;
  std::string transition_plain;
  std::string transition_cot;
  std::string last_try;
  std::string expert_system;
  std::string retry;
  std::string compressed_header;
  std::string compressed_line;
  std::string compressed_end;
  std::array<std::string, 4> toy_prompts;

  static PromptTemplateSet load(const std::string& prompt_dir);
  static PromptTemplateSet load_default();
};

// Replaces each "{key}" in `text` for the given keys; other braces are left
// alone so literal JSON in templates survives.
std::string fill(std::string_view text, const std::map<std::string, std::string>& slots);

// Python list repr of a toy domain, e.g. "[-5, 10]".
std::string range_repr(const ParamSpec& param);

// HPO spaces: beginning + "\n" + describe(space) + "\n" + end.
// Vector (toy) spaces: the selected 2-D prompt (0..3).
std::string build_initial_prompt(const PromptTemplateSet& t, const SearchSpace& space, int budget, int toy_prompt = 2);

// "loss = 1.2340e-01. ..." with "This is the last try. " prepended when is_last.
std::string build_transition(const PromptTemplateSet& t, double loss, Reasoning reasoning, bool is_last);

// Problem description, one "Config N: {json} -> loss = {:.4e}" line per trial,
// then the closing request.
std::string build_compressed(const PromptTemplateSet& t, const SearchSpace& space, const History& history,
                             int budget, int toy_prompt = 2);

struct ParsedProposal {
  std::optional<std::string> analysis;
  json config_raw;
  std::string raw_response;
};

class ParseError : public Error {
 public:
  ParseError(std::string name, std::string raw, const std::string& what)
      : Error(std::move(name), ErrorCategory::llm, what), raw_(std::move(raw)) {}
  const std::string& raw() const noexcept { return raw_; }

 private:
  std::string raw_;
};

// 1. the last line starting with "Config:" (first {...} after it);
// 2. otherwise the last balanced {...} block anywhere.
// Throws ParseError "NoJson" or "BadJson".
ParsedProposal parse_response(std::string_view text);

}  // namespace hpo::prompts
