#pragma once

#include <stdexcept>
#include <string>

namespace hpo {

// Coarse error classes; the CLI maps them to exit codes 2/3/4.
enum class ErrorCategory { config, evaluation, llm };

class Error : public std::runtime_error {
 public:
  Error(std::string name, ErrorCategory category, const std::string& message)
      : std::runtime_error(message), name_(std::move(name)), category_(category) {}

  const std::string& name() const noexcept { return name_; }
  ErrorCategory category() const noexcept { return category_; }

 private:
  std::string name_;
  ErrorCategory category_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& message)
      : Error("ConfigError", ErrorCategory::config, message) {}
  ConfigError(std::string name, const std::string& message)
      : Error(std::move(name), ErrorCategory::config, message) {}
};

// A scripted proposer or LLM double ran out of entries.
class ScriptExhausted : public Error {
 public:
  explicit ScriptExhausted(const std::string& what) : Error("ScriptExhausted", ErrorCategory::config, what) {}
};

}  // namespace hpo
