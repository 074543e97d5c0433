#pragma once

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hpo/llm_client.hpp"
#include "hpo/trainer_client.hpp"

namespace hpo::codegen {

inline constexpr const char* kFunctionName = "make_model_and_optimizer";

struct DatasetDescriptor {
  std::string problem_description;
  int in_features = 0;
  std::vector<std::string> X_columns;
  std::vector<std::string> y_columns;
  std::string data_path;
};

// Throws ConfigError when in_features != len(X_columns) or y_columns is empty.
void check(const DatasetDescriptor& dataset);
DatasetDescriptor dataset_from_json(const json& doc);
DatasetDescriptor load_dataset(const std::string& path);

struct CodegenTemplates {
  std::string initial;
  std::string tuning;
  std::string feedback;
  std::string regenerate;
  std::string run_error;
  std::string call_fallback;
  std::string bad_call;

  static CodegenTemplates load(const std::string& prompt_dir);
  static CodegenTemplates load_default();
};

struct GeneratedProgram {
  std::string reasoning;
  std::string code;
  std::string function_name = kFunctionName;
  std::vector<ArgSpec> arg_specs;
};

class CodegenError : public Error {
 public:
  CodegenError(std::string name, const std::string& what) : Error(std::move(name), ErrorCategory::llm, what) {}
};

std::string build_codegen_initial_prompt(const CodegenTemplates& t, const DatasetDescriptor& dataset);

// reasoning = text after "reasoning:" up to "code:"; code = first fenced block.
// Throws CodegenError NoCodeBlock / WrongFunctionName.
GeneratedProgram extract_program(std::string_view response);

// Defines the program on the runner and records the introspected arguments.
// Throws DefineError; non-primitive argument types are rejected here too.
std::vector<ArgSpec> validate_program(GeneratedProgram& program, TrainerClient& runner);

std::string build_tuning_prompt(const CodegenTemplates& t, int budget);
std::string build_feedback(const CodegenTemplates& t, const TrainFeedback& feedback);

// OpenAI "tools" entry for the program's function, built from its arg_specs.
json tool_schema(const std::vector<ArgSpec>& specs);

// Problems with a proposed call; empty when it can be dispatched.
std::vector<std::string> check_call(const json& arguments, const std::vector<ArgSpec>& specs);

struct ToolCall {
  std::string name;
  json arguments;
};

// From a native tool call, or from a {"name":..., "arguments":{...}} object in the text.
std::optional<ToolCall> read_call(const llm::CompletionResponse& response);

struct CodegenTrial {
  int index = 0;
  json arguments;
  std::optional<TrainFeedback> feedback;
  std::string error;  // runtime/timeout/invalid-call message, if any
  bool anomalous = false;  // empty train_losses
};

struct CodegenOptions {
  int budget = 5;
  int max_regen = 3;
  int epochs = 10;
  std::uint64_t seed = 0;
  std::string model;
  double temperature = 0.0;
  std::function<void(const std::string& kind, const json& payload)> log;
};

struct CodegenResult {
  GeneratedProgram program;
  std::vector<CodegenTrial> trials;
  std::optional<std::size_t> best;  // index into trials
  std::vector<llm::Message> transcript;
  int regenerations = 0;
  int completions = 0;
};

class SessionFailed : public Error {
 public:
  explicit SessionFailed(const std::string& what) : Error("SessionFailed", ErrorCategory::llm, what) {}
};

CodegenResult run_codegen_session(llm::Client& client, TrainerClient& runner, const DatasetDescriptor& dataset,
                                  const CodegenTemplates& templates, const CodegenOptions& options);

}  // namespace hpo::codegen
