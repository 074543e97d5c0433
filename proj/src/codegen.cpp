#include "hpo/codegen.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <regex>
#include <set>

#include "hpo/assets.hpp"
#include "hpo/prompts.hpp"

namespace hpo::codegen {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

// Python repr of a list of str.
std::string py_list(const std::vector<std::string>& items) {
  std::string out = "[";
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ", ";
    out += '\'';
    for (char c : items[i]) {
      if (c == '\\' || c == '\'') out += '\\';
      out += c;
    }
    out += '\'';
  }
  return out + "]";
}

bool type_matches(const json& value, const std::string& type) {
  if (type == "int") return value.is_number_integer() || (value.is_number_float() && std::floor(value.get<double>()) == value.get<double>());
  if (type == "float") return value.is_number();
  if (type == "bool") return value.is_boolean();
  if (type == "str") return value.is_string();
  return false;
}

const std::set<std::string>& primitive_types() {
  static const std::set<std::string> types{"int", "float", "bool", "str"};
  return types;
}

std::string json_type_name(const std::string& type) {
  if (type == "int") return "integer";
  if (type == "float") return "number";
  if (type == "bool") return "boolean";
  return "string";
}

}  // namespace

void check(const DatasetDescriptor& d) {
  if (d.in_features != static_cast<int>(d.X_columns.size()))
    throw ConfigError("InvalidDataset", fmt::format("in_features is {} but {} X_columns are listed", d.in_features,
                                                    d.X_columns.size()));
  if (d.y_columns.empty()) throw ConfigError("InvalidDataset", "y_columns must not be empty");
}

DatasetDescriptor dataset_from_json(const json& doc) {
  DatasetDescriptor d;
  try {
    d.problem_description = doc.at("problem_description").get<std::string>();
    d.X_columns = doc.at("X_columns").get<std::vector<std::string>>();
    d.in_features = doc.value("in_features", static_cast<int>(d.X_columns.size()));
    d.y_columns = doc.at("y_columns").get<std::vector<std::string>>();
    d.data_path = doc.value("data_path", std::string{});
  } catch (const json::exception& e) {
    throw ConfigError("InvalidDataset", e.what());
  }
  check(d);
  return d;
}

DatasetDescriptor load_dataset(const std::string& path) {
  json doc;
  try {
    doc = json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw ConfigError("InvalidDataset", path + ": " + e.what());
  }
  return dataset_from_json(doc);
}

CodegenTemplates CodegenTemplates::load(const std::string& dir) {
  auto read = [&](const char* name) { return read_text_file(dir + "/" + name + ".txt"); };
  CodegenTemplates t;
  t.initial = read("codegen_initial");
  t.tuning = read("codegen_tuning");
  t.feedback = read("codegen_feedback");
  t.regenerate = read("codegen_regenerate");
  t.run_error = read("codegen_run_error");
  t.call_fallback = read("codegen_call_fallback");
  t.bad_call = read("codegen_bad_call");
  return t;
}

CodegenTemplates CodegenTemplates::load_default() { return load(asset_dir() + "/prompts"); }

std::string build_codegen_initial_prompt(const CodegenTemplates& t, const DatasetDescriptor& d) {
  check(d);
  return prompts::fill(t.initial, {{"problem_description", d.problem_description},
                                   {"in_features", std::to_string(d.in_features)},
                                   {"X_columns", py_list(d.X_columns)},
                                   {"y_column", d.y_columns.front()}});
}

GeneratedProgram extract_program(std::string_view response) {
  GeneratedProgram p;
  const auto open = response.find("```");
  if (open == std::string_view::npos) throw CodegenError("NoCodeBlock", "no fenced code block found in the response");
  auto body = response.find('\n', open);
  if (body == std::string_view::npos) throw CodegenError("NoCodeBlock", "fenced code block is empty");
  ++body;
  const auto close = response.find("```", body);
  if (close == std::string_view::npos) throw CodegenError("NoCodeBlock", "fenced code block is not closed");
  p.code = std::string(response.substr(body, close - body));
  if (trim(p.code).empty()) throw CodegenError("NoCodeBlock", "fenced code block is empty");

  static const std::regex def_re(R"(def\s+make_model_and_optimizer\s*\()");
  if (!std::regex_search(p.code, def_re))
    throw CodegenError("WrongFunctionName", "the code does not define a function called `make_model_and_optimizer`");

  const std::string head = lower(response.substr(0, open));
  const auto r = head.find("reasoning:");
  if (r != std::string::npos) {
    auto start = r + 10;
    auto end = head.find("code:", start);
    if (end == std::string::npos) end = head.size();
    p.reasoning = trim(response.substr(start, end - start));
  }
  return p;
}

std::vector<ArgSpec> validate_program(GeneratedProgram& program, TrainerClient& runner) {
  auto specs = runner.define(program.code);
  std::set<std::string> seen;
  for (const auto& s : specs) {
    if (!primitive_types().count(s.type))
      throw DefineError("signature", fmt::format("non-primitive argument: {} has type {}", s.name, s.type));
    if (!seen.insert(s.name).second) throw DefineError("signature", "duplicate argument: " + s.name);
  }
  program.arg_specs = specs;
  return specs;
}

std::string build_tuning_prompt(const CodegenTemplates& t, int budget) {
  return prompts::fill(t.tuning, {{"search_budget", std::to_string(budget)}});
}

std::string build_feedback(const CodegenTemplates& t, const TrainFeedback& fb) {
  std::string losses;
  for (std::size_t i = 0; i < fb.train_losses.size(); ++i) {
    if (i) losses += ", ";
    losses += format_fixed3(fb.train_losses[i]);
  }
  return prompts::fill(t.feedback, {{"train_losses", losses}, {"val_loss", format_fixed3(fb.val_loss)}});
}

json tool_schema(const std::vector<ArgSpec>& specs) {
  ordered_json props = ordered_json::object();
  json required = json::array();
  for (const auto& s : specs) {
    ordered_json p{{"type", json_type_name(s.type)}};
    if (s.default_value) p["default"] = *s.default_value;
    else required.push_back(s.name);
    props[s.name] = p;
  }
  ordered_json params{{"type", "object"}, {"properties", props}, {"required", required}};
  ordered_json fn{{"name", kFunctionName},
                  {"description", "Build the model and optimizer with the given hyperparameters."},
                  {"parameters", params}};
  return json(ordered_json{{"type", "function"}, {"function", fn}});
}

std::vector<std::string> check_call(const json& arguments, const std::vector<ArgSpec>& specs) {
  std::vector<std::string> problems;
  if (!arguments.is_object()) {
    problems.push_back("arguments must be a JSON object");
    return problems;
  }
  for (const auto& [key, value] : arguments.items()) {
    const auto it = std::find_if(specs.begin(), specs.end(), [&](const ArgSpec& s) { return s.name == key; });
    if (it == specs.end()) {
      problems.push_back("unknown argument " + key);
    } else if (!type_matches(value, it->type)) {
      problems.push_back(fmt::format("argument {} must be of type {}", key, it->type));
    }
  }
  for (const auto& s : specs)
    if (!s.default_value && !arguments.contains(s.name)) problems.push_back("missing argument " + s.name);
  return problems;
}

std::optional<ToolCall> read_call(const llm::CompletionResponse& response) {
  if (response.tool_call) {
    ToolCall call{response.tool_call->name, json()};
    try {
      call.arguments = json::parse(response.tool_call->arguments);
    } catch (const json::parse_error&) {
      call.arguments = json();  // rejected by check_call
    }
    return call;
  }
  const auto parsed = [&]() -> std::optional<json> {
    try {
      return prompts::parse_response(response.text).config_raw;
    } catch (const prompts::ParseError&) {
      return std::nullopt;
    }
  }();
  if (!parsed || !parsed->is_object()) return std::nullopt;
  if (parsed->contains("name") && parsed->contains("arguments") && (*parsed)["name"].is_string()) {
    ToolCall call{(*parsed)["name"].get<std::string>(), (*parsed)["arguments"]};
    if (call.arguments.is_string()) {
      try {
        call.arguments = json::parse(call.arguments.get<std::string>());
      } catch (const json::parse_error&) {
      }
    }
    return call;
  }
  return std::nullopt;
}

namespace {

class Session {
 public:
  Session(llm::Client& client, TrainerClient& runner, const CodegenTemplates& t, const CodegenOptions& o)
      : client_(client), runner_(runner), t_(t), o_(o) {}

  CodegenResult run(const DatasetDescriptor& dataset) {
    generate(build_codegen_initial_prompt(t_, dataset));
    tune();
    return std::move(result_);
  }

 private:
  void log(const std::string& kind, const json& payload) {
    if (o_.log) o_.log(kind, payload);
  }

  llm::CompletionResponse ask(const std::string& user, const std::optional<json>& tools = std::nullopt) {
    result_.transcript.push_back({llm::Role::user, user});
    llm::CompletionRequest req;
    req.model = o_.model;
    req.temperature = o_.temperature;
    req.messages = result_.transcript;
    if (tools) {
      req.tools = json::array({*tools});
      req.tool_choice = json{{"type", "function"}, {"function", {{"name", kFunctionName}}}};
    }
    auto response = client_.complete(req);
    ++result_.completions;
    const std::string content =
        response.tool_call
            ? json(ordered_json{{"name", response.tool_call->name}, {"arguments", response.tool_call->arguments}}).dump()
            : response.text;
    result_.transcript.push_back({llm::Role::assistant, content});
    return response;
  }

  void generate(const std::string& initial) {
    std::string prompt = initial;
    for (int attempt = 0;; ++attempt) {
      const auto response = ask(prompt);
      std::string error;
      try {
        auto program = extract_program(response.text);
        log("program", {{"attempt", attempt}, {"reasoning", program.reasoning}, {"code", program.code}});
        validate_program(program, runner_);
        json specs = json::array();
        for (const auto& s : program.arg_specs) {
          json j{{"name", s.name}, {"type", s.type}};
          if (s.default_value) j["default"] = *s.default_value;
          specs.push_back(j);
        }
        log("defined", {{"arg_specs", specs}});
        result_.program = std::move(program);
        return;
      } catch (const CodegenError& e) {
        error = e.what();
      } catch (const DefineError& e) {
        error = e.what();
      } catch (const TimeoutError& e) {
        error = e.what();
      } catch (const ProcessError& e) {
        error = std::string(e.what()) + (e.stderr_text().empty() ? "" : "\n" + e.stderr_text());
      }
      log("define_error", {{"attempt", attempt}, {"error", error}});
      if (attempt >= o_.max_regen)
        throw SessionFailed(fmt::format("program did not validate after {} regenerations: {}", o_.max_regen, error));
      ++result_.regenerations;
      prompt = prompts::fill(t_.regenerate, {{"error", error}});
    }
  }

  // Asks for a call; one corrective re-ask when the call is unusable.
  std::pair<std::optional<ToolCall>, std::string> request_call(std::string prompt) {
    const bool tools = client_.supports_tools();
    const auto schema = tool_schema(result_.program.arg_specs);
    if (!tools) prompt += "\n" + t_.call_fallback;
    std::string problem;
    for (int round = 0; round < 2; ++round) {
      const auto response = ask(prompt, tools ? std::optional<json>(schema) : std::nullopt);
      auto call = read_call(response);
      if (!call) {
        problem = "no function call found in the response";
      } else if (call->name != kFunctionName) {
        problem = fmt::format("unknown function {}", call->name);
      } else {
        const auto problems = check_call(call->arguments, result_.program.arg_specs);
        if (problems.empty()) return {call, {}};
        problem.clear();
        for (const auto& p : problems) problem += (problem.empty() ? "" : "; ") + p;
      }
      log("bad_call", {{"round", round}, {"error", problem}});
      prompt = prompts::fill(t_.bad_call, {{"error", problem}});
      if (!tools) prompt += "\n" + t_.call_fallback;
    }
    return {std::nullopt, problem};
  }

  void tune() {
    std::string prompt = build_tuning_prompt(t_, o_.budget);
    for (int i = 0; i < o_.budget; ++i) {
      CodegenTrial trial;
      trial.index = i;
      auto [call, problem] = request_call(prompt);
      if (!call) {
        trial.error = problem;
        prompt = prompts::fill(t_.bad_call, {{"error", problem}});
      } else {
        trial.arguments = call->arguments;
        try {
          trial.feedback = runner_.run(call->arguments, o_.epochs, o_.seed);
          trial.anomalous = trial.feedback->train_losses.empty();
          prompt = build_feedback(t_, *trial.feedback);
        } catch (const TrainerError& e) {
          trial.error = e.what();
        } catch (const TimeoutError& e) {
          trial.error = e.what();
        } catch (const ProcessError& e) {
          trial.error = std::string(e.what()) + (e.stderr_text().empty() ? "" : "\n" + e.stderr_text());
        } catch (const ProtocolError& e) {
          trial.error = e.what();
        }
        if (!trial.error.empty()) prompt = prompts::fill(t_.run_error, {{"error", trial.error}});
      }
      json entry{{"trial", i}, {"arguments", trial.arguments}, {"epochs", o_.epochs}, {"seed", o_.seed}};
      if (trial.feedback) {
        entry["train_losses"] = trial.feedback->train_losses;
        entry["val_loss"] = trial.feedback->val_loss;
        if (trial.anomalous) entry["anomalous"] = true;
      }
      if (!trial.error.empty()) entry["error"] = trial.error;
      log("trial", entry);
      if (trial.feedback &&
          (!result_.best || trial.feedback->val_loss < result_.trials[*result_.best].feedback->val_loss))
        result_.best = result_.trials.size();
      result_.trials.push_back(std::move(trial));
    }
    // Close the last exchange with the outcome so the transcript ends on a user turn.
    result_.transcript.push_back({llm::Role::user, prompt});
  }

  llm::Client& client_;
  TrainerClient& runner_;
  const CodegenTemplates& t_;
  const CodegenOptions& o_;
  CodegenResult result_;
};

}  // namespace

CodegenResult run_codegen_session(llm::Client& client, TrainerClient& runner, const DatasetDescriptor& dataset,
                                  const CodegenTemplates& templates, const CodegenOptions& options) {
  if (options.budget < 0) throw ConfigError("budget must be nonnegative");
  return Session(client, runner, templates, options).run(dataset);
}

}  // namespace hpo::codegen
