#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "awi/common.hpp"

namespace awi {

class ActionRegistry;

/// Semantic role of the field an expression was found in.
enum class FieldRole { PromptInput, EnvValue, RunBody, IfCond, OutputDecl, WithValue, Other };

std::string_view to_string(FieldRole role);

/// One `${{ ... }}` occurrence.
struct ExpressionRef {
  std::string raw;  // trimmed text between the braces
  std::string ir_path;
  SourceLocation location;  // span of the full `${{ ... }}` in the file
  FieldRole role = FieldRole::Other;
  std::string job_id;
  std::string step_key;
  std::string field_name;
  std::size_t value_offset = 0;  // offset of `${{` inside the decoded scalar
  std::size_t value_length = 0;
};

/// A scalar-valued field and where its value starts in the file.
struct Field {
  std::string value;
  SourceLocation location;
};

using FieldMap = std::map<std::string, Field>;

struct InputDecl {
  std::string name;
  std::string trigger;  // workflow_dispatch or workflow_call
  std::string type;
  std::optional<std::string> default_value;
  bool required = false;
  SourceLocation location;  // the input's key
};

struct StepIR {
  std::string key;  // "<job_id>#<zero-based index>"
  std::size_t index = 0;
  std::optional<std::string> step_id;
  std::optional<std::string> name;
  std::optional<std::string> uses;
  std::optional<std::string> run;
  std::optional<std::string> shell;
  FieldMap with_block;
  FieldMap env;
  std::optional<std::string> if_cond;  // as written, possibly wrapped in ${{ }}
  SourceLocation location;
  SourceLocation run_location;
  nlohmann::ordered_json extra = nlohmann::ordered_json::object();
};

struct JobIR {
  std::string job_id;
  std::vector<std::string> needs;
  std::optional<std::string> if_cond;
  FieldMap env;
  std::map<std::string, std::string> permissions;
  FieldMap outputs;
  std::optional<std::string> uses;  // reusable workflow call
  FieldMap with_block;
  std::optional<std::string> environment;
  std::optional<std::string> default_shell;
  std::vector<StepIR> steps;
  SourceLocation location;
  SourceLocation if_location;
  nlohmann::ordered_json extra = nlohmann::ordered_json::object();
};

struct WorkflowIR {
  std::string path;
  std::vector<std::string> trigger_events;
  nlohmann::ordered_json trigger_config;  // the `on:` value as written
  std::map<std::string, InputDecl> inputs;
  FieldMap call_outputs;  // on.workflow_call.outputs.<name>.value
  FieldMap env;
  std::map<std::string, std::string> permissions;
  std::optional<std::string> default_shell;
  std::vector<JobIR> jobs;
  std::vector<ExpressionRef> expressions;
  std::vector<std::string> diagnostics;
  nlohmann::ordered_json extra = nlohmann::ordered_json::object();

  const JobIR* find_job(std::string_view job_id) const;
  const StepIR* find_step(std::string_view job_id, std::string_view step_id) const;
};

struct ParseOptions {
  /// When set, `with:` values of registered prompt inputs get FieldRole::PromptInput.
  const ActionRegistry* registry = nullptr;
};

/// Lifts one workflow file into the IR. Throws ParseError; never returns a
/// partial IR.
WorkflowIR parse_workflow(std::string_view source_text, std::string_view path, const ParseOptions& options = {});

/// All expression references of a parsed workflow, in document order.
std::vector<ExpressionRef> extract_expressions(const WorkflowIR& ir);

/// A located `${{ }}` occurrence inside a single string.
struct ExpressionSpan {
  std::size_t offset = 0;  // position of `${{`
  std::size_t length = 0;  // through the closing `}}`
  std::string raw;
};

/// Left-to-right scan of one string for `${{ ... }}` occurrences.
std::vector<ExpressionSpan> scan_expressions(std::string_view text);

/// Strips a single `${{ }}` wrapper from an `if:` value.
std::string condition_expression(std::string_view if_cond);

/// Deterministic JSON rendering of the IR. The output is itself a valid
/// workflow document (plus an `x-ir` key with analysis metadata), so it can
/// be fed back to parse_workflow.
std::string dump_ir_json(const WorkflowIR& ir, bool with_locations = true);

}  // namespace awi
