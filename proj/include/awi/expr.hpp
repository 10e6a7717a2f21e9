#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "awi/workflow.hpp"

namespace awi {

class ExprError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExprAst {
  enum class Kind { ContextPath, Call, Literal, BinaryOp, UnaryOp, Index, Opaque };

  Kind kind = Kind::Opaque;
  std::vector<std::string> segments;  // ContextPath only
  std::string text;                   // function name, operator, literal, or raw text
  std::vector<ExprAst> children;

  std::string dotted() const;  // ContextPath segments joined with '.'
};

/// Parses the text between `${{` and `}}`. Syntax the grammar does not cover
/// becomes an Opaque node that still carries every context path it mentions.
ExprAst parse_expr(std::string_view raw);

enum class ProducerKind { EventContext, StepOutput, JobOutput, EnvVar, WorkflowInput, Vars, Opaque };
enum class EnvScope { Workflow, Job, Step, Runtime };

std::string_view to_string(ProducerKind k);
std::string_view to_string(EnvScope s);

struct ProducerRef {
  ProducerKind kind = ProducerKind::Opaque;
  std::string path;  // canonical dotted path as written
  std::string job;       // StepOutput, JobOutput, EnvVar(Job/Step/Runtime)
  std::string step_id;   // StepOutput
  std::string step_key;  // EnvVar(Step)
  std::string name;      // StepOutput, JobOutput, EnvVar, WorkflowInput, Vars
  EnvScope scope = EnvScope::Runtime;
  bool serialized = false;  // reached through toJson(...)

  friend bool operator==(const ProducerRef&, const ProducerRef&) = default;
  friend auto operator<=>(const ProducerRef&, const ProducerRef&) = default;
};

/// Where an expression appears; drives `steps.*` and `env.*` resolution.
struct ExprScope {
  const WorkflowIR* workflow = nullptr;
  const JobIR* job = nullptr;
  const StepIR* step = nullptr;
  /// Set when the expression is itself the value of an `env:` entry at this
  /// level; lookup of `env.*` then starts one level further out.
  std::optional<EnvScope> inside_env_of;
};

/// Every producer the expression may read, sorted and de-duplicated.
std::vector<ProducerRef> resolve(const ExprAst& ast, const ExprScope& scope);

/// Convenience for the common parse-then-resolve case. Expressions that fail
/// to tokenize resolve to a single Opaque producer holding the raw text.
std::vector<ProducerRef> resolve_raw(std::string_view raw, const ExprScope& scope);

}  // namespace awi
