#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace awi {

/// Position of a construct inside a workflow file. Lines and columns are
/// 1-based; offset/length are byte positions in the raw source text.
struct SourceLocation {
  std::size_t line = 0;
  std::size_t column = 0;
  std::size_t offset = 0;
  std::size_t length = 0;

  bool known() const { return line != 0; }
  friend bool operator==(const SourceLocation&, const SourceLocation&) = default;
};

enum class SourceCategory {
  Issue,
  PullRequest,
  CommentReview,
  BranchCommit,
  SerializedEvent,
  ScriptCollaborationRead,
};

enum class ActionKind { Agentic, LlmAssisted, NonLlm };

enum class SinkEffect { GithubWriteApi, ShellToolExec, FileWrite, NetworkEgress };

enum class GuardStatus { Effective, Permissive, Missing, Unknown };

enum class Pattern { P2A, P2S };

std::string_view to_string(SourceCategory c);
std::string_view to_string(ActionKind k);
std::string_view to_string(SinkEffect e);
std::string_view to_string(GuardStatus s);
std::string_view to_string(Pattern p);

std::optional<SourceCategory> parse_source_category(std::string_view text);
std::optional<ActionKind> parse_action_kind(std::string_view text);
std::optional<SinkEffect> parse_sink_effect(std::string_view text);
std::optional<GuardStatus> parse_guard_status(std::string_view text);

/// Raised when a registry document is malformed.
class RegistryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised for invalid workflow YAML or a workflow missing `on:`/`jobs:`.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Small string helpers shared across modules.
std::string to_lower(std::string_view s);
std::string_view trim(std::string_view s);
bool starts_with(std::string_view s, std::string_view prefix);

}  // namespace awi
