#pragma once

#include <map>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "awi/common.hpp"

namespace awi {

/// Who an action-level guard field admits or denies.
enum class GuardScope { Users, Bots };

/// How a configured guard value is interpreted. `unset`/`empty` are the
/// verdicts used when the field is absent or configured as an empty string;
/// std::nullopt means "emit no verdict".
struct GuardPolicy {
  GuardScope scope = GuardScope::Users;
  std::string separator = ",";
  std::string wildcard = "*";
  bool boolean = false;
  std::optional<GuardStatus> unset;
  std::optional<GuardStatus> empty;

  friend bool operator==(const GuardPolicy&, const GuardPolicy&) = default;
};

struct ActionSpec {
  std::string action_ref;
  ActionKind kind = ActionKind::NonLlm;
  std::set<std::string> prompt_inputs;
  std::set<std::string> prompt_file_inputs;
  std::set<std::string> derived_outputs;
  std::set<std::string> derived_output_files;
  std::map<std::string, GuardPolicy> guard_fields;

  friend bool operator==(const ActionSpec&, const ActionSpec&) = default;
};

struct SourcePattern {
  std::string pattern;  // dotted path, `*` matches one segment; or toJson(path)
  SourceCategory category;
  std::set<std::string> events;  // "*" = any event
  bool serialized = false;

  friend bool operator==(const SourcePattern&, const SourcePattern&) = default;
};

struct SourceCommand {
  std::string prefix;
  std::string argument_pattern;  // optional regex over the remaining words
  std::regex argument_regex;

  friend bool operator==(const SourceCommand& a, const SourceCommand& b) {
    return a.prefix == b.prefix && a.argument_pattern == b.argument_pattern;
  }
};

struct SinkCommand {
  std::string id;
  std::string prefix;
  SinkEffect effect = SinkEffect::GithubWriteApi;

  friend bool operator==(const SinkCommand&, const SinkCommand&) = default;
};

struct SinkActionInputs {
  std::string action_ref;
  std::set<std::string> inputs;
  SinkEffect effect = SinkEffect::GithubWriteApi;

  friend bool operator==(const SinkActionInputs&, const SinkActionInputs&) = default;
};

/// An action whose input carries an inline script (actions/github-script).
struct ScriptAction {
  std::string action_ref;
  std::string input;
  SinkEffect effect = SinkEffect::GithubWriteApi;
  std::vector<std::string> write_calls;
  std::vector<std::regex> write_call_regexes;

  friend bool operator==(const ScriptAction& a, const ScriptAction& b) {
    return a.action_ref == b.action_ref && a.input == b.input && a.effect == b.effect &&
           a.write_calls == b.write_calls;
  }
};

enum class WorkflowGuardKind { Association, Identity, Label, BotType };

struct WorkflowGuardPattern {
  std::string id;
  WorkflowGuardKind kind = WorkflowGuardKind::Identity;
  std::string subject;
  std::regex subject_regex;
  std::set<std::string> trusted;

  friend bool operator==(const WorkflowGuardPattern& a, const WorkflowGuardPattern& b) {
    return a.id == b.id && a.kind == b.kind && a.subject == b.subject && a.trusted == b.trusted;
  }
};

/// The global source/sink/sanitizer specification.
struct TaintSpec {
  std::vector<SourcePattern> sources;
  std::vector<SourceCommand> source_commands;
  std::vector<SinkCommand> p2s_sink_commands;
  std::vector<SinkActionInputs> sink_action_inputs;
  std::vector<ScriptAction> script_actions;
  std::vector<WorkflowGuardPattern> workflow_guard_patterns;

  friend bool operator==(const TaintSpec&, const TaintSpec&) = default;
};

/// Result of classifying one simple command against the sink list.
struct SinkMatch {
  std::string pattern_id;
  SinkEffect effect;
};

/// Strips an `@ref` suffix and folds case. Local (`./x`) and container
/// (`docker://x`) references keep a marker prefix so lookup never hits.
std::string normalize_action_ref(std::string_view raw);

/// Immutable after load; safe to share across analysis threads.
class ActionRegistry {
 public:
  static ActionRegistry load_file(const std::string& path);
  static ActionRegistry load_string(std::string_view yaml_text);
  /// The seed registry compiled into the binary.
  static const ActionRegistry& builtin();

  const ActionSpec* lookup(std::string_view action_ref) const;
  const std::map<std::string, ActionSpec>& actions() const { return actions_; }
  const TaintSpec& taint_spec() const { return spec_; }

  /// Category for a dotted context path or a `toJson(path)` call.
  std::optional<SourceCategory> match_source(std::string_view context_path) const;
  /// Like match_source, but only patterns whose events intersect `events`.
  std::optional<SourceCategory> match_source_for_events(std::string_view context_path,
                                                        const std::vector<std::string>& events) const;
  /// Matches a command's words (already split, no leading assignments).
  bool is_collaboration_read(const std::vector<std::string>& words) const;
  std::optional<SinkMatch> classify_sink_command(const std::vector<std::string>& words) const;
  const SinkActionInputs* sink_action(std::string_view action_ref) const;
  const ScriptAction* script_action(std::string_view action_ref) const;

  GuardStatus classify_guard_value(std::string_view guard_field, std::string_view configured_value) const;
  GuardStatus classify_guard_value(const GuardPolicy& policy, std::string_view configured_value) const;
  const GuardPolicy* guard_policy(std::string_view guard_field) const;

  friend bool operator==(const ActionRegistry&, const ActionRegistry&) = default;

 private:
  std::map<std::string, ActionSpec> actions_;
  TaintSpec spec_;
};

/// Splits a shell-ish command text into words (quotes removed).
std::vector<std::string> split_command_words(std::string_view text);

}  // namespace awi
