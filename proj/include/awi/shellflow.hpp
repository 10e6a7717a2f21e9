#pragma once

#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "awi/common.hpp"
#include "awi/registry.hpp"

namespace awi {

/// Something a script reads or writes. `name` is the variable, path, output
/// key, interpolation index, or (for CommandSource/Command) the 1-based line
/// within the script, with a ".k" suffix when one line holds several.
struct ScriptEntity {
  enum class Kind { ShellVar, Env, File, GithubOutput, GithubEnv, Interpolation, CommandSource, Command };

  Kind kind = Kind::ShellVar;
  std::string name;

  friend bool operator==(const ScriptEntity&, const ScriptEntity&) = default;
  friend auto operator<=>(const ScriptEntity&, const ScriptEntity&) = default;
};

std::string_view to_string(ScriptEntity::Kind k);

struct SinkHit {
  ScriptEntity command;  // Kind::Command
  std::string command_text;
  std::string pattern_id;
  SinkEffect effect = SinkEffect::GithubWriteApi;
  std::size_t line = 0;
  std::set<ScriptEntity> origins;
};

struct SourceHit {
  ScriptEntity source;  // Kind::CommandSource
  std::string command_text;
  std::size_t line = 0;
  SourceCategory category = SourceCategory::ScriptCollaborationRead;
};

struct ScriptFlow {
  std::set<ScriptEntity> reads;
  std::set<ScriptEntity> writes;
  std::set<std::pair<ScriptEntity, ScriptEntity>> edges;
  std::vector<SinkHit> sink_hits;
  std::vector<SourceHit> sources;
  std::set<SinkEffect> effect_kinds;
  std::vector<std::string> diagnostics;  // e.g. "non-shell-run", "conservative-js"
  std::size_t commands_total = 0;
  std::size_t commands_recognized = 0;

  /// Share of simple commands that contributed at least one flow fact.
  double coverage() const;
};

/// Placeholder that replaces the i-th `${{ }}` occurrence before lexing.
std::string interpolation_placeholder(std::size_t index);

struct ScriptOptions {
  std::optional<std::string> shell;  // effective `shell:`; bash when unset
  /// Names declared in any enclosing `env:` block. A `$NAME` read of one of
  /// these is an Env read even when the script also assigns NAME.
  std::set<std::string> env_names;
};

/// Data-flow facts of one `run:` body. The `${{ }}` occurrences in `body` are
/// numbered left to right and surface as Interpolation entities; they are
/// tainted reads wherever they appear, single quotes included.
ScriptFlow analyze_script(std::string_view body, const ActionRegistry& registry, const ScriptOptions& options = {});

/// Conservative stand-in for a JavaScript analysis of an inline script input.
ScriptFlow analyze_github_script(std::string_view script, const ScriptAction& action);

/// Matches one simple command against the registry's P2S sink commands.
std::optional<SinkMatch> classify_sink_command(std::string_view command_text, const ActionRegistry& registry);

/// Collaboration-content reading command recognition.
std::optional<SourceCategory> detect_script_source(std::string_view command_text, const ActionRegistry& registry);

/// True for bash/sh style shells (and an unset shell).
bool is_posix_shell(const std::optional<std::string>& shell);

}  // namespace awi
