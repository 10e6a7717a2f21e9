#pragma once

#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "awi/awdg.hpp"
#include "awi/common.hpp"
#include "awi/registry.hpp"
#include "awi/taint_engine.hpp"

namespace awi {

enum class GuardLevel { ActionLevel, WorkflowLevel };
enum class TriggerReachability { AttackerReachable, MaintainerOnly, Conditional };

std::string_view to_string(GuardLevel l);
std::string_view to_string(TriggerReachability r);

struct GuardVerdict {
  std::string guard_id;  // workflow_guards id, action guard field, or "none"
  GuardLevel level = GuardLevel::WorkflowLevel;
  SourceLocation location;
  GuardStatus status = GuardStatus::Unknown;
  std::string detail;  // condition text or configured value
  /// False for verdicts that cannot stop a human attacker, e.g. an allowlist
  /// that only restricts bots.
  bool blocking = true;

  friend bool operator==(const GuardVerdict&, const GuardVerdict&) = default;
};

TriggerReachability classify_trigger_reachability(const std::vector<std::string>& trigger_events,
                                                  const std::set<SourceCategory>& sources_used);

/// Verdict for one `if:` condition. `human_source` enables bot-type checks.
GuardVerdict classify_condition(std::string_view if_cond, const ActionRegistry& registry, bool human_source);

std::vector<GuardVerdict> evaluate_workflow_guards(const RawPath& path, const Awdg& g,
                                                   const ActionRegistry& registry);

std::vector<GuardVerdict> evaluate_action_guards(const RawPath& path, const Awdg& g, const ActionRegistry& registry);

struct ReachabilityOptions {
  bool guards = true;  // false: keep guarded paths (verdicts are still computed)
};

struct GuardedPath {
  RawPath path;
  TriggerReachability trigger = TriggerReachability::AttackerReachable;
  std::vector<GuardVerdict> verdicts;  // workflow-level first, then action-level
  bool reported = false;
};

/// Computes verdicts for every path and decides which ones are reported.
std::vector<GuardedPath> filter(const std::vector<RawPath>& paths, const Awdg& g, const ActionRegistry& registry,
                                const ReachabilityOptions& options = {});

}  // namespace awi
