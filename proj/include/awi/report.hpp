#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "awi/awdg.hpp"
#include "awi/common.hpp"
#include "awi/reachability.hpp"
#include "awi/registry.hpp"
#include "awi/taint_engine.hpp"
#include "awi/workflow.hpp"

namespace awi {

inline constexpr const char* kReportVersion = "1.0";

struct PathStep {
  std::string node;
  std::string kind;
  std::string label;
  std::string file;  // differs from the finding's workflow for inlined callees
  SourceLocation location;
  bool via_bridge = false;  // the edge into this node crosses a model
};

struct FindingSource {
  SourceCategory category = SourceCategory::Issue;
  std::string context_path;  // event path, or the reading command for script sources
  std::string node;
  std::string file;
  SourceLocation location;
};

struct FindingSink {
  std::string kind;  // "prompt-boundary" or a sink pattern id
  std::optional<SinkEffect> effect;  // unset for P2A
  std::string node;
  std::string label;
  std::string file;
  SourceLocation location;
};

struct Finding {
  std::string id;
  std::string workflow_path;
  Pattern pattern = Pattern::P2A;
  FindingSource source;
  FindingSink sink;
  std::optional<std::string> bridged_action;  // action ref of the last model hop
  std::vector<PathStep> path;
  std::vector<GuardVerdict> guards;
  std::vector<std::string> diagnostics;
  std::vector<std::string> additional_sources;  // other sources reaching the same sink
  std::vector<std::string> trigger_events;
};

struct ScanSummary {
  std::size_t workflows_scanned = 0;
  std::size_t workflows_with_findings = 0;
  std::map<std::string, std::size_t> by_pattern;
  std::map<std::string, std::size_t> by_sink_effect;
  std::map<std::string, std::size_t> by_source_category;
  std::map<std::string, std::size_t> guarded_paths;  // by guard level
  std::size_t dropped_non_agent = 0;
  std::map<std::string, double> wall_ms;  // per workflow

  friend bool operator==(const ScanSummary&, const ScanSummary&) = default;
};

struct ScanOptions {
  const ActionRegistry* registry = nullptr;  // builtin registry when null
  GraphOptions graph;
  EngineOptions engine;
  ReachabilityOptions reachability;
  unsigned jobs = 1;
  bool dump_ir = false;
  bool dump_graph = false;
};

struct WorkflowResult {
  std::string path;
  std::vector<Finding> findings;
  std::vector<GuardedPath> paths;
  std::size_t dropped_non_agent = 0;
  std::vector<std::string> diagnostics;
  double wall_ms = 0;
  std::string ir_dump;
  std::string graph_dump;
};

struct ScanResult {
  std::vector<Finding> findings;  // sorted by workflow, pattern, source, sink
  ScanSummary summary;
  std::vector<WorkflowResult> workflows;  // sorted by path
  std::vector<std::string> diagnostics;   // "path: message"
};

/// Every `.yml`/`.yaml` below a `.github/workflows/` directory of each
/// directory argument, plus file arguments as given. Throws
/// std::runtime_error when an argument does not exist.
std::vector<std::string> collect_workflow_files(const std::vector<std::string>& paths);

/// First 16 hex digits of SHA-256 over the identifying tuple.
std::string finding_id(const std::string& workflow_path, Pattern pattern, const std::string& source_path,
                       const std::string& sink_id);

/// Groups reported paths into findings, one per (pattern, sink).
std::vector<Finding> make_findings(const std::vector<GuardedPath>& paths, const Awdg& g);

WorkflowResult analyze_workflow(const WorkflowIR& ir, const SiblingMap& siblings, const ScanOptions& options);

ScanResult scan(const std::vector<std::string>& paths, const ScanOptions& options);

/// Counts derivable from the findings alone (workflows_scanned, guarded
/// paths, dropped pairs and timings are left zero).
ScanSummary summarize_findings(const std::vector<Finding>& findings);

/// "a → b ⇒(agent)⇒ c": arrows between nodes, a marked arrow for model hops,
/// runs of equal labels collapsed.
std::string render_path(const Finding& f);

struct EmitOptions {
  bool timings = false;
};

std::string emit_text(const ScanResult& result);
std::string emit_json(const ScanResult& result, const EmitOptions& options = {});
std::string emit_sarif(const ScanResult& result);

}  // namespace awi
