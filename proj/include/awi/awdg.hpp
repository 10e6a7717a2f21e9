#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "awi/common.hpp"
#include "awi/expr.hpp"
#include "awi/registry.hpp"
#include "awi/workflow.hpp"

namespace awi {

enum class NodeKind {
  Trigger,
  Job,
  Step,
  EventContext,
  Expression,
  EnvVar,
  ActionInput,
  ActionOutput,
  StepOutput,
  JobOutput,
  WorkflowInput,
  ScriptVar,
  File,
  RunCommand,
  ReusableCall,
};

std::string_view to_string(NodeKind k);

// Annotation names used in NodeAttrs::annotations.
inline constexpr const char* kPromptBoundary = "prompt-boundary";
inline constexpr const char* kDerivedOutput = "derived-output";
inline constexpr const char* kSink = "sink";
inline constexpr const char* kCollabSource = "collaboration-read";
inline constexpr const char* kSerialized = "serialized";
inline constexpr const char* kOpaque = "opaque";

/// The α attribute record of one node.
struct NodeAttrs {
  std::string id;
  NodeKind kind = NodeKind::Step;
  std::string label;  // short display name used in rendered paths
  std::string workflow_path;
  std::string job_id;    // prefixed for nodes of an inlined callee
  std::string step_key;  // prefixed likewise
  std::string field_name;
  std::string action_ref;
  std::string expression_text;
  std::string context_path;  // EventContext: dotted path, or toJson(path)
  std::string value;         // literal field value where one exists
  SourceLocation location;
  std::set<std::string> annotations;

  // Step/Job nodes.
  std::optional<std::string> if_cond;
  SourceLocation if_location;
  std::optional<std::string> environment;
  std::map<std::string, std::string> guard_values;  // configured guard fields
  std::string invocation;  // ActionInput/ActionOutput: owning step node id

  // Sinks.
  std::optional<SinkEffect> sink_effect;
  std::string sink_pattern;
  std::string command_text;

  std::vector<std::string> opaque_refs;  // unresolved expression paths
  std::vector<std::string> diagnostics;  // per-node analyzer caveats
};

using EdgeSet = std::set<std::pair<std::string, std::string>>;

/// A reference whose producer lives across a step, job, or workflow
/// boundary; resolved by resolve_cross_boundary.
struct PendingRef {
  std::string consumer;
  ProducerRef producer;
  std::string prefix;
  std::string job_id;  // unprefixed job of the consumer
  std::size_t step_index = 0;
  bool in_step = false;
};

struct Awdg {
  std::string workflow_path;
  std::vector<std::string> trigger_events;
  std::map<std::string, NodeAttrs> nodes;
  EdgeSet e_cf;
  EdgeSet e_df;
  EdgeSet cross_boundary;  // the subset of e_df added by cross-boundary resolution
  std::vector<std::string> diagnostics;
  std::vector<PendingRef> pending;

  bool has_node(const std::string& id) const { return nodes.count(id) > 0; }
  const NodeAttrs& node(const std::string& id) const { return nodes.at(id); }
};

struct GraphOptions {
  bool script_analysis = true;
  bool workflow_bridges = true;
  int max_call_depth = 3;
};

/// Workflow files available for local reusable-workflow resolution, keyed
/// by repository-relative path (".github/workflows/x.yml").
using SiblingMap = std::map<std::string, const WorkflowIR*>;

Awdg build_local(const WorkflowIR& ir, const ActionRegistry& registry, const GraphOptions& options = {},
                 const std::string& prefix = "");

void resolve_cross_boundary(Awdg& g, const WorkflowIR& ir, const SiblingMap& siblings, const ActionRegistry& registry,
                            const GraphOptions& options = {});

void annotate_agentic(Awdg& g, const WorkflowIR& ir, const ActionRegistry& registry, const std::string& prefix = "");

/// All three construction phases plus file-sink marking.
Awdg build_awdg(const WorkflowIR& ir, const SiblingMap& siblings, const ActionRegistry& registry,
                const GraphOptions& options = {});

/// Deterministic Graphviz rendering; data flow solid, control flow dashed.
std::string dump_dot(const Awdg& g);

/// Repository-relative key of a workflow path, used for SiblingMap lookup.
std::string workflow_key(const std::string& path);

}  // namespace awi
