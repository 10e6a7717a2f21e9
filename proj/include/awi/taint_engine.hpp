#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "awi/awdg.hpp"
#include "awi/common.hpp"
#include "awi/registry.hpp"

namespace awi {

/// One action invocation as the engine sees it: prompt-boundary inputs and
/// derived outputs of the same step.
struct Invocation {
  std::string id;
  std::string action_ref;
  bool agentic = false;
  std::set<std::string> prompts;
  std::set<std::string> outputs;
};

struct SinkInfo {
  SinkEffect effect = SinkEffect::GithubWriteApi;
  std::string pattern;
};

/// The part of an AWDG the propagation rules look at. Random graphs in the
/// tests are built directly in this form.
struct TaintGraph {
  std::set<std::string> nodes;
  EdgeSet edges;  // data flow
  std::map<std::string, SourceCategory> sources;
  std::map<std::string, Invocation> invocations;
  std::map<std::string, SinkInfo> sinks;
};

struct TaintState {
  std::set<std::string> tainted;
  /// node -> source -> shortest witness path from that source.
  std::map<std::string, std::map<std::string, std::vector<std::string>>> provenance;
  /// Active prompt -> derived-output bridges.
  EdgeSet bridges;

  bool is_tainted(const std::string& id) const { return tainted.count(id) > 0; }
};

struct RawPath {
  Pattern pattern = Pattern::P2A;
  std::string source;
  SourceCategory source_category = SourceCategory::Issue;
  std::string sink;
  std::string sink_kind;  // "prompt-boundary" or the sink pattern id
  std::vector<std::string> nodes;
  std::vector<bool> bridged_steps;  // [i] is true when nodes[i] -> nodes[i+1] is a bridge
  std::optional<std::string> bridged_action;  // invocation id of the last bridge

  friend bool operator==(const RawPath&, const RawPath&) = default;
};

struct EngineOptions {
  bool bridge = true;
};

struct DetectResult {
  std::vector<RawPath> paths;  // sorted by source, sink, pattern
  /// Source-to-sink pairs connected without passing through any model.
  std::size_t dropped_non_agent = 0;
};

/// Projects an annotated AWDG, initializing sources under its triggers.
TaintGraph make_taint_graph(const Awdg& g, const ActionRegistry& registry);

TaintState initialize_sources(const TaintGraph& tg);
void propagate(const TaintGraph& tg, TaintState& state);
/// Activates bridges of every invocation with a tainted prompt and
/// re-propagates until nothing changes.
void bridge_outputs(const TaintGraph& tg, TaintState& state);
DetectResult detect(const TaintGraph& tg, const TaintState& state);

DetectResult run_engine(const TaintGraph& tg, const EngineOptions& options = {});

}  // namespace awi
