#include "awi/taint_engine.hpp"

#include <algorithm>
#include <deque>

namespace awi {

namespace {

using Adjacency = std::map<std::string, std::vector<std::string>>;

Adjacency adjacency(const EdgeSet& a, const EdgeSet& b) {
  Adjacency adj;
  for (const auto& [u, v] : a) adj[u].push_back(v);
  for (const auto& [u, v] : b) adj[u].push_back(v);
  for (auto& [u, vs] : adj) {
    std::sort(vs.begin(), vs.end());
    vs.erase(std::unique(vs.begin(), vs.end()), vs.end());
  }
  return adj;
}

// Breadth-first search with neighbours visited in id order, which yields the
// lexicographically smallest among the shortest paths.
std::map<std::string, std::string> bfs_parents(const Adjacency& adj, const std::string& start) {
  std::map<std::string, std::string> parent{{start, start}};
  std::deque<std::string> queue{start};
  while (!queue.empty()) {
    auto u = queue.front();
    queue.pop_front();
    auto it = adj.find(u);
    if (it == adj.end()) continue;
    for (const auto& v : it->second) {
      if (parent.emplace(v, u).second) queue.push_back(v);
    }
  }
  return parent;
}

std::vector<std::string> unwind(const std::map<std::string, std::string>& parent, std::string v) {
  std::vector<std::string> path{v};
  while (parent.at(v) != v) {
    v = parent.at(v);
    path.push_back(v);
  }
  std::reverse(path.begin(), path.end());
  return path;
}

}  // namespace

TaintGraph make_taint_graph(const Awdg& g, const ActionRegistry& registry) {
  TaintGraph tg;
  tg.edges = g.e_df;
  for (const auto& [id, n] : g.nodes) {
    tg.nodes.insert(id);
    if (n.kind == NodeKind::EventContext) {
      if (auto c = registry.match_source_for_events(n.context_path, g.trigger_events)) tg.sources[id] = *c;
    } else if (n.annotations.count(kCollabSource)) {
      tg.sources[id] = SourceCategory::ScriptCollaborationRead;
    }
    bool prompt = n.annotations.count(kPromptBoundary) > 0;
    bool output = n.annotations.count(kDerivedOutput) > 0;
    if ((prompt || output) && !n.invocation.empty()) {
      auto& inv = tg.invocations[n.invocation];
      inv.id = n.invocation;
      inv.action_ref = n.action_ref;
      if (const auto* spec = registry.lookup(n.action_ref)) inv.agentic = spec->kind == ActionKind::Agentic;
      (prompt ? inv.prompts : inv.outputs).insert(id);
    }
    if (n.annotations.count(kSink) && n.sink_effect) tg.sinks[id] = SinkInfo{*n.sink_effect, n.sink_pattern};
  }
  return tg;
}

TaintState initialize_sources(const TaintGraph& tg) {
  TaintState state;
  for (const auto& [s, cat] : tg.sources) {
    state.tainted.insert(s);
    state.provenance[s][s] = {s};
  }
  return state;
}

void propagate(const TaintGraph& tg, TaintState& state) {
  auto adj = adjacency(tg.edges, state.bridges);
  for (const auto& [s, cat] : tg.sources) {
    auto parent = bfs_parents(adj, s);
    for (const auto& [v, p] : parent) {
      state.tainted.insert(v);
      state.provenance[v][s] = unwind(parent, v);
    }
  }
}

void bridge_outputs(const TaintGraph& tg, TaintState& state) {
  for (;;) {
    bool changed = false;
    for (const auto& [id, inv] : tg.invocations) {
      for (const auto& p : inv.prompts) {
        if (!state.is_tainted(p)) continue;
        for (const auto& o : inv.outputs) changed |= state.bridges.insert({p, o}).second;
      }
    }
    if (!changed) return;
    propagate(tg, state);
  }
}

DetectResult detect(const TaintGraph& tg, const TaintState& state) {
  DetectResult result;
  std::map<std::pair<std::string, std::string>, std::string> owner;  // bridge -> invocation
  std::set<std::string> agentic_prompts;
  for (const auto& [id, inv] : tg.invocations) {
    for (const auto& p : inv.prompts) {
      for (const auto& o : inv.outputs) owner.emplace(std::pair{p, o}, id);
      if (inv.agentic) agentic_prompts.insert(p);
    }
  }
  auto steps_of = [&](const std::vector<std::string>& nodes, RawPath& rp) {
    rp.bridged_steps.assign(nodes.size() > 0 ? nodes.size() - 1 : 0, false);
    for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
      if (state.bridges.count({nodes[i], nodes[i + 1]})) {
        rp.bridged_steps[i] = true;
        rp.bridged_action = owner.at({nodes[i], nodes[i + 1]});
      }
    }
  };

  auto df = adjacency(tg.edges, {});
  auto br = adjacency(state.bridges, {});
  using State = std::pair<std::string, bool>;

  for (const auto& [s, cat] : tg.sources) {
    // Rule 3: tainted prompt boundary of an agentic action.
    for (const auto& p : agentic_prompts) {
      auto pit = state.provenance.find(p);
      if (pit == state.provenance.end()) continue;
      auto sit = pit->second.find(s);
      if (sit == pit->second.end()) continue;
      RawPath rp;
      rp.pattern = Pattern::P2A;
      rp.source = s;
      rp.source_category = cat;
      rp.sink = p;
      rp.sink_kind = "prompt-boundary";
      rp.nodes = sit->second;
      steps_of(rp.nodes, rp);
      result.paths.push_back(std::move(rp));
    }

    // Rule 5: walk (node, passed-a-bridge) states so the witness is the
    // shortest path that actually crosses a model output.
    std::map<State, State> parent;
    State start{s, false};
    parent[start] = start;
    std::deque<State> queue{start};
    while (!queue.empty()) {
      auto [u, b] = queue.front();
      queue.pop_front();
      std::vector<std::string> next;
      if (auto it = df.find(u); it != df.end()) next = it->second;
      if (auto it = br.find(u); it != br.end()) next.insert(next.end(), it->second.begin(), it->second.end());
      std::sort(next.begin(), next.end());
      next.erase(std::unique(next.begin(), next.end()), next.end());
      for (const auto& v : next) {
        State sv{v, b || state.bridges.count({u, v}) > 0};
        if (parent.emplace(sv, State{u, b}).second) queue.push_back(sv);
      }
    }
    for (const auto& [k, info] : tg.sinks) {
      if (k == s) continue;
      State goal{k, true};
      if (!parent.count(goal)) {
        if (parent.count(State{k, false})) ++result.dropped_non_agent;
        continue;
      }
      std::vector<std::string> nodes;
      for (State cur = goal;; cur = parent.at(cur)) {
        nodes.push_back(cur.first);
        if (parent.at(cur) == cur) break;
      }
      std::reverse(nodes.begin(), nodes.end());
      RawPath rp;
      rp.pattern = Pattern::P2S;
      rp.source = s;
      rp.source_category = cat;
      rp.sink = k;
      rp.sink_kind = info.pattern;
      rp.nodes = std::move(nodes);
      steps_of(rp.nodes, rp);
      result.paths.push_back(std::move(rp));
    }
  }
  std::sort(result.paths.begin(), result.paths.end(), [](const RawPath& a, const RawPath& b) {
    return std::tie(a.source, a.sink, a.pattern) < std::tie(b.source, b.sink, b.pattern);
  });
  return result;
}

DetectResult run_engine(const TaintGraph& tg, const EngineOptions& options) {
  auto state = initialize_sources(tg);
  propagate(tg, state);
  if (options.bridge) bridge_outputs(tg, state);
  return detect(tg, state);
}

}  // namespace awi
