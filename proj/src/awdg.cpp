#include "awi/awdg.hpp"

#include <algorithm>
#include <functional>
#include <regex>
#include <sstream>

#include "awi/shellflow.hpp"

namespace awi {

std::string_view to_string(NodeKind k) {
  switch (k) {
    case NodeKind::Trigger: return "Trigger";
    case NodeKind::Job: return "Job";
    case NodeKind::Step: return "Step";
    case NodeKind::EventContext: return "EventContext";
    case NodeKind::Expression: return "Expression";
    case NodeKind::EnvVar: return "EnvVar";
    case NodeKind::ActionInput: return "ActionInput";
    case NodeKind::ActionOutput: return "ActionOutput";
    case NodeKind::StepOutput: return "StepOutput";
    case NodeKind::JobOutput: return "JobOutput";
    case NodeKind::WorkflowInput: return "WorkflowInput";
    case NodeKind::ScriptVar: return "ScriptVar";
    case NodeKind::File: return "File";
    case NodeKind::RunCommand: return "RunCommand";
    case NodeKind::ReusableCall: return "ReusableCall";
  }
  return "Step";
}

std::string workflow_key(const std::string& path) {
  auto pos = path.rfind(".github/workflows/");
  if (pos != std::string::npos) return path.substr(pos);
  auto slash = path.rfind('/');
  return ".github/workflows/" + (slash == std::string::npos ? path : path.substr(slash + 1));
}

namespace {

std::string context_label(const std::string& path) {
  if (starts_with(path, "github.event.")) return path.substr(13);
  if (starts_with(path, "github.")) return path.substr(7);
  return path;
}

std::size_t step_index_of(const std::string& key) {
  auto h = key.rfind('#');
  return h == std::string::npos ? 0 : std::stoul(key.substr(h + 1));
}

// Jobs that take part in a needs cycle; they are left out of the graph.
std::set<std::string> cyclic_jobs(const WorkflowIR& ir) {
  std::map<std::string, int> indeg;
  std::map<std::string, std::vector<std::string>> out;
  for (const auto& j : ir.jobs) indeg[j.job_id];
  for (const auto& j : ir.jobs) {
    for (const auto& n : j.needs) {
      if (!indeg.count(n)) continue;
      out[n].push_back(j.job_id);
      ++indeg[j.job_id];
    }
  }
  std::vector<std::string> ready;
  for (const auto& [id, d] : indeg) {
    if (d == 0) ready.push_back(id);
  }
  while (!ready.empty()) {
    auto id = ready.back();
    ready.pop_back();
    indeg.erase(id);
    for (const auto& next : out[id]) {
      auto it = indeg.find(next);
      if (it != indeg.end() && --it->second == 0) ready.push_back(next);
    }
  }
  std::set<std::string> cyc;
  for (const auto& [id, d] : indeg) cyc.insert(id);
  return cyc;
}

class Builder {
 public:
  Builder(Awdg& g, const WorkflowIR& ir, const ActionRegistry& reg, const GraphOptions& opt, std::string prefix)
      : g_(g), ir_(ir), reg_(reg), opt_(opt), p_(std::move(prefix)) {}

  void build() {
    auto excluded = cyclic_jobs(ir_);
    if (!excluded.empty()) {
      std::string names;
      for (const auto& j : excluded) names += (names.empty() ? "" : ", ") + j;
      g_.diagnostics.push_back(ir_.path + ": needs cycle among jobs " + names + "; excluded from analysis");
    }
    auto trigger = p_ + "trigger";
    ensure(trigger, NodeKind::Trigger, "trigger");
    for (const auto& [name, f] : ir_.env) declare_env(p_ + "env:wf:" + name, name, f, "");
    for (const auto& [name, decl] : ir_.inputs) {
      auto& n = ensure(p_ + "input:" + name, NodeKind::WorkflowInput, name);
      n.field_name = name;
      n.location = decl.location;
    }
    for (const auto& job : ir_.jobs) {
      if (excluded.count(job.job_id)) continue;
      build_job(job);
      g_.e_cf.insert({trigger, job_node(job.job_id)});
      for (const auto& need : job.needs) {
        if (ir_.find_job(need) && !excluded.count(need)) g_.e_cf.insert({job_node(need), job_node(job.job_id)});
      }
    }
    std::map<std::string, std::size_t> counters;
    for (const auto& e : ir_.expressions) {
      if (!e.job_id.empty() && excluded.count(e.job_id)) continue;
      add_expression(e, counters);
    }
  }

 private:
  std::string job_node(const std::string& job_id) const { return p_ + "job:" + job_id; }
  std::string step_node(const std::string& key) const { return p_ + "step:" + key; }

  NodeAttrs& ensure(const std::string& id, NodeKind kind, const std::string& label) {
    auto [it, inserted] = g_.nodes.try_emplace(id);
    if (inserted) {
      it->second.id = id;
      it->second.kind = kind;
      it->second.label = label;
      it->second.workflow_path = ir_.path;
    }
    return it->second;
  }

  void declare_env(const std::string& id, const std::string& name, const Field& f, const std::string& job) {
    auto& n = ensure(id, NodeKind::EnvVar, name);
    n.field_name = name;
    n.value = f.value;
    n.location = f.location;
    if (!job.empty()) n.job_id = p_ + job;
  }

  void build_job(const JobIR& job) {
    auto& jn = ensure(job_node(job.job_id), NodeKind::Job, job.job_id);
    jn.job_id = p_ + job.job_id;
    jn.location = job.location;
    jn.if_cond = job.if_cond;
    jn.if_location = job.if_location;
    jn.environment = job.environment;
    for (const auto& [name, f] : job.env) declare_env(p_ + "env:job:" + job.job_id + ":" + name, name, f, job.job_id);
    if (job.uses) {
      jn.action_ref = *job.uses;
      for (const auto& [name, f] : job.with_block) {
        auto& in = ensure(p_ + "in:" + job.job_id + "." + name, NodeKind::ActionInput, name);
        in.job_id = jn.job_id;
        in.field_name = name;
        in.value = f.value;
        in.location = f.location;
        in.invocation = jn.id;
      }
    }
    std::string prev = jn.id;
    for (const auto& step : job.steps) {
      build_step(job, step);
      g_.e_cf.insert({prev, step_node(step.key)});
      prev = step_node(step.key);
    }
  }

  void build_step(const JobIR& job, const StepIR& step) {
    auto id = step_node(step.key);
    auto label = step.step_id ? *step.step_id : (step.name ? *step.name : step.key);
    auto& sn = ensure(id, NodeKind::Step, label);
    sn.job_id = p_ + job.job_id;
    sn.step_key = p_ + step.key;
    sn.location = step.location;
    sn.if_cond = step.if_cond;
    for (const auto& [name, f] : step.env) {
      declare_env(p_ + "env:step:" + step.key + ":" + name, name, f, job.job_id);
      g_.nodes[p_ + "env:step:" + step.key + ":" + name].step_key = p_ + step.key;
    }
    if (step.uses) {
      auto ref = normalize_action_ref(*step.uses);
      g_.nodes[id].action_ref = ref;
      const auto* sink = reg_.sink_action(ref);
      const auto* script = reg_.script_action(ref);
      for (const auto& [name, f] : step.with_block) {
        if (script && name == script->input) continue;
        auto& in = ensure(p_ + "in:" + step.key + "." + name, NodeKind::ActionInput, name);
        in.job_id = p_ + job.job_id;
        in.step_key = p_ + step.key;
        in.field_name = name;
        in.value = f.value;
        in.location = f.location;
        in.action_ref = ref;
        in.invocation = id;
        if (sink && sink->inputs.count(name)) {
          in.annotations.insert(kSink);
          in.sink_effect = sink->effect;
          in.sink_pattern = "action:" + ref + "." + name;
          in.command_text = ref + " " + name;
        }
      }
      if (script && opt_.script_analysis) {
        auto it = step.with_block.find(script->input);
        if (it != step.with_block.end()) {
          lift_script(job, step, analyze_github_script(it->second.value, *script), it->second.location,
                      it->second.value.find('\n') != std::string::npos);
        }
      }
    } else if (step.run && opt_.script_analysis) {
      ScriptOptions so;
      so.shell = step.shell ? step.shell : (job.default_shell ? job.default_shell : ir_.default_shell);
      for (const auto& [n, f] : step.env) so.env_names.insert(n);
      for (const auto& [n, f] : job.env) so.env_names.insert(n);
      for (const auto& [n, f] : ir_.env) so.env_names.insert(n);
      auto flow = analyze_script(*step.run, reg_, so);
      lift_script(job, step, flow, step.run_location, step.run->find('\n') != std::string::npos);
    }
  }

  std::optional<std::string> env_lookup(const JobIR& job, const StepIR* step, const std::string& name) const {
    if (step && step->env.count(name)) return p_ + "env:step:" + step->key + ":" + name;
    if (job.env.count(name)) return p_ + "env:job:" + job.job_id + ":" + name;
    if (ir_.env.count(name)) return p_ + "env:wf:" + name;
    return std::nullopt;
  }

  void lift_script(const JobIR& job, const StepIR& step, const ScriptFlow& flow, const SourceLocation& body_loc,
                   bool block) {
    const auto& K = step.key;
    auto line_loc = [&](std::size_t line) {
      SourceLocation l = body_loc;
      if (l.known() && block) {
        l.line += line;
        l.column = 1;  // script positions are line granular
      }
      l.length = 0;
      return l;
    };
    auto place = [&](NodeAttrs& n) {
      if (n.location.known()) return;
      n.location = body_loc;
      n.location.length = 0;
    };
    std::map<std::string, const SinkHit*> hits;
    for (const auto& h : flow.sink_hits) hits[h.command.name] = &h;
    std::map<std::string, const SourceHit*> sources;
    for (const auto& s : flow.sources) sources[s.source.name] = &s;
    auto& sn = g_.nodes[step_node(K)];
    for (const auto& d : flow.diagnostics) {
      if (std::find(sn.diagnostics.begin(), sn.diagnostics.end(), d) == sn.diagnostics.end()) sn.diagnostics.push_back(d);
    }

    // Returns the node for an entity; empty when it resolves to a pending
    // runtime environment read.
    std::function<std::string(const ScriptEntity&, bool)> node_of = [&](const ScriptEntity& e, bool as_read) {
      using K2 = ScriptEntity::Kind;
      switch (e.kind) {
        case K2::ShellVar: {
          auto& n = ensure(p_ + "var:" + K + "." + e.name, NodeKind::ScriptVar, e.name);
          n.job_id = p_ + job.job_id;
          n.step_key = p_ + K;
          place(n);
          return n.id;
        }
        case K2::Env: {
          if (auto id = env_lookup(job, &step, e.name)) return *id;
          return std::string();
        }
        case K2::File: {
          auto& n = ensure(p_ + "file:" + job.job_id + ":" + e.name, NodeKind::File, e.name);
          n.job_id = p_ + job.job_id;
          n.value = e.name;
          place(n);
          return n.id;
        }
        case K2::GithubOutput: {
          auto sid = step.step_id ? *step.step_id : K;
          auto& n = ensure(p_ + "stepout:" + job.job_id + "." + sid + "." + e.name, NodeKind::StepOutput, e.name);
          n.job_id = p_ + job.job_id;
          n.step_key = p_ + K;
          n.field_name = e.name;
          place(n);
          return n.id;
        }
        case K2::GithubEnv: {
          auto& n = ensure(p_ + "envset:" + K + ":" + e.name, NodeKind::EnvVar, e.name);
          n.job_id = p_ + job.job_id;
          n.step_key = p_ + K;
          n.field_name = e.name;
          n.annotations.insert("github-env-write");
          place(n);
          return n.id;
        }
        case K2::Interpolation: {
          auto& n = ensure(p_ + "expr:" + K + "#" + e.name, NodeKind::Expression, "expr");
          n.job_id = p_ + job.job_id;
          n.step_key = p_ + K;
          place(n);
          return n.id;
        }
        case K2::CommandSource: {
          auto& n = ensure(p_ + "src:" + K + ":" + e.name, NodeKind::RunCommand, "");
          n.job_id = p_ + job.job_id;
          n.step_key = p_ + K;
          n.annotations.insert(kCollabSource);
          if (auto it = sources.find(e.name); it != sources.end()) {
            n.command_text = it->second->command_text;
            n.location = line_loc(it->second->line);
            auto words = split_command_words(n.command_text);
            std::string label;
            for (std::size_t i = 0; i < std::min<std::size_t>(3, words.size()); ++i) label += (i ? " " : "") + words[i];
            n.label = label;
          }
          return n.id;
        }
        case K2::Command: {
          auto& n = ensure(p_ + "cmd:" + K + ":" + e.name, NodeKind::RunCommand, "");
          n.job_id = p_ + job.job_id;
          n.step_key = p_ + K;
          if (auto it = hits.find(e.name); it != hits.end()) {
            const auto* h = it->second;
            n.annotations.insert(kSink);
            n.sink_effect = h->effect;
            n.sink_pattern = h->pattern_id;
            n.command_text = h->command_text;
            n.location = line_loc(h->line);
            n.label = sink_label(*h);
          }
          return n.id;
        }
      }
      (void)as_read;
      return std::string();
    };

    for (const auto& h : flow.sink_hits) node_of(h.command, false);
    for (const auto& w : flow.writes) node_of(w, false);
    for (const auto& [from, to] : flow.edges) {
      auto t = node_of(to, false);
      if (t.empty()) continue;
      if (from.kind == ScriptEntity::Kind::Env) {
        auto f = env_lookup(job, &step, from.name);
        if (f) {
          g_.e_df.insert({*f, t});
        } else {
          ProducerRef r;
          r.kind = ProducerKind::EnvVar;
          r.scope = EnvScope::Runtime;
          r.name = from.name;
          r.path = "env." + from.name;
          r.job = job.job_id;
          g_.pending.push_back({t, r, p_, job.job_id, step.index, true});
        }
        continue;
      }
      auto f = node_of(from, true);
      if (!f.empty()) g_.e_df.insert({f, t});
    }
  }

  std::string sink_label(const SinkHit& h) const {
    for (const auto& c : reg_.taint_spec().p2s_sink_commands) {
      if (c.id == h.pattern_id) return c.prefix;
    }
    return h.command_text;
  }

  void add_expression(const ExpressionRef& e, std::map<std::string, std::size_t>& counters) {
    const JobIR* job = e.job_id.empty() ? nullptr : ir_.find_job(e.job_id);
    const StepIR* step = nullptr;
    if (job && !e.step_key.empty()) {
      auto idx = step_index_of(e.step_key);
      if (idx < job->steps.size()) step = &job->steps[idx];
    }
    ExprScope scope{&ir_, job, step, std::nullopt};
    std::string consumer;
    if (step) {
      const auto* script = step->uses ? reg_.script_action(normalize_action_ref(*step->uses)) : nullptr;
      bool script_body = script && (e.role == FieldRole::WithValue || e.role == FieldRole::PromptInput) &&
                         e.field_name == script->input;
      if (e.role == FieldRole::EnvValue) {
        consumer = p_ + "env:step:" + step->key + ":" + e.field_name;
        scope.inside_env_of = EnvScope::Step;
      } else if (e.role == FieldRole::RunBody || script_body) {
        if (!opt_.script_analysis) return;
        auto i = counters[step->key]++;
        consumer = p_ + "expr:" + step->key + "#" + std::to_string(i);
        auto& n = ensure(consumer, NodeKind::Expression, e.raw);
        n.label = e.raw;
        n.expression_text = e.raw;
        n.location = e.location;
        n.job_id = p_ + job->job_id;
        n.step_key = p_ + step->key;
      } else if (e.role == FieldRole::WithValue || e.role == FieldRole::PromptInput) {
        consumer = p_ + "in:" + step->key + "." + e.field_name;
      } else {
        return;
      }
    } else if (job) {
      if (e.role == FieldRole::EnvValue) {
        consumer = p_ + "env:job:" + job->job_id + ":" + e.field_name;
        scope.inside_env_of = EnvScope::Job;
      } else if (e.role == FieldRole::WithValue) {
        consumer = p_ + "in:" + job->job_id + "." + e.field_name;
      } else {
        return;
      }
    } else if (e.role == FieldRole::EnvValue) {
      consumer = p_ + "env:wf:" + e.field_name;
      scope.inside_env_of = EnvScope::Workflow;
    } else {
      return;
    }
    if (!g_.has_node(consumer)) return;
    auto& cn = g_.nodes[consumer];
    if (cn.expression_text.empty()) cn.expression_text = e.raw;
    for (const auto& r : resolve_raw(e.raw, scope)) {
      switch (r.kind) {
        case ProducerKind::EventContext: {
          auto path = r.serialized ? "toJson(" + r.path + ")" : r.path;
          auto& n = ensure("ctx:" + path, NodeKind::EventContext, context_label(r.path));
          n.context_path = path;
          if (r.serialized) n.annotations.insert(kSerialized);
          if (!n.location.known()) n.location = e.location;
          g_.e_df.insert({n.id, consumer});
          break;
        }
        case ProducerKind::EnvVar:
          if (r.scope == EnvScope::Runtime) {
            g_.pending.push_back({consumer, r, p_, job ? job->job_id : std::string(), step ? step->index : 0, step != nullptr});
          } else {
            std::string id = r.scope == EnvScope::Workflow ? p_ + "env:wf:" + r.name
                             : r.scope == EnvScope::Job    ? p_ + "env:job:" + r.job + ":" + r.name
                                                           : p_ + "env:step:" + r.step_key + ":" + r.name;
            if (g_.has_node(id)) g_.e_df.insert({id, consumer});
          }
          break;
        case ProducerKind::WorkflowInput: {
          auto& n = ensure(p_ + "input:" + r.name, NodeKind::WorkflowInput, r.name);
          n.field_name = r.name;
          g_.e_df.insert({n.id, consumer});
          break;
        }
        case ProducerKind::StepOutput:
        case ProducerKind::JobOutput:
          g_.pending.push_back({consumer, r, p_, job ? job->job_id : std::string(), step ? step->index : 0, step != nullptr});
          break;
        case ProducerKind::Vars:
        case ProducerKind::Opaque:
          g_.nodes[consumer].opaque_refs.push_back(r.path);
          break;
      }
    }
  }

  Awdg& g_;
  const WorkflowIR& ir_;
  const ActionRegistry& reg_;
  const GraphOptions& opt_;
  std::string p_;
};

}  // namespace

Awdg build_local(const WorkflowIR& ir, const ActionRegistry& registry, const GraphOptions& options,
                 const std::string& prefix) {
  Awdg g;
  g.workflow_path = ir.path;
  g.trigger_events = ir.trigger_events;
  Builder(g, ir, registry, options, prefix).build();
  return g;
}

namespace {

std::optional<std::string> nearest_env(const WorkflowIR& ir, const JobIR& job, const StepIR* step, const std::string& name,
                                       const std::string& p) {
  if (step && step->env.count(name)) return p + "env:step:" + step->key + ":" + name;
  if (job.env.count(name)) return p + "env:job:" + job.job_id + ":" + name;
  if (ir.env.count(name)) return p + "env:wf:" + name;
  return std::nullopt;
}

class Resolver {
 public:
  Resolver(Awdg& g, const SiblingMap& siblings, const ActionRegistry& reg, const GraphOptions& opt)
      : g_(g), siblings_(siblings), reg_(reg), opt_(opt) {}

  void run(const WorkflowIR& ir, const std::string& p, std::vector<std::string> chain, int depth) {
    std::vector<PendingRef> mine;
    std::vector<PendingRef> rest;
    for (auto& r : g_.pending) (r.prefix == p ? mine : rest).push_back(std::move(r));
    g_.pending = std::move(rest);
    for (const auto& ref : mine) link(ir, p, ref.producer, ref.consumer, ref.job_id, ref.in_step, ref.step_index);

    for (const auto& e : ir.expressions) {
      if (e.role != FieldRole::OutputDecl || e.job_id.empty()) continue;
      const auto* job = ir.find_job(e.job_id);
      if (!job || !g_.has_node(p + "job:" + e.job_id)) continue;
      auto& out = ensure(p + "jobout:" + e.job_id + "." + e.field_name, NodeKind::JobOutput, e.field_name, ir.path);
      out.job_id = p + e.job_id;
      out.field_name = e.field_name;
      out.expression_text = e.raw;
      out.location = e.location;
      for (const auto& r : resolve_raw(e.raw, ExprScope{&ir, job, nullptr, std::nullopt})) {
        link(ir, p, r, out.id, e.job_id, false, 0);
      }
    }

    for (const auto& job : ir.jobs) {
      if (!job.uses || !g_.has_node(p + "job:" + job.job_id)) continue;
      call_job(ir, job, p, chain, depth);
    }
  }

 private:
  NodeAttrs& ensure(const std::string& id, NodeKind kind, const std::string& label, const std::string& path) {
    auto [it, inserted] = g_.nodes.try_emplace(id);
    if (inserted) {
      it->second.id = id;
      it->second.kind = kind;
      it->second.label = label;
      it->second.workflow_path = path;
    }
    return it->second;
  }

  void bridge(const std::string& from, const std::string& to) {
    if (!opt_.workflow_bridges) return;
    g_.e_df.insert({from, to});
    g_.cross_boundary.insert({from, to});
  }

  void link(const WorkflowIR& ir, const std::string& p, const ProducerRef& r, const std::string& consumer,
            const std::string& job_id, bool in_step, std::size_t step_index) {
    switch (r.kind) {
      case ProducerKind::StepOutput: {
        const auto* step = ir.find_step(job_id, r.step_id);
        if (!step) {
          g_.nodes[consumer].opaque_refs.push_back(r.path);
          return;
        }
        auto& so = ensure(p + "stepout:" + job_id + "." + r.step_id + "." + r.name, NodeKind::StepOutput, r.name, ir.path);
        so.job_id = p + job_id;
        so.step_key = p + step->key;
        so.field_name = r.name;
        if (step->uses) {
          auto& out = ensure(p + "out:" + step->key + "." + r.name, NodeKind::ActionOutput, r.name, ir.path);
          out.job_id = p + job_id;
          out.step_key = p + step->key;
          out.field_name = r.name;
          out.action_ref = normalize_action_ref(*step->uses);
          out.invocation = p + "step:" + step->key;
          out.location = step->location;
          bridge(out.id, so.id);
        }
        bridge(so.id, consumer);
        return;
      }
      case ProducerKind::JobOutput: {
        if (!ir.find_job(r.job)) {
          g_.nodes[consumer].opaque_refs.push_back(r.path);
          return;
        }
        auto& jo = ensure(p + "jobout:" + r.job + "." + r.name, NodeKind::JobOutput, r.name, ir.path);
        jo.job_id = p + r.job;
        jo.field_name = r.name;
        bridge(jo.id, consumer);
        return;
      }
      case ProducerKind::EnvVar: {
        if (r.scope != EnvScope::Runtime) {
          std::string id = r.scope == EnvScope::Workflow ? p + "env:wf:" + r.name
                           : r.scope == EnvScope::Job    ? p + "env:job:" + r.job + ":" + r.name
                                                         : p + "env:step:" + r.step_key + ":" + r.name;
          if (g_.has_node(id)) bridge(id, consumer);
          return;
        }
        const auto* job = ir.find_job(job_id);
        if (!job || !in_step) return;
        for (const auto& s : job->steps) {
          if (s.index >= step_index) break;
          auto writer = p + "envset:" + s.key + ":" + r.name;
          if (!g_.has_node(writer)) continue;
          auto& rt = ensure(p + "env:runtime:" + job_id + ":" + r.name, NodeKind::EnvVar, r.name, ir.path);
          rt.job_id = p + job_id;
          rt.field_name = r.name;
          bridge(writer, rt.id);
          bridge(rt.id, consumer);
        }
        return;
      }
      case ProducerKind::EventContext: {
        auto path = r.serialized ? "toJson(" + r.path + ")" : r.path;
        auto label = starts_with(r.path, "github.event.") ? r.path.substr(13)
                     : starts_with(r.path, "github.")     ? r.path.substr(7)
                                                          : r.path;
        auto& n = ensure("ctx:" + path, NodeKind::EventContext, label, ir.path);
        n.context_path = path;
        if (r.serialized) n.annotations.insert(kSerialized);
        bridge(n.id, consumer);
        return;
      }
      case ProducerKind::WorkflowInput: {
        auto& n = ensure(p + "input:" + r.name, NodeKind::WorkflowInput, r.name, ir.path);
        n.field_name = r.name;
        bridge(n.id, consumer);
        return;
      }
      default:
        g_.nodes[consumer].opaque_refs.push_back(r.path);
        return;
    }
  }

  void call_job(const WorkflowIR& ir, const JobIR& job, const std::string& p, std::vector<std::string> chain, int depth) {
    const auto& uses = *job.uses;
    auto caller = p + "job:" + job.job_id;
    const WorkflowIR* callee = nullptr;
    std::string key;
    if (starts_with(uses, "./")) {
      key = uses.substr(2);
      auto at = key.find('@');
      if (at != std::string::npos) key = key.substr(0, at);
      auto it = siblings_.find(key);
      if (it != siblings_.end()) callee = it->second;
    }
    bool cyclic = std::find(chain.begin(), chain.end(), key) != chain.end();
    if (!callee || cyclic || depth >= opt_.max_call_depth) {
      auto& call = ensure(p + "call:" + job.job_id, NodeKind::ReusableCall, uses, ir.path);
      call.job_id = p + job.job_id;
      call.action_ref = uses;
      call.annotations.insert(kOpaque);
      for (const auto& [name, f] : job.with_block) g_.e_df.insert({p + "in:" + job.job_id + "." + name, call.id});
      if (starts_with(uses, "./")) {
        g_.diagnostics.push_back(ir.path + ": reusable workflow " + uses +
                                 (callee ? " not expanded (call depth or cycle)" : " not found in scan tree"));
      }
      return;
    }
    auto cp = p + "call(" + job.job_id + ")/";
    auto sub = build_local(*callee, reg_, opt_, cp);
    for (auto& [id, n] : sub.nodes) g_.nodes.try_emplace(id, std::move(n));
    g_.e_cf.insert(sub.e_cf.begin(), sub.e_cf.end());
    g_.e_df.insert(sub.e_df.begin(), sub.e_df.end());
    for (auto& r : sub.pending) g_.pending.push_back(std::move(r));
    for (auto& d : sub.diagnostics) g_.diagnostics.push_back(std::move(d));
    g_.e_cf.insert({caller, cp + "trigger"});
    chain.push_back(key);
    run(*callee, cp, chain, depth + 1);
    annotate_agentic(g_, *callee, reg_, cp);

    for (const auto& [name, f] : job.with_block) {
      auto& in = ensure(cp + "input:" + name, NodeKind::WorkflowInput, name, callee->path);
      in.field_name = name;
      bridge(p + "in:" + job.job_id + "." + name, in.id);
    }
    for (const auto& e : callee->expressions) {
      if (e.role != FieldRole::OutputDecl || !e.job_id.empty()) continue;
      auto& out = ensure(p + "jobout:" + job.job_id + "." + e.field_name, NodeKind::JobOutput, e.field_name, ir.path);
      out.job_id = p + job.job_id;
      out.field_name = e.field_name;
      for (const auto& r : resolve_raw(e.raw, ExprScope{callee, nullptr, nullptr, std::nullopt})) {
        if (r.kind != ProducerKind::JobOutput) continue;
        auto& jo = ensure(cp + "jobout:" + r.job + "." + r.name, NodeKind::JobOutput, r.name, callee->path);
        jo.job_id = cp + r.job;
        jo.field_name = r.name;
        bridge(jo.id, out.id);
      }
    }
  }

  Awdg& g_;
  const SiblingMap& siblings_;
  const ActionRegistry& reg_;
  const GraphOptions& opt_;
};

bool is_literal_path(const std::string& v) { return !v.empty() && v.find("${{") == std::string::npos; }

void mark_file_sinks(Awdg& g) {
  std::set<std::string> has_out;
  std::map<std::string, bool> script_written;
  for (const auto& [from, to] : g.e_df) {
    has_out.insert(from);
    auto it = g.nodes.find(from);
    if (it != g.nodes.end() && it->second.kind != NodeKind::ActionOutput && !it->second.step_key.empty()) {
      script_written[to] = true;
    }
  }
  for (auto& [id, n] : g.nodes) {
    if (n.kind != NodeKind::File || has_out.count(id) || !script_written.count(id)) continue;
    const auto& path = n.value;
    if (starts_with(path, "/tmp") || starts_with(path, "/dev/") || path.find("RUNNER_TEMP") != std::string::npos) continue;
    n.annotations.insert(kSink);
    n.sink_effect = SinkEffect::FileWrite;
    n.sink_pattern = "file-write";
    n.command_text = "> " + path;
  }
}

std::string dot_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out.push_back(c);
  }
  return out;
}

}  // namespace

void resolve_cross_boundary(Awdg& g, const WorkflowIR& ir, const SiblingMap& siblings, const ActionRegistry& registry,
                            const GraphOptions& options) {
  Resolver(g, siblings, registry, options).run(ir, "", {workflow_key(ir.path)}, 0);
}

void annotate_agentic(Awdg& g, const WorkflowIR& ir, const ActionRegistry& registry, const std::string& p) {
  static const std::regex kEnvRef(R"(\$\{?([A-Za-z_][A-Za-z0-9_]*))");
  auto ensure = [&](const std::string& id, NodeKind kind, const std::string& label) -> NodeAttrs& {
    auto [it, inserted] = g.nodes.try_emplace(id);
    if (inserted) {
      it->second.id = id;
      it->second.kind = kind;
      it->second.label = label;
      it->second.workflow_path = ir.path;
    }
    return it->second;
  };
  for (const auto& job : ir.jobs) {
    for (const auto& step : job.steps) {
      auto sid = p + "step:" + step.key;
      if (!step.uses || !g.has_node(sid)) continue;
      auto ref = normalize_action_ref(*step.uses);
      const auto* spec = registry.lookup(ref);
      if (!spec) continue;
      auto& sn = g.nodes[sid];
      sn.annotations.insert("action:" + std::string(to_string(spec->kind)));
      for (const auto& [field, policy] : spec->guard_fields) {
        auto it = step.with_block.find(field);
        if (it != step.with_block.end()) sn.guard_values[field] = it->second.value;
      }
      for (const auto& [name, f] : step.with_block) {
        auto in = p + "in:" + step.key + "." + name;
        if (!spec->prompt_inputs.count(name) || !g.has_node(in)) continue;
        g.nodes[in].annotations.insert(kPromptBoundary);
        if (spec->prompt_file_inputs.count(name) && is_literal_path(f.value)) {
          std::string path(trim(f.value));
          while (starts_with(path, "./")) path.erase(0, 2);
          auto file = p + "file:" + job.job_id + ":" + path;
          if (g.has_node(file)) g.e_df.insert({file, in});
        }
        for (std::sregex_iterator it(f.value.begin(), f.value.end(), kEnvRef), end; it != end; ++it) {
          if (auto env = nearest_env(ir, job, &step, (*it)[1], p)) g.e_df.insert({*env, in});
        }
      }
      for (const auto& o : spec->derived_outputs) {
        auto& out = ensure(p + "out:" + step.key + "." + o, NodeKind::ActionOutput, o);
        out.annotations.insert(kDerivedOutput);
        out.job_id = p + job.job_id;
        out.step_key = p + step.key;
        out.field_name = o;
        out.action_ref = ref;
        out.invocation = sid;
        if (!out.location.known()) out.location = step.location;
      }
      for (const auto& fi : spec->derived_output_files) {
        auto it = step.with_block.find(fi);
        if (it == step.with_block.end() || !is_literal_path(it->second.value)) continue;
        std::string path(trim(it->second.value));
        while (starts_with(path, "./")) path.erase(0, 2);
        auto& file = ensure(p + "file:" + job.job_id + ":" + path, NodeKind::File, path);
        file.job_id = p + job.job_id;
        file.value = path;
        auto& out = ensure(p + "out:" + step.key + "." + fi, NodeKind::ActionOutput, fi);
        out.annotations.insert(kDerivedOutput);
        out.job_id = p + job.job_id;
        out.step_key = p + step.key;
        out.field_name = fi;
        out.action_ref = ref;
        out.invocation = sid;
        g.e_df.insert({out.id, file.id});
      }
    }
  }
}

Awdg build_awdg(const WorkflowIR& ir, const SiblingMap& siblings, const ActionRegistry& registry,
                const GraphOptions& options) {
  auto g = build_local(ir, registry, options, "");
  resolve_cross_boundary(g, ir, siblings, registry, options);
  annotate_agentic(g, ir, registry, "");
  mark_file_sinks(g);
  g.pending.clear();
  // Nodes with no span of their own (outputs written by actions, runtime env)
  // point at the owning step, else the owning job.
  auto owner_location = [&](const std::string& scoped, const char* kind) -> SourceLocation {
    if (scoped.empty()) return {};
    auto cut = scoped.rfind('/');
    auto prefix = cut == std::string::npos ? std::string() : scoped.substr(0, cut + 1);
    auto it = g.nodes.find(prefix + kind + scoped.substr(prefix.size()));
    return it == g.nodes.end() ? SourceLocation{} : it->second.location;
  };
  for (auto& [id, n] : g.nodes) {
    if (n.location.known()) continue;
    n.location = owner_location(n.step_key, "step:");
    if (!n.location.known()) n.location = owner_location(n.job_id, "job:");
  }
  return g;
}

std::string dump_dot(const Awdg& g) {
  std::ostringstream os;
  os << "digraph awdg {\n  rankdir=LR;\n  node [shape=box, fontsize=10];\n";
  for (const auto& [id, n] : g.nodes) {
    std::string label = std::string(to_string(n.kind)) + "\n" + n.label;
    for (const auto& a : n.annotations) label += "\n[" + a + "]";
    os << "  \"" << dot_escape(id) << "\" [label=\"" << dot_escape(label) << "\"";
    if (n.annotations.count(kPromptBoundary)) os << ", color=red";
    if (n.annotations.count(kDerivedOutput)) os << ", color=orange";
    if (n.annotations.count(kSink)) os << ", color=purple";
    os << "];\n";
  }
  for (const auto& [a, b] : g.e_cf) os << "  \"" << dot_escape(a) << "\" -> \"" << dot_escape(b) << "\" [style=dashed];\n";
  for (const auto& e : g.e_df) {
    os << "  \"" << dot_escape(e.first) << "\" -> \"" << dot_escape(e.second) << "\"";
    if (g.cross_boundary.count(e)) os << " [color=blue]";
    os << ";\n";
  }
  os << "}\n";
  return os.str();
}

}  // namespace awi
