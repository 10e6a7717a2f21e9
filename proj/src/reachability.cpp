#include "awi/reachability.hpp"

#include <algorithm>
#include <deque>
#include <regex>
#include <tuple>

#include "awi/expr.hpp"

namespace awi {

std::string_view to_string(GuardLevel l) {
  return l == GuardLevel::ActionLevel ? "ActionLevel" : "WorkflowLevel";
}

std::string_view to_string(TriggerReachability r) {
  switch (r) {
    case TriggerReachability::AttackerReachable: return "AttackerReachable";
    case TriggerReachability::MaintainerOnly: return "MaintainerOnly";
    case TriggerReachability::Conditional: return "Conditional";
  }
  return "Conditional";
}

namespace {

const std::set<std::string> kAttackerEvents = {
    "issues",         "issue_comment",      "pull_request",          "pull_request_target", "pull_request_review",
    "pull_request_review_comment", "discussion", "discussion_comment", "workflow_run"};

bool human_authored(SourceCategory c) {
  return c == SourceCategory::Issue || c == SourceCategory::PullRequest || c == SourceCategory::CommentReview ||
         c == SourceCategory::BranchCommit;
}

// Splits "call(a)/call(b)/job#1" into the prefix "call(a)/call(b)/" and the rest.
std::pair<std::string, std::string> split_prefix(const std::string& key) {
  auto slash = key.rfind('/');
  if (slash == std::string::npos) return {"", key};
  return {key.substr(0, slash + 1), key.substr(slash + 1)};
}

struct CondResult {
  GuardStatus status = GuardStatus::Unknown;
  std::string id;
};

class ConditionClassifier {
 public:
  ConditionClassifier(const ActionRegistry& registry, bool human) : reg_(registry), human_(human) {}

  CondResult classify(const ExprAst& n) const {
    using K = ExprAst::Kind;
    switch (n.kind) {
      case K::BinaryOp:
        if (n.text == "&&" || n.text == "||") return logical(n);
        if (n.text == "==" || n.text == "!=") return comparison(n);
        return {};
      case K::UnaryOp:
        if (n.text == "!") {
          auto inner = classify(n.children.at(0));
          if (inner.id.empty()) return {};
          return {GuardStatus::Permissive, inner.id};
        }
        return {};
      case K::Call:
        return call(n);
      default:
        return {};
    }
  }

 private:
  CondResult logical(const ExprAst& n) const {
    std::vector<CondResult> parts;
    for (const auto& c : n.children) parts.push_back(classify(c));
    auto first_with = [&](GuardStatus s) -> const CondResult* {
      for (const auto& p : parts) {
        if (p.status == s) return &p;
      }
      return nullptr;
    };
    if (n.text == "&&") {
      if (const auto* e = first_with(GuardStatus::Effective)) return *e;
    } else {
      bool all = std::all_of(parts.begin(), parts.end(),
                             [](const CondResult& p) { return p.status == GuardStatus::Effective; });
      if (all && !parts.empty()) return parts.front();
    }
    if (const auto* p = first_with(GuardStatus::Permissive)) return *p;
    for (const auto& p : parts) {
      if (!p.id.empty()) return {GuardStatus::Unknown, p.id};
    }
    return {};
  }

  const WorkflowGuardPattern* subject(const ExprAst& n) const {
    if (n.kind != ExprAst::Kind::ContextPath) return nullptr;
    auto path = n.dotted();
    for (const auto& p : reg_.taint_spec().workflow_guard_patterns) {
      if (std::regex_search(path, p.subject_regex)) return &p;
    }
    return nullptr;
  }

  static std::vector<std::string> literal_words(const ExprAst& n) {
    std::vector<std::string> out;
    if (n.kind == ExprAst::Kind::Literal) {
      static const std::regex word(R"([A-Za-z_][A-Za-z0-9_\-\[\]]*)");
      for (std::sregex_iterator it(n.text.begin(), n.text.end(), word), end; it != end; ++it) out.push_back(it->str());
    }
    for (const auto& c : n.children) {
      auto more = literal_words(c);
      out.insert(out.end(), more.begin(), more.end());
    }
    return out;
  }

  CondResult membership(const WorkflowGuardPattern& p, const std::vector<std::string>& values) const {
    if (values.empty()) return {GuardStatus::Unknown, p.id};
    for (const auto& v : values) {
      if (!p.trusted.count(to_lower(v))) return {GuardStatus::Permissive, p.id};
    }
    return {GuardStatus::Effective, p.id};
  }

  CondResult positive(const WorkflowGuardPattern& p, const std::vector<std::string>& values) const {
    switch (p.kind) {
      case WorkflowGuardKind::Association:
        return membership(p, values);
      case WorkflowGuardKind::Identity:
      case WorkflowGuardKind::Label:
        return {GuardStatus::Effective, p.id};
      case WorkflowGuardKind::BotType: {
        bool bot = std::any_of(values.begin(), values.end(), [](const std::string& v) { return to_lower(v) == "bot"; });
        if (!bot) return {GuardStatus::Permissive, p.id};
        return {human_ ? GuardStatus::Effective : GuardStatus::Unknown, p.id};
      }
    }
    return {};
  }

  CondResult comparison(const ExprAst& n) const {
    const auto& a = n.children.at(0);
    const auto& b = n.children.at(1);
    const auto* p = subject(a);
    const ExprAst* other = &b;
    if (!p) {
      p = subject(b);
      other = &a;
    }
    if (!p) return {};
    if (n.text == "!=") return {GuardStatus::Permissive, p->id};
    if (other->kind != ExprAst::Kind::Literal) return {GuardStatus::Unknown, p->id};
    return positive(*p, literal_words(*other));
  }

  CondResult call(const ExprAst& n) const {
    auto fn = to_lower(n.text);
    if (fn != "contains" && fn != "startswith" && fn != "endswith") return {};
    for (std::size_t i = 0; i < n.children.size(); ++i) {
      const auto* p = subject(n.children[i]);
      if (!p) continue;
      std::vector<std::string> values;
      for (std::size_t j = 0; j < n.children.size(); ++j) {
        if (j == i) continue;
        auto w = literal_words(n.children[j]);
        values.insert(values.end(), w.begin(), w.end());
      }
      return positive(*p, values);
    }
    return {};
  }

  const ActionRegistry& reg_;
  bool human_;
};

// Job nodes whose `if:` gates `job`: the job itself, everything it needs, and
// for inlined callees the calling job.
std::set<std::string> dominating_jobs(const Awdg& g, const std::string& job) {
  std::map<std::string, std::vector<std::string>> preds;
  for (const auto& [u, v] : g.e_cf) preds[v].push_back(u);
  std::set<std::string> seen{job};
  std::deque<std::string> queue{job};
  while (!queue.empty()) {
    auto v = queue.front();
    queue.pop_front();
    for (const auto& u : preds[v]) {
      if (!g.has_node(u)) continue;
      auto k = g.node(u).kind;
      if (k != NodeKind::Job && k != NodeKind::Trigger) continue;
      if (seen.insert(u).second) queue.push_back(u);
    }
  }
  std::set<std::string> jobs;
  for (const auto& id : seen) {
    if (g.node(id).kind == NodeKind::Job) jobs.insert(id);
  }
  return jobs;
}

std::set<std::string> invocations_on(const RawPath& path, const Awdg& g) {
  std::set<std::string> out;
  for (std::size_t i = 0; i + 1 < path.nodes.size(); ++i) {
    if (!path.bridged_steps.at(i)) continue;
    const auto& id = path.nodes[i + 1];
    if (g.has_node(id) && !g.node(id).invocation.empty()) out.insert(g.node(id).invocation);
  }
  if (path.pattern == Pattern::P2A && g.has_node(path.sink) && !g.node(path.sink).invocation.empty()) {
    out.insert(g.node(path.sink).invocation);
  }
  return out;
}

}  // namespace

TriggerReachability classify_trigger_reachability(const std::vector<std::string>& trigger_events,
                                                  const std::set<SourceCategory>& sources_used) {
  for (const auto& e : trigger_events) {
    if (kAttackerEvents.count(e)) return TriggerReachability::AttackerReachable;
  }
  // Collaboration content is written by outsiders whatever starts the run.
  if (sources_used.count(SourceCategory::ScriptCollaborationRead)) return TriggerReachability::AttackerReachable;
  for (const auto& e : trigger_events) {
    if (e == "workflow_call") return TriggerReachability::Conditional;
  }
  return TriggerReachability::MaintainerOnly;
}

GuardVerdict classify_condition(std::string_view if_cond, const ActionRegistry& registry, bool human_source) {
  GuardVerdict v;
  v.level = GuardLevel::WorkflowLevel;
  v.detail = std::string(trim(if_cond));
  auto expr = condition_expression(if_cond);
  ConditionClassifier classifier(registry, human_source);
  auto r = classifier.classify(parse_expr(expr));
  v.status = r.status;
  v.guard_id = r.id.empty() ? "condition" : r.id;
  return v;
}

std::vector<GuardVerdict> evaluate_workflow_guards(const RawPath& path, const Awdg& g,
                                                   const ActionRegistry& registry) {
  std::set<std::string> gates;
  for (const auto& id : path.nodes) {
    if (!g.has_node(id)) continue;
    const auto& n = g.node(id);
    if (!n.step_key.empty()) {
      auto [prefix, key] = split_prefix(n.step_key);
      gates.insert(prefix + "step:" + key);
    }
    if (!n.job_id.empty()) {
      auto [prefix, job] = split_prefix(n.job_id);
      auto jobs = dominating_jobs(g, prefix + "job:" + job);
      gates.insert(jobs.begin(), jobs.end());
    }
  }
  bool human = human_authored(path.source_category);
  std::vector<GuardVerdict> out;
  for (const auto& id : gates) {
    if (!g.has_node(id)) continue;
    const auto& n = g.node(id);
    if (n.if_cond) {
      auto v = classify_condition(*n.if_cond, registry, human);
      v.location = n.if_location;
      out.push_back(std::move(v));
    }
    if (n.environment) {
      GuardVerdict v;
      v.guard_id = "environment";
      v.level = GuardLevel::WorkflowLevel;
      v.location = n.location;
      v.status = GuardStatus::Unknown;
      v.detail = *n.environment;
      out.push_back(std::move(v));
    }
  }
  if (out.empty()) {
    GuardVerdict v;
    v.guard_id = "none";
    v.status = GuardStatus::Missing;
    v.blocking = false;
    out.push_back(std::move(v));
  }
  return out;
}

std::vector<GuardVerdict> evaluate_action_guards(const RawPath& path, const Awdg& g, const ActionRegistry& registry) {
  std::vector<GuardVerdict> out;
  for (const auto& inv : invocations_on(path, g)) {
    if (!g.has_node(inv)) continue;
    const auto& step = g.node(inv);
    const auto* spec = registry.lookup(step.action_ref);
    bool user_verdict = false;
    if (spec) {
      for (const auto& [field, policy] : spec->guard_fields) {
        GuardVerdict v;
        v.guard_id = field;
        v.level = GuardLevel::ActionLevel;
        v.location = step.location;
        auto it = step.guard_values.find(field);
        if (it != step.guard_values.end()) {
          v.status = registry.classify_guard_value(policy, it->second);
          v.detail = it->second;
          auto in = split_prefix(step.step_key).first + "in:" + split_prefix(step.step_key).second + "." + field;
          if (g.has_node(in) && g.node(in).location.known()) v.location = g.node(in).location;
        } else if (policy.unset) {
          v.status = *policy.unset;
          v.detail = "(unset)";
        } else {
          continue;
        }
        v.blocking = policy.scope == GuardScope::Users;
        user_verdict |= v.blocking;
        out.push_back(std::move(v));
      }
    }
    if (!user_verdict) {
      GuardVerdict v;
      v.guard_id = "none";
      v.level = GuardLevel::ActionLevel;
      v.location = step.location;
      v.status = GuardStatus::Missing;
      v.detail = step.action_ref;
      v.blocking = false;
      out.push_back(std::move(v));
    }
  }
  return out;
}

std::vector<GuardedPath> filter(const std::vector<RawPath>& paths, const Awdg& g, const ActionRegistry& registry,
                                const ReachabilityOptions& options) {
  std::vector<GuardedPath> out;
  for (const auto& p : paths) {
    GuardedPath gp;
    gp.path = p;
    gp.trigger = classify_trigger_reachability(g.trigger_events, {p.source_category});
    gp.verdicts = evaluate_workflow_guards(p, g, registry);
    auto action = evaluate_action_guards(p, g, registry);
    gp.verdicts.insert(gp.verdicts.end(), action.begin(), action.end());
    bool blocked = std::any_of(gp.verdicts.begin(), gp.verdicts.end(), [](const GuardVerdict& v) {
      return v.blocking && v.status == GuardStatus::Effective;
    });
    gp.reported = gp.trigger == TriggerReachability::AttackerReachable && (!options.guards || !blocked);
    out.push_back(std::move(gp));
  }
  return out;
}

}  // namespace awi
