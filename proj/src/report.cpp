#include "awi/report.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cstdio>
#include <json.hpp>
#include <sstream>
#include <tuple>

namespace awi {

using ojson = nlohmann::ordered_json;

std::string finding_id(const std::string& workflow_path, Pattern pattern, const std::string& source_path,
                       const std::string& sink_id) {
  std::string tuple = workflow_path + '\x1f' + std::string(to_string(pattern)) + '\x1f' + source_path + '\x1f' + sink_id;
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(tuple.data(), tuple.size(), digest, &len, EVP_sha256(), nullptr);
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < 8 && i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

namespace {

std::string source_path_of(const NodeAttrs& n) {
  if (!n.context_path.empty()) return n.context_path;
  if (!n.command_text.empty()) return n.command_text;
  return n.id;
}

std::string file_of(const NodeAttrs& n, const Awdg& g) {
  return n.workflow_path.empty() ? g.workflow_path : n.workflow_path;
}

Finding build_finding(const GuardedPath& primary, const Awdg& g) {
  const auto& rp = primary.path;
  Finding f;
  f.workflow_path = g.workflow_path;
  f.pattern = rp.pattern;
  f.trigger_events = g.trigger_events;
  const auto& src = g.node(rp.source);
  f.source = {rp.source_category, source_path_of(src), src.id, file_of(src, g), src.location};
  const auto& snk = g.node(rp.sink);
  f.sink.kind = rp.sink_kind;
  if (rp.pattern == Pattern::P2S) f.sink.effect = snk.sink_effect;
  f.sink.node = snk.id;
  f.sink.label = snk.label;
  f.sink.file = file_of(snk, g);
  f.sink.location = snk.location;
  if (rp.bridged_action && g.has_node(*rp.bridged_action)) f.bridged_action = g.node(*rp.bridged_action).action_ref;
  std::set<std::string> diags;
  for (std::size_t i = 0; i < rp.nodes.size(); ++i) {
    const auto& n = g.node(rp.nodes[i]);
    PathStep s{n.id, std::string(to_string(n.kind)), n.label, file_of(n, g), n.location,
                i > 0 && rp.bridged_steps.at(i - 1)};
    f.path.push_back(std::move(s));
    diags.insert(n.diagnostics.begin(), n.diagnostics.end());
    if (!n.step_key.empty()) {
      auto slash = n.step_key.rfind('/');
      auto step = slash == std::string::npos ? "step:" + n.step_key
                                             : n.step_key.substr(0, slash + 1) + "step:" + n.step_key.substr(slash + 1);
      if (g.has_node(step)) diags.insert(g.node(step).diagnostics.begin(), g.node(step).diagnostics.end());
    }
    if (!n.opaque_refs.empty()) diags.insert("opaque-hops");
    if (i > 0 && n.kind == NodeKind::RunCommand && g.node(rp.nodes[i - 1]).kind == NodeKind::Expression) {
      diags.insert(n.sink_pattern == "github-script" ? "script-interpolation" : "shell-interpolation");
    }
  }
  f.diagnostics.assign(diags.begin(), diags.end());
  f.guards = primary.verdicts;
  f.id = finding_id(f.workflow_path, f.pattern, f.source.context_path, f.sink.node);
  return f;
}

}  // namespace

std::vector<Finding> make_findings(const std::vector<GuardedPath>& paths, const Awdg& g) {
  std::map<std::pair<Pattern, std::string>, std::vector<const GuardedPath*>> groups;
  for (const auto& p : paths) {
    if (p.reported) groups[{p.path.pattern, p.path.sink}].push_back(&p);
  }
  std::vector<Finding> out;
  for (auto& [key, members] : groups) {
    auto primary = *std::min_element(members.begin(), members.end(), [](const GuardedPath* a, const GuardedPath* b) {
      return std::make_tuple(a->path.nodes.size(), a->path.source) <
             std::make_tuple(b->path.nodes.size(), b->path.source);
    });
    auto f = build_finding(*primary, g);
    std::set<std::string> others;
    for (const auto* m : members) {
      auto sp = source_path_of(g.node(m->path.source));
      if (sp != f.source.context_path) others.insert(sp);
    }
    f.additional_sources.assign(others.begin(), others.end());
    out.push_back(std::move(f));
  }
  std::sort(out.begin(), out.end(), [](const Finding& a, const Finding& b) {
    return std::tie(a.workflow_path, a.pattern, a.source.context_path, a.sink.node) <
           std::tie(b.workflow_path, b.pattern, b.source.context_path, b.sink.node);
  });
  return out;
}

ScanSummary summarize_findings(const std::vector<Finding>& findings) {
  ScanSummary s;
  std::set<std::string> workflows;
  for (const auto& f : findings) {
    workflows.insert(f.workflow_path);
    ++s.by_pattern[std::string(to_string(f.pattern))];
    if (f.sink.effect) ++s.by_sink_effect[std::string(to_string(*f.sink.effect))];
    ++s.by_source_category[std::string(to_string(f.source.category))];
  }
  s.workflows_with_findings = workflows.size();
  return s;
}

std::string render_path(const Finding& f) {
  std::string out;
  const std::string* prev = nullptr;
  for (const auto& s : f.path) {
    if (prev && *prev == s.label && !s.via_bridge) continue;
    if (prev) out += s.via_bridge ? " ⇒(agent)⇒ " : " → ";
    out += s.label;
    prev = &s.label;
  }
  return out;
}

namespace {

std::string where(const std::string& path, const SourceLocation& loc) {
  if (!loc.known()) return path;
  return path + ":" + std::to_string(loc.line) + ":" + std::to_string(loc.column);
}

ojson location_json(const SourceLocation& loc) {
  if (!loc.known()) return nullptr;
  return ojson{{"line", loc.line}, {"column", loc.column}};
}

ojson finding_json(const Finding& f) {
  ojson j;
  j["id"] = f.id;
  j["workflow_path"] = f.workflow_path;
  j["pattern"] = to_string(f.pattern);
  j["source"] = {{"category", to_string(f.source.category)},
                 {"context_path", f.source.context_path},
                 {"node", f.source.node},
                 {"file", f.source.file},
                 {"location", location_json(f.source.location)}};
  j["sink"] = {{"kind", f.sink.kind},
               {"effect", f.sink.effect ? ojson(to_string(*f.sink.effect)) : ojson(nullptr)},
               {"node", f.sink.node},
               {"label", f.sink.label},
               {"file", f.sink.file},
               {"location", location_json(f.sink.location)}};
  j["bridged_action"] = f.bridged_action ? ojson(*f.bridged_action) : ojson(nullptr);
  auto& path = j["path"] = ojson::array();
  for (const auto& s : f.path) {
    path.push_back({{"node", s.node},
                    {"kind", s.kind},
                    {"label", s.label},
                    {"via_bridge", s.via_bridge},
                    {"file", s.file},
                    {"location", location_json(s.location)}});
  }
  auto& guards = j["guards"] = ojson::array();
  for (const auto& v : f.guards) {
    guards.push_back({{"guard_id", v.guard_id},
                      {"level", to_string(v.level)},
                      {"status", to_string(v.status)},
                      {"detail", v.detail},
                      {"blocking", v.blocking},
                      {"location", location_json(v.location)}});
  }
  j["diagnostics"] = f.diagnostics;
  j["additional_sources"] = f.additional_sources;
  j["trigger_events"] = f.trigger_events;
  return j;
}

}  // namespace

std::string emit_text(const ScanResult& result) {
  std::ostringstream os;
  for (const auto& f : result.findings) {
    os << where(f.sink.file, f.sink.location) << ": " << to_string(f.pattern) << " [" << f.id << "] "
       << f.source.context_path << " (" << to_string(f.source.category) << ") reaches " << f.sink.label;
    if (f.sink.effect) os << " (" << to_string(*f.sink.effect) << ")";
    os << "\n  path: " << render_path(f) << "\n";
    if (f.bridged_action) os << "  via: " << *f.bridged_action << "\n";
    os << "  guards:";
    for (const auto& v : f.guards) {
      os << " " << v.guard_id << "=" << to_string(v.status);
      if (!v.detail.empty() && v.guard_id != "none") os << "(" << v.detail << ")";
    }
    os << "\n";
    if (!f.additional_sources.empty()) {
      os << "  also from:";
      for (const auto& s : f.additional_sources) os << " " << s;
      os << "\n";
    }
    if (!f.diagnostics.empty()) {
      os << "  notes:";
      for (const auto& d : f.diagnostics) os << " " << d;
      os << "\n";
    }
  }
  for (const auto& d : result.diagnostics) os << "note: " << d << "\n";
  const auto& s = result.summary;
  auto count = [&](const char* k) {
    auto it = s.by_pattern.find(k);
    return it == s.by_pattern.end() ? std::size_t{0} : it->second;
  };
  os << result.findings.size() << " finding(s) (P2A " << count("P2A") << ", P2S " << count("P2S") << ") in "
     << s.workflows_with_findings << " of " << s.workflows_scanned << " workflow(s)\n";
  return os.str();
}

std::string emit_json(const ScanResult& result, const EmitOptions& options) {
  ojson j;
  j["version"] = kReportVersion;
  auto& findings = j["findings"] = ojson::array();
  for (const auto& f : result.findings) findings.push_back(finding_json(f));
  const auto& s = result.summary;
  ojson summary;
  summary["workflows_scanned"] = s.workflows_scanned;
  summary["workflows_with_findings"] = s.workflows_with_findings;
  summary["by_pattern"] = s.by_pattern;
  summary["by_sink_effect"] = s.by_sink_effect;
  summary["by_source_category"] = s.by_source_category;
  summary["guarded_paths"] = s.guarded_paths;
  summary["dropped_non_agent"] = s.dropped_non_agent;
  if (options.timings) summary["wall_ms"] = s.wall_ms;
  j["summary"] = std::move(summary);
  j["diagnostics"] = result.diagnostics;
  return j.dump(2) + "\n";
}

std::string emit_sarif(const ScanResult& result) {
  ojson rules = ojson::array();
  rules.push_back({{"id", "AWI-P2A"},
                   {"name", "PromptToAgent"},
                   {"shortDescription", {{"text", "Untrusted event content reaches an agent prompt"}}},
                   {"defaultConfiguration", {{"level", "error"}}}});
  rules.push_back({{"id", "AWI-P2S"},
                   {"name", "PromptToScript"},
                   {"shortDescription", {{"text", "Model output derived from untrusted content reaches a privileged step"}}},
                   {"defaultConfiguration", {{"level", "error"}}}});
  auto physical = [](const std::string& uri, const SourceLocation& loc) {
    ojson p{{"artifactLocation", {{"uri", uri}}}};
    if (loc.known()) p["region"] = {{"startLine", loc.line}, {"startColumn", loc.column}};
    return p;
  };
  ojson results = ojson::array();
  for (const auto& f : result.findings) {
    ojson r;
    r["ruleId"] = f.pattern == Pattern::P2A ? "AWI-P2A" : "AWI-P2S";
    r["ruleIndex"] = f.pattern == Pattern::P2A ? 0 : 1;
    r["level"] = "error";
    r["message"] = {{"text", std::string(to_string(f.pattern)) + ": " + render_path(f)}};
    r["locations"] = ojson::array({{{"physicalLocation", physical(f.sink.file, f.sink.location)}}});
    r["partialFingerprints"] = {{"awiFindingId/v1", f.id}};
    ojson steps = ojson::array();
    for (const auto& s : f.path) {
      steps.push_back({{"location",
                        {{"physicalLocation", physical(s.file, s.location)}, {"message", {{"text", s.label}}}}}});
    }
    r["codeFlows"] = ojson::array({{{"threadFlows", ojson::array({{{"locations", steps}}})}}});
    results.push_back(std::move(r));
  }
  ojson run{{"tool", {{"driver", {{"name", "awi-scan"}, {"version", kReportVersion}, {"rules", rules}}}}},
            {"results", results}};
  ojson doc{{"$schema", "https://json.schemastore.org/sarif-2.1.0.json"},
            {"version", "2.1.0"},
            {"runs", ojson::array({run})}};
  return doc.dump(2) + "\n";
}

}  // namespace awi
