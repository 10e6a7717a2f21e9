// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit when any
// criterion fails.
#include <algorithm>
#include <chrono>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "awi/report.hpp"
#include "fixtures.hpp"
#include "oracle.hpp"

using namespace awi;
using namespace awi::testing;

namespace {

// Tolerances.
constexpr std::size_t kOracleGraphs = 500;
constexpr std::size_t kOracleMaxNodes = 12;
constexpr std::size_t kMinCorpusWorkflows = 25;
constexpr double kMedianBudgetMs = 50.0;
constexpr int kTimingRounds = 5;

struct Check {
  std::ostringstream why;
  bool ok = true;
  void expect(bool cond, const std::string& msg) {
    if (!cond) {
      if (!ok) why << "; ";
      why << msg;
      ok = false;
    }
  }
};

std::set<std::string> ids(const std::vector<Finding>& fs) {
  std::set<std::string> out;
  for (const auto& f : fs) out.insert(f.id);
  return out;
}

std::set<std::string> all_sources(const Finding& f) {
  std::set<std::string> out{f.source.context_path};
  out.insert(f.additional_sources.begin(), f.additional_sources.end());
  return out;
}

const GuardVerdict* guard(const Finding& f, const std::string& id) {
  for (const auto& v : f.guards)
    if (v.guard_id == id) return &v;
  return nullptr;
}

bool has_diag(const Finding& f, const std::string& d) {
  return std::find(f.diagnostics.begin(), f.diagnostics.end(), d) != f.diagnostics.end();
}

std::vector<std::string> node_ids(const Finding& f) {
  std::vector<std::string> out;
  for (const auto& s : f.path) out.push_back(s.node);
  return out;
}

// Workflow-independent view of a finding, for comparing variants of a file.
std::set<std::string> shape(const std::vector<Finding>& fs) {
  std::set<std::string> out;
  for (const auto& f : fs) {
    std::string s = std::string(to_string(f.pattern)) + "|" + f.source.context_path + "|" + f.sink.node + "|";
    for (const auto& n : node_ids(f)) s += n + ",";
    for (const auto& a : f.additional_sources) s += "+" + a;
    out.insert(s);
  }
  return out;
}

bool crosses_jobs(const Finding& f) {
  return std::any_of(f.path.begin(), f.path.end(), [](const PathStep& s) {
    return s.kind == "JobOutput" || s.kind == "WorkflowInput" || s.node.find('/') != std::string::npos;
  });
}

std::vector<std::string> read_golden(const std::string& name) {
  std::vector<std::string> out;
  std::istringstream in(read_text(golden_path(name)));
  for (std::string l; std::getline(in, l);)
    if (!l.empty()) out.push_back(l);
  return out;
}

Check motivating_example() {
  Check c;
  auto r = scan_in_corpus("issue-labeler.yml");
  auto p2a = of_pattern(r, Pattern::P2A), p2s = of_pattern(r, Pattern::P2S);
  c.expect(r.findings.size() == 2, "expected 2 findings, got " + std::to_string(r.findings.size()));
  c.expect(p2a.size() == 1 && p2s.size() == 1, "expected one finding per pattern");
  const std::set<std::string> sources{"github.event.issue.title", "github.event.issue.body"};
  if (p2a.size() == 1) {
    c.expect(all_sources(p2a[0]) == sources, "P2A sources differ");
    c.expect(p2a[0].sink.node == "in:get-labels#1.prompt", "P2A sink is " + p2a[0].sink.node);
  }
  if (p2s.size() == 1) {
    c.expect(all_sources(p2s[0]) == sources, "P2S sources differ");
    c.expect(p2s[0].sink.label == "gh issue edit", "P2S sink is " + p2s[0].sink.label);
    auto nodes = node_ids(p2s[0]);
    c.expect(std::count(nodes.begin(), nodes.end(), "out:get-labels#1.final-message") == 1,
             "P2S path does not pass final-message");
  }
  for (const auto& f : r.findings) {
    const auto* v = guard(f, "allow-users");
    c.expect(v && v->status == GuardStatus::Permissive, "allow-users verdict is not Permissive");
  }
  return c;
}

Check scheduled_triage() {
  Check c;
  auto p2s = of_pattern(scan_in_corpus("gemini-scheduled-triage.yml"), Pattern::P2S);
  c.expect(p2s.size() == 1, "expected 1 P2S finding, got " + std::to_string(p2s.size()));
  if (p2s.size() != 1) return c;
  const auto& f = p2s[0];
  c.expect(f.source.category == SourceCategory::ScriptCollaborationRead, "source category is not ScriptCollaborationRead");
  c.expect(node_ids(f) == read_golden("scheduled-triage.path"), "path differs from golden: " + render_path(f));
  c.expect(f.sink.label.find("setLabels") != std::string::npos, "sink is " + f.sink.label);
  return c;
}

Check summary_workflow() {
  Check c;
  auto r = scan_in_corpus("summary.yml");
  auto p2s = of_pattern(r, Pattern::P2S);
  c.expect(of_pattern(r, Pattern::P2A).empty(), "unexpected P2A finding");
  c.expect(p2s.size() == 1, "expected 1 P2S finding, got " + std::to_string(p2s.size()));
  if (p2s.size() == 1) {
    c.expect(p2s[0].sink.effect == SinkEffect::GithubWriteApi, "sink effect is not GithubWriteApi");
    c.expect(has_diag(p2s[0], "shell-interpolation"), "shell-interpolation diagnostic missing");
  }
  auto patched = of_pattern(scan_in_corpus("summary-patched.yml"), Pattern::P2S);
  c.expect(patched.size() == 1, "patched variant: expected 1 P2S finding");
  if (patched.size() == 1) {
    c.expect(!has_diag(patched[0], "shell-interpolation"), "patched variant still has shell-interpolation");
  }
  return c;
}

Check guard_variants() {
  Check c;
  for (const char* name : {"issue-labeler-guard-a-association.yml", "issue-labeler-guard-b-actor.yml", "issue-labeler-guard-c-allow-users.yml",
                           "issue-labeler-guard-d-label.yml", "issue-labeler-guard-f-dispatch.yml"}) {
    auto n = scan_in_corpus(name).findings.size();
    c.expect(n == 0, std::string(name) + " has " + std::to_string(n) + " findings");
  }
  auto base = scan_in_corpus("issue-labeler.yml").findings;
  auto e = scan_in_corpus("issue-labeler-guard-e-prompt-only.yml").findings;
  c.expect(!base.empty() && shape(e) == shape(base), "prompt-only variant differs from the baseline");
  return c;
}

Check oracle_equivalence() {
  Check c;
  std::mt19937 rng(0xA11CE);
  std::size_t agree = 0;
  for (std::size_t i = 0; i < kOracleGraphs; ++i) {
    auto tg = random_taint_graph(rng, kOracleMaxNodes);
    auto diff = compare_with_oracle(tg, true);
    if (diff.empty()) {
      ++agree;
    } else if (c.ok) {
      c.expect(false, "graph " + std::to_string(i) + ": " + diff);
    }
  }
  c.expect(agree == kOracleGraphs, std::to_string(agree) + "/" + std::to_string(kOracleGraphs) + " agree");
  return c;
}

Check ablations() {
  Check c;
  auto base = scan_corpus();
  c.expect(base.summary.workflows_scanned >= kMinCorpusWorkflows,
           "corpus has only " + std::to_string(base.summary.workflows_scanned) + " workflows");

  ScanOptions no_bridge;
  no_bridge.engine.bridge = false;
  auto nb = scan_corpus(no_bridge);
  c.expect(of_pattern(nb, Pattern::P2S).empty(), "--no-bridge still reports P2S");
  c.expect(ids(of_pattern(nb, Pattern::P2A)) == ids(of_pattern(base, Pattern::P2A)), "--no-bridge changes P2A");

  ScanOptions no_wb;
  no_wb.graph.workflow_bridges = false;
  auto wb = scan_corpus(no_wb);
  auto crossing = std::count_if(base.findings.begin(), base.findings.end(), crosses_jobs);
  c.expect(crossing > 0, "no cross-job findings in the baseline");
  for (const auto& f : wb.findings) c.expect(!crosses_jobs(f), "--no-workflow-bridges keeps " + f.id);
  auto base_ids = ids(base.findings), wb_ids = ids(wb.findings);
  c.expect(std::includes(base_ids.begin(), base_ids.end(), wb_ids.begin(), wb_ids.end()),
           "--no-workflow-bridges adds findings");

  ScanOptions no_guards;
  no_guards.reachability.guards = false;
  auto ng_ids = ids(scan_corpus(no_guards).findings);
  bool guarded = !base.summary.guarded_paths.empty();
  c.expect(guarded, "no guarded paths in the corpus");
  c.expect(std::includes(ng_ids.begin(), ng_ids.end(), base_ids.begin(), base_ids.end()), "--no-guards drops findings");
  c.expect(!guarded || ng_ids.size() > base_ids.size(), "--no-guards is not a strict superset");
  return c;
}

Check determinism() {
  Check c;
  ScanOptions one, eight;
  one.jobs = 1;
  eight.jobs = 8;
  auto a = emit_json(scan_corpus(one)), b = emit_json(scan_corpus(eight));
  c.expect(a == b, "JSON differs between 1 and 8 workers");
  return c;
}

Check performance(double& median_ms) {
  Check c;
  const auto& reg = ActionRegistry::builtin();
  const auto& corp = corpus();
  std::vector<double> medians;
  for (const auto& [name, ir] : corp.irs) {
    auto text = read_text(ir.path);
    std::vector<double> runs;
    for (int i = 0; i < kTimingRounds; ++i) {
      auto start = std::chrono::steady_clock::now();
      auto parsed = parse_workflow(text, ir.path, ParseOptions{&reg});
      auto r = analyze_workflow(parsed, corp.siblings, {});
      runs.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count());
      (void)r;
    }
    std::nth_element(runs.begin(), runs.begin() + runs.size() / 2, runs.end());
    medians.push_back(runs[runs.size() / 2]);
  }
  std::sort(medians.begin(), medians.end());
  auto n = medians.size();
  median_ms = n == 0 ? 0 : (n % 2 ? medians[n / 2] : (medians[n / 2 - 1] + medians[n / 2]) / 2);
  c.expect(n > 0 && median_ms <= kMedianBudgetMs, "median " + std::to_string(median_ms) + " ms");
  return c;
}

}  // namespace

int main() {
  int failed = 0;
  auto report = [&](int n, const std::string& title, const Check& c, const std::string& info = "") {
    std::cout << (c.ok ? "PASS" : "FAIL") << " " << n << " " << title;
    if (!info.empty()) std::cout << " (" << info << ")";
    if (!c.ok) std::cout << ": " << c.why.str();
    std::cout << "\n";
    failed += !c.ok;
  };
  auto guarded = [&](auto fn) {
    try {
      return fn();
    } catch (const std::exception& e) {
      Check c;
      c.expect(false, std::string("exception: ") + e.what());
      return c;
    }
  };

  report(1, "motivating example: one P2A and one P2S, allow-users Permissive", guarded(motivating_example));
  report(2, "scheduled triage: collaboration-read P2S path matches golden", guarded(scheduled_triage));
  report(3, "inference summary: P2S only; patched variant drops shell-interpolation", guarded(summary_workflow));
  report(4, "guard variants a-d,f silent; prompt-only variant unchanged", guarded(guard_variants));
  report(5, "engine equals brute-force oracle on 500 random graphs", guarded(oracle_equivalence));
  report(6, "ablations: no-bridge, no-workflow-bridges, no-guards", guarded(ablations));
  report(7, "JSON byte-identical with 1 and 8 workers", guarded(determinism));
  double median = 0;
  auto perf = guarded([&] { return performance(median); });
  report(8, "median per-workflow analysis time <= 50 ms", perf, std::to_string(median) + " ms");
  return failed == 0 ? 0 : 1;
}
