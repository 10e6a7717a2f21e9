#include <CLI11.hpp>

#include <cstdlib>
#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "awi/registry.hpp"
#include "awi/report.hpp"

namespace {

bool matches_fail_on(const std::string& fail_on, const awi::ScanResult& r) {
  if (fail_on == "none") return false;
  for (const auto& f : r.findings) {
    if (fail_on == "any") return true;
    if (fail_on == "p2a" && f.pattern == awi::Pattern::P2A) return true;
    if (fail_on == "p2s" && f.pattern == awi::Pattern::P2S) return true;
  }
  return false;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"awi-scan: finds untrusted-input flows into agent prompts and agent outputs in GitHub Actions workflows"};
  app.require_subcommand(1);

  auto* scan_cmd = app.add_subcommand("scan", "Analyze workflow files or repository directories");
  std::vector<std::string> paths;
  std::string registry_path;
  std::string format = "text";
  std::string fail_on = "any";
  bool dump_ir = false, dump_graph = false, timings = false;
  bool no_bridge = false, no_workflow_bridges = false, no_script = false, no_guards = false;
  unsigned jobs = 0;

  scan_cmd->add_option("paths", paths, "Workflow files or directories")->required()->check(CLI::ExistingPath);
  scan_cmd->add_option("--registry", registry_path, "Action registry YAML (default: $AWI_REGISTRY, then builtin)");
  scan_cmd->add_option("--format", format, "Report format")
      ->check(CLI::IsMember({"text", "json", "sarif"}))
      ->capture_default_str();
  scan_cmd->add_option("--fail-on", fail_on, "Exit 1 when findings of this pattern exist")
      ->check(CLI::IsMember({"none", "p2a", "p2s", "any"}))
      ->capture_default_str();
  scan_cmd->add_flag("--dump-ir", dump_ir, "Print the workflow IR as JSON instead of a report");
  scan_cmd->add_flag("--dump-graph", dump_graph, "Print the dependency graph as DOT instead of a report");
  scan_cmd->add_flag("--no-bridge", no_bridge, "Do not carry taint through model outputs");
  scan_cmd->add_flag("--no-workflow-bridges", no_workflow_bridges,
                     "Do not resolve step, job, env-file or reusable-workflow references");
  scan_cmd->add_flag("--no-script-analysis", no_script, "Treat run: bodies and inline scripts as opaque");
  scan_cmd->add_flag("--no-guards", no_guards, "Report paths even when an effective guard blocks them");
  scan_cmd->add_flag("--timings", timings, "Include per-workflow wall time in JSON output");
  scan_cmd->add_option("--jobs,-j", jobs, "Worker threads (default: hardware concurrency)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    std::optional<awi::ActionRegistry> loaded;
    if (registry_path.empty()) {
      if (const char* env = std::getenv("AWI_REGISTRY"); env && *env) registry_path = env;
    }
    if (!registry_path.empty()) loaded = awi::ActionRegistry::load_file(registry_path);

    awi::ScanOptions options;
    options.registry = loaded ? &*loaded : &awi::ActionRegistry::builtin();
    options.graph.script_analysis = !no_script;
    options.graph.workflow_bridges = !no_workflow_bridges;
    options.engine.bridge = !no_bridge;
    options.reachability.guards = !no_guards;
    options.jobs = jobs ? jobs : std::max(1u, std::thread::hardware_concurrency());
    options.dump_ir = dump_ir;
    options.dump_graph = dump_graph;

    auto result = awi::scan(paths, options);

    if (dump_ir || dump_graph) {
      for (const auto& w : result.workflows) {
        if (dump_ir) std::cout << w.ir_dump << "\n";
        if (dump_graph) std::cout << w.graph_dump;
      }
      for (const auto& d : result.diagnostics) std::cerr << "note: " << d << "\n";
      return 0;
    }

    if (format == "json") {
      std::cout << awi::emit_json(result, {timings});
    } else if (format == "sarif") {
      std::cout << awi::emit_sarif(result);
    } else {
      std::cout << awi::emit_text(result);
    }
    return matches_fail_on(fail_on, result) ? 1 : 0;
  } catch (const std::exception& e) {
    std::cerr << "awi-scan: " << e.what() << "\n";
    return 2;
  }
}
