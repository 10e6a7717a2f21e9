#include <algorithm>
#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "awi/report.hpp"

namespace awi {

namespace fs = std::filesystem;

namespace {

bool is_yaml(const fs::path& p) {
  auto ext = to_lower(p.extension().string());
  return ext == ".yml" || ext == ".yaml";
}

bool under_workflows_dir(const std::string& generic) {
  return generic.find(".github/workflows/") != std::string::npos;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Repository root of a workflow file, used to keep sibling lookup per repo.
std::string repo_root(const std::string& path) {
  auto pos = path.rfind(".github/workflows/");
  return pos == std::string::npos ? fs::path(path).parent_path().generic_string() : path.substr(0, pos);
}

template <typename F>
void parallel_for(std::size_t n, unsigned jobs, F&& fn) {
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < jobs; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace

std::vector<std::string> collect_workflow_files(const std::vector<std::string>& paths) {
  std::set<std::string> out;
  for (const auto& arg : paths) {
    fs::path root(arg);
    if (!fs::exists(root)) throw std::runtime_error("no such file or directory: " + arg);
    if (fs::is_regular_file(root)) {
      out.insert(root.lexically_normal().generic_string());
      continue;
    }
    for (auto it = fs::recursive_directory_iterator(root, fs::directory_options::skip_permission_denied);
         it != fs::recursive_directory_iterator(); ++it) {
      if (!it->is_regular_file() || !is_yaml(it->path())) continue;
      auto p = it->path().lexically_normal().generic_string();
      if (under_workflows_dir(p)) out.insert(p);
    }
  }
  return {out.begin(), out.end()};
}

WorkflowResult analyze_workflow(const WorkflowIR& ir, const SiblingMap& siblings, const ScanOptions& options) {
  const auto& registry = options.registry ? *options.registry : ActionRegistry::builtin();
  auto start = std::chrono::steady_clock::now();
  WorkflowResult r;
  r.path = ir.path;
  auto g = build_awdg(ir, siblings, registry, options.graph);
  auto tg = make_taint_graph(g, registry);
  auto detected = run_engine(tg, options.engine);
  r.dropped_non_agent = detected.dropped_non_agent;
  r.paths = filter(detected.paths, g, registry, options.reachability);
  r.findings = make_findings(r.paths, g);
  r.diagnostics = ir.diagnostics;
  r.diagnostics.insert(r.diagnostics.end(), g.diagnostics.begin(), g.diagnostics.end());
  if (options.dump_ir) r.ir_dump = dump_ir_json(ir);
  if (options.dump_graph) r.graph_dump = dump_dot(g);
  r.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return r;
}

ScanResult scan(const std::vector<std::string>& paths, const ScanOptions& options) {
  const auto& registry = options.registry ? *options.registry : ActionRegistry::builtin();
  auto files = collect_workflow_files(paths);

  std::vector<std::optional<WorkflowIR>> irs(files.size());
  std::vector<std::string> errors(files.size());
  parallel_for(files.size(), options.jobs, [&](std::size_t i) {
    try {
      irs[i] = parse_workflow(read_file(files[i]), files[i], ParseOptions{&registry});
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });

  std::map<std::string, SiblingMap> siblings;
  for (std::size_t i = 0; i < files.size(); ++i) {
    if (irs[i]) siblings[repo_root(files[i])][workflow_key(files[i])] = &*irs[i];
  }

  std::vector<WorkflowResult> results(files.size());
  parallel_for(files.size(), options.jobs, [&](std::size_t i) {
    if (!irs[i]) return;
    results[i] = analyze_workflow(*irs[i], siblings[repo_root(files[i])], options);
  });

  ScanResult out;
  for (std::size_t i = 0; i < files.size(); ++i) {
    if (!irs[i]) {
      out.diagnostics.push_back(files[i] + ": " + errors[i]);
      continue;
    }
    auto& r = results[i];
    for (const auto& d : r.diagnostics) {
      out.diagnostics.push_back(starts_with(d, files[i] + ": ") ? d : files[i] + ": " + d);
    }
    out.findings.insert(out.findings.end(), r.findings.begin(), r.findings.end());
    out.workflows.push_back(std::move(r));
  }
  std::stable_sort(out.findings.begin(), out.findings.end(), [](const Finding& a, const Finding& b) {
    return std::tie(a.workflow_path, a.pattern, a.source.context_path, a.sink.node) <
           std::tie(b.workflow_path, b.pattern, b.source.context_path, b.sink.node);
  });

  out.summary = summarize_findings(out.findings);
  out.summary.workflows_scanned = files.size();
  for (const auto& w : out.workflows) {
    out.summary.dropped_non_agent += w.dropped_non_agent;
    out.summary.wall_ms[w.path] = w.wall_ms;
    for (const auto& p : w.paths) {
      if (p.reported || p.trigger != TriggerReachability::AttackerReachable) continue;
      std::set<std::string> levels;
      for (const auto& v : p.verdicts) {
        if (v.blocking && v.status == GuardStatus::Effective) levels.insert(std::string(to_string(v.level)));
      }
      for (const auto& l : levels) ++out.summary.guarded_paths[l];
    }
  }
  return out;
}

}  // namespace awi
