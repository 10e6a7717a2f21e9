#include "fixtures.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace awi::testing {

std::string fixture_path(const std::string& relative) { return std::string(AWI_FIXTURE_DIR) + "/" + relative; }

std::string corpus_root() { return fixture_path("corpus"); }

std::string corpus_workflow(const std::string& file_name) {
  return corpus_root() + "/.github/workflows/" + file_name;
}

std::string golden_path(const std::string& name) { return std::string(AWI_GOLDEN_DIR) + "/" + name; }

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

WorkflowIR parse_fixture(const std::string& file_name) {
  auto path = corpus_workflow(file_name);
  return parse_workflow(read_text(path), path, ParseOptions{&ActionRegistry::builtin()});
}

ScanResult scan_workflow(const std::string& file_name, ScanOptions options) {
  return scan({corpus_workflow(file_name)}, options);
}

ScanResult scan_in_corpus(const std::string& file_name, ScanOptions options) {
  auto all = scan({corpus_root()}, options);
  auto path = corpus_workflow(file_name);
  ScanResult out;
  for (const auto& f : all.findings) {
    if (f.workflow_path == path) out.findings.push_back(f);
  }
  for (const auto& w : all.workflows) {
    if (w.path == path) out.workflows.push_back(w);
  }
  out.summary = summarize_findings(out.findings);
  out.summary.workflows_scanned = out.workflows.size();
  return out;
}

ScanResult scan_corpus(ScanOptions options) { return scan({corpus_root()}, options); }

Corpus::Corpus() {
  for (const auto& path : collect_workflow_files({corpus_root()})) {
    auto name = std::filesystem::path(path).filename().string();
    irs.emplace(name, parse_workflow(read_text(path), path, ParseOptions{&ActionRegistry::builtin()}));
  }
  for (const auto& [name, ir] : irs) siblings[workflow_key(ir.path)] = &ir;
}

Awdg Corpus::graph(const std::string& file_name, const GraphOptions& options) const {
  return build_awdg(ir(file_name), siblings, ActionRegistry::builtin(), options);
}

const Corpus& corpus() {
  static const Corpus c;
  return c;
}

std::vector<Finding> of_pattern(const ScanResult& r, Pattern p) {
  std::vector<Finding> out;
  for (const auto& f : r.findings) {
    if (f.pattern == p) out.push_back(f);
  }
  return out;
}

}  // namespace awi::testing
