#pragma once

#include <map>
#include <string>
#include <vector>

#include "awi/awdg.hpp"
#include "awi/report.hpp"
#include "awi/workflow.hpp"

namespace awi::testing {

std::string fixture_path(const std::string& relative);
std::string corpus_root();
std::string corpus_workflow(const std::string& file_name);
std::string golden_path(const std::string& name);
std::string read_text(const std::string& path);

WorkflowIR parse_fixture(const std::string& file_name);

/// Scans one corpus workflow. Siblings of the corpus are not loaded.
ScanResult scan_workflow(const std::string& file_name, ScanOptions options = {});
/// Scans one corpus workflow with every other corpus file available for
/// reusable-workflow resolution; only findings of `file_name` are kept.
ScanResult scan_in_corpus(const std::string& file_name, ScanOptions options = {});
ScanResult scan_corpus(ScanOptions options = {});

/// Every corpus workflow parsed once, with the sibling map used for
/// reusable-workflow resolution.
struct Corpus {
  std::map<std::string, WorkflowIR> irs;  // by file name
  SiblingMap siblings;

  Corpus();
  const WorkflowIR& ir(const std::string& file_name) const { return irs.at(file_name); }
  Awdg graph(const std::string& file_name, const GraphOptions& options = {}) const;
};

const Corpus& corpus();

std::vector<Finding> of_pattern(const ScanResult& r, Pattern p);

}  // namespace awi::testing
