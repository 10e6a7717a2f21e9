#include <doctest.h>
#include <yaml-cpp/yaml.h>

#include <filesystem>
#include <functional>
#include <regex>

#include "awi/registry.hpp"
#include "awi/report.hpp"
#include "awi/workflow.hpp"
#include "fixtures.hpp"

using namespace awi;
using awi::testing::corpus_root;
using awi::testing::parse_fixture;
using awi::testing::read_text;

namespace {

WorkflowIR parse_text(const std::string& text) {
  return parse_workflow(text, "w.yml", ParseOptions{&ActionRegistry::builtin()});
}

// Counts `${{` in every scalar value, walking the YAML tree independently of
// the parser under test.
std::size_t count_expressions(const YAML::Node& n) {
  static const std::regex open(R"(\$\{\{)");
  switch (n.Type()) {
    case YAML::NodeType::Scalar: {
      const auto& s = n.Scalar();
      return static_cast<std::size_t>(std::distance(std::sregex_iterator(s.begin(), s.end(), open), std::sregex_iterator()));
    }
    case YAML::NodeType::Sequence: {
      std::size_t total = 0;
      for (const auto& c : n) total += count_expressions(c);
      return total;
    }
    case YAML::NodeType::Map: {
      std::size_t total = 0;
      for (const auto& kv : n) total += count_expressions(kv.second);
      return total;
    }
    default:
      return 0;
  }
}

std::vector<std::string> corpus_files() { return collect_workflow_files({corpus_root()}); }

}  // namespace

TEST_CASE("motivating example lifts to two jobs linked by needs") {
  auto ir = parse_fixture("issue-labeler.yml");
  REQUIRE(ir.jobs.size() == 2);
  CHECK(ir.jobs[0].job_id == "get-labels");
  CHECK(ir.jobs[1].job_id == "apply-labels");
  CHECK(ir.jobs[1].needs == std::vector<std::string>{"get-labels"});
  CHECK(ir.trigger_events == std::vector<std::string>{"issues"});
  const auto* codex = ir.find_step("get-labels", "codex");
  REQUIRE(codex);
  CHECK(codex->key == "get-labels#1");
  CHECK(codex->uses == "openai/codex-action@main");
  CHECK(codex->with_block.at("allow-users").value == "*");
}

TEST_CASE("summary workflow lifts to one job with three steps") {
  auto ir = parse_fixture("summary.yml");
  CHECK(ir.trigger_events == std::vector<std::string>{"issues"});
  REQUIRE(ir.jobs.size() == 1);
  REQUIRE(ir.jobs[0].steps.size() == 3);
  const auto* inference = ir.find_step("summary", "inference");
  REQUIRE(inference);
  CHECK(inference->uses == "actions/ai-inference@v1");
  CHECK(ir.jobs[0].permissions.at("issues") == "write");
}

TEST_CASE("minimal workflow with no jobs") {
  auto ir = parse_text("on: push\njobs: {}\n");
  CHECK(ir.trigger_events == std::vector<std::string>{"push"});
  CHECK(ir.jobs.empty());
}

TEST_CASE("trigger forms normalize to the same event list") {
  for (const char* on : {"on: issues\n", "on: [issues]\n", "on:\n  issues:\n    types: [opened]\n"}) {
    CAPTURE(on);
    auto ir = parse_text(std::string(on) + "jobs: {}\n");
    CHECK(ir.trigger_events == std::vector<std::string>{"issues"});
  }
  auto multi = parse_text("on: [push, issues]\njobs: {}\n");
  CHECK(multi.trigger_events.size() == 2);
}

TEST_CASE("prompt expressions are extracted in order with their role") {
  auto ir = parse_fixture("summary.yml");
  std::vector<ExpressionRef> prompt;
  for (const auto& e : ir.expressions) {
    if (e.role == FieldRole::PromptInput) prompt.push_back(e);
  }
  REQUIRE(prompt.size() == 2);
  CHECK(prompt[0].raw == "github.event.issue.title");
  CHECK(prompt[1].raw == "github.event.issue.body");
  CHECK(prompt[0].value_offset < prompt[1].value_offset);
}

TEST_CASE("env value expression role") {
  auto ir = parse_fixture("gemini-scheduled-triage.yml");
  std::size_t hits = 0;
  for (const auto& e : ir.expressions) {
    if (e.raw == "needs.triage.outputs.triaged") {
      ++hits;
      CHECK(e.role == FieldRole::EnvValue);
      CHECK(e.field_name == "TRIAGED");
    }
  }
  CHECK(hits == 1);
}

TEST_CASE("run body without expressions yields none") {
  auto ir = parse_text("on: push\njobs:\n  a:\n    runs-on: x\n    steps:\n      - run: echo hi\n");
  CHECK(ir.expressions.empty());
}

TEST_CASE("expression spans point at the source text") {
  for (const auto& path : corpus_files()) {
    CAPTURE(path);
    auto text = read_text(path);
    auto ir = parse_workflow(text, path, ParseOptions{&ActionRegistry::builtin()});
    for (const auto& e : ir.expressions) {
      CAPTURE(e.ir_path);
      REQUIRE(e.location.known());
      REQUIRE(e.location.offset + e.location.length <= text.size());
      auto span = text.substr(e.location.offset, e.location.length);
      CHECK(span.rfind("${{", 0) == 0);
      CHECK(span.find(e.raw) != std::string::npos);
    }
  }
}

TEST_CASE("expression count matches an independent scalar scan") {
  for (const auto& path : corpus_files()) {
    CAPTURE(path);
    auto ir = parse_fixture(std::filesystem::path(path).filename().string());
    CHECK(ir.expressions.size() == count_expressions(YAML::LoadFile(path)));
  }
}

TEST_CASE("IR dump round-trips") {
  for (const auto& path : corpus_files()) {
    CAPTURE(path);
    auto ir = parse_workflow(read_text(path), path, ParseOptions{&ActionRegistry::builtin()});
    auto dumped = dump_ir_json(ir, false);
    auto again = parse_workflow(dump_ir_json(ir), path, ParseOptions{&ActionRegistry::builtin()});
    CHECK(dump_ir_json(again, false) == dumped);
  }
}

TEST_CASE("structural problems") {
  CHECK_THROWS_AS(parse_text("jobs: {}\n"), ParseError);
  CHECK_THROWS_AS(parse_text("on: push\n"), ParseError);
  CHECK_THROWS_AS(parse_text("on: [push\n"), ParseError);
  CHECK_THROWS_AS(parse_text("- a\n- b\n"), ParseError);

  auto dangling = parse_text("on: push\njobs:\n  a:\n    needs: ghost\n    steps:\n      - run: x\n");
  CHECK_FALSE(dangling.diagnostics.empty());

  auto both = parse_text("on: push\njobs:\n  a:\n    steps:\n      - run: x\n        uses: a/b@v1\n      - name: empty\n");
  CHECK(both.diagnostics.size() >= 2);
}

TEST_CASE("step keys are unique") {
  for (const auto& path : corpus_files()) {
    auto ir = parse_workflow(read_text(path), path, {});
    std::set<std::string> keys;
    for (const auto& j : ir.jobs) {
      for (const auto& s : j.steps) CHECK(keys.insert(s.key).second);
    }
  }
}
