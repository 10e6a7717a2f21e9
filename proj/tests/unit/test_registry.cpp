#include <doctest.h>

#include <set>
#include <string>

#include "awi/registry.hpp"
#include "fixtures.hpp"

using namespace awi;

namespace {

using Names = std::set<std::string>;

const ActionSpec& spec(const char* ref) {
  const auto* s = ActionRegistry::builtin().lookup(ref);
  REQUIRE_MESSAGE(s != nullptr, ref);
  return *s;
}

}  // namespace

TEST_CASE("normalize_action_ref strips versions and folds case") {
  CHECK(normalize_action_ref("openai/codex-action@v1") == "openai/codex-action");
  CHECK(normalize_action_ref("anthropics/claude-code-action") == "anthropics/claude-code-action");
  CHECK(normalize_action_ref("google-github-actions/run-gemini-cli@v0") == "google-github-actions/run-gemini-cli");
  CHECK(normalize_action_ref("0xJord4n/AIxion@main") == "0xjord4n/aixion");
  auto local = normalize_action_ref("./.github/actions/agent");
  auto docker = normalize_action_ref("docker://alpine:3");
  CHECK(ActionRegistry::builtin().lookup(local) == nullptr);
  CHECK(ActionRegistry::builtin().lookup(docker) == nullptr);
}

TEST_CASE("seed registry reproduces the ten widely adopted actions") {
  struct Row {
    const char* ref;
    ActionKind kind;
    Names prompts;
    Names outputs;
    Names guards;
  };
  const Row rows[] = {
      {"anthropics/claude-code-action", ActionKind::Agentic, {"prompt"}, {"execution_file", "structured_output"},
       {"allowed_bots", "allowed_non_write_users"}},
      {"actions/ai-inference", ActionKind::LlmAssisted, {"prompt", "prompt-file", "system-prompt", "system-prompt-file"},
       {"response", "response-file"}, {}},
      {"openai/codex-action", ActionKind::Agentic, {"prompt", "prompt-file"}, {"final-message", "output-file"},
       {"allow-users", "allow-bots", "allow-bot-users"}},
      {"testdriverai/action", ActionKind::Agentic, {"prompt"}, {"summary", "link", "markdown"}, {}},
      {"google-github-actions/run-gemini-cli", ActionKind::Agentic, {"prompt"}, {"summary"}, {}},
      {"anthropics/claude-code-base-action", ActionKind::Agentic,
       {"prompt", "prompt_file", "system_prompt", "append_system_prompt"}, {"execution_file", "structured_output"}, {}},
      {"austenstone/copilot-cli", ActionKind::Agentic, {"prompt"}, {"logs-path", "session-path"}, {}},
      {"0xjord4n/aixion", ActionKind::LlmAssisted, {"prompt", "system", "system_path", "messages", "content", "content_path"},
       {"text", "save_path"}, {}},
      {"grll/claude-code-action", ActionKind::Agentic, {"custom_instructions", "direct_prompt"}, {"execution_file"}, {}},
      {"mistricky/ccc", ActionKind::LlmAssisted, {"from_tag", "to_ref"}, {"result"}, {}},
  };
  CHECK(ActionRegistry::builtin().actions().size() == 10);
  for (const auto& row : rows) {
    CAPTURE(row.ref);
    const auto& s = spec(row.ref);
    CHECK(s.kind == row.kind);
    CHECK(s.prompt_inputs == row.prompts);
    CHECK(s.derived_outputs == row.outputs);
    Names guards;
    for (const auto& [name, policy] : s.guard_fields) guards.insert(name);
    CHECK(guards == row.guards);
    for (const auto& f : s.prompt_file_inputs) CHECK(s.prompt_inputs.count(f));
  }
  CHECK(ActionRegistry::builtin().lookup("actions/checkout") == nullptr);
}

TEST_CASE("match_source follows the source table") {
  const auto& reg = ActionRegistry::builtin();
  CHECK(reg.match_source("github.event.issue.body") == SourceCategory::Issue);
  CHECK(reg.match_source("github.event.issue.title") == SourceCategory::Issue);
  CHECK(reg.match_source("github.event.comment.body") == SourceCategory::CommentReview);
  CHECK(reg.match_source("github.event.pull_request.head.ref") == SourceCategory::BranchCommit);
  CHECK(reg.match_source("toJson(github.event)") == SourceCategory::SerializedEvent);
  CHECK_FALSE(reg.match_source("github.event.issue.number").has_value());
  CHECK_FALSE(reg.match_source("github.repository").has_value());
}

TEST_CASE("match_source_for_events requires a declaring trigger") {
  const auto& reg = ActionRegistry::builtin();
  CHECK(reg.match_source_for_events("github.event.issue.body", {"issues"}) == SourceCategory::Issue);
  CHECK_FALSE(reg.match_source_for_events("github.event.issue.body", {"workflow_dispatch"}).has_value());
  CHECK(reg.match_source_for_events("github.event.comment.body", {"issue_comment"}) == SourceCategory::CommentReview);
  CHECK(reg.match_source_for_events("toJson(github.event)", {"push"}) == SourceCategory::SerializedEvent);
}

TEST_CASE("classify_guard_value per field policy") {
  const auto& reg = ActionRegistry::builtin();
  CHECK(reg.classify_guard_value("allow-users", "*") == GuardStatus::Permissive);
  CHECK(reg.classify_guard_value("allow-users", "alice,bob") == GuardStatus::Effective);
  CHECK(reg.classify_guard_value("allowed_non_write_users", "") == GuardStatus::Permissive);
  CHECK(reg.classify_guard_value("allow-users", "alice, *") == GuardStatus::Permissive);
  CHECK(reg.classify_guard_value("allow-users", "${{ vars.USERS }}") == GuardStatus::Unknown);
  CHECK(reg.classify_guard_value("allow-bots", "false") == GuardStatus::Effective);
  CHECK(reg.classify_guard_value("allow-bots", "true") == GuardStatus::Permissive);
}

TEST_CASE("sink commands prefer the longest prefix") {
  const auto& reg = ActionRegistry::builtin();
  auto m = reg.classify_sink_command(split_command_words("gh issue edit 12 --add-label bug"));
  REQUIRE(m);
  CHECK(m->pattern_id == "gh-issue-edit");
  CHECK(m->effect == SinkEffect::GithubWriteApi);
  auto push = reg.classify_sink_command(split_command_words("git push origin HEAD"));
  REQUIRE(push);
  CHECK(push->effect == SinkEffect::ShellToolExec);
  CHECK_FALSE(reg.classify_sink_command(split_command_words("gh issue view 12")).has_value());
  CHECK(reg.is_collaboration_read(split_command_words("gh issue view 12 --json body")));
  CHECK(reg.is_collaboration_read(split_command_words("gh api repos/o/r/issues/1/comments")));
  CHECK_FALSE(reg.is_collaboration_read(split_command_words("gh api repos/o/r/releases")));
}

TEST_CASE("registry load is idempotent") {
  auto text = testing::read_text(AWI_SEED_REGISTRY_PATH);
  auto a = ActionRegistry::load_string(text);
  auto b = ActionRegistry::load_string(text);
  CHECK(a == b);
  CHECK(a == ActionRegistry::builtin());
  CHECK(ActionRegistry::load_file(AWI_SEED_REGISTRY_PATH) == a);
}

TEST_CASE("malformed registries are rejected") {
  CHECK_THROWS_AS(ActionRegistry::load_string("actions: []\nextras: 1\n"), RegistryError);
  CHECK_THROWS_AS(ActionRegistry::load_string("actions:\n  - ref: a/b\n    kind: Wizard\n"), RegistryError);
  CHECK_THROWS_AS(ActionRegistry::load_string("actions:\n  - ref: a/b\n    kind: NonLlm\n    prompt_inputs: [p]\n"),
                  RegistryError);
  CHECK_THROWS_AS(ActionRegistry::load_string("- just\n- a list\n"), RegistryError);
  CHECK_THROWS_AS(ActionRegistry::load_file("/nonexistent/registry.yaml"), RegistryError);
  try {
    ActionRegistry::load_string("actions: []\nextras: 1\n");
  } catch (const RegistryError& e) {
    CHECK(std::string(e.what()).find("extras") != std::string::npos);
  }
}
