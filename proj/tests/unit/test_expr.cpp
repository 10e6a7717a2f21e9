#include <doctest.h>

#include <random>

#include "awi/expr.hpp"
#include "awi/registry.hpp"
#include "fixtures.hpp"

using namespace awi;
using awi::testing::parse_fixture;

namespace {

using Kind = ExprAst::Kind;

WorkflowIR parse_text(const std::string& text) { return parse_workflow(text, "w.yml", {}); }

void context_paths(const ExprAst& a, std::vector<std::string>& out) {
  if (a.kind == Kind::ContextPath) out.push_back(a.dotted());
  for (const auto& c : a.children) context_paths(c, out);
}

std::vector<ProducerRef> strip_serialized(std::vector<ProducerRef> v) {
  for (auto& r : v) r.serialized = false;
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

std::string random_expr(std::mt19937& rng, int depth) {
  static const std::vector<std::string> paths = {
      "github.event.issue.body", "github.event.comment.body", "steps.s.outputs.o", "needs.j.outputs.x",
      "env.A",                   "inputs.i",                  "vars.V",            "matrix.os",
      "github.event.pull_request.head.ref", "secrets.TOKEN"};
  static const std::vector<std::string> lits = {"'x'", "1", "true", "null", "'it''s'"};
  std::uniform_int_distribution<int> pick(0, depth > 3 ? 1 : 6);
  switch (pick(rng)) {
    case 0: return paths[rng() % paths.size()];
    case 1: return lits[rng() % lits.size()];
    case 2: return random_expr(rng, depth + 1) + " && " + random_expr(rng, depth + 1);
    case 3: return random_expr(rng, depth + 1) + " == " + random_expr(rng, depth + 1);
    case 4: return "!(" + random_expr(rng, depth + 1) + ")";
    case 5: return "format('{0} {1}', " + random_expr(rng, depth + 1) + ", " + random_expr(rng, depth + 1) + ")";
    default: return "contains(" + random_expr(rng, depth + 1) + ", " + random_expr(rng, depth + 1) + ")";
  }
}

}  // namespace

TEST_CASE("context paths") {
  auto a = parse_expr("github.event.issue.body");
  CHECK(a.kind == Kind::ContextPath);
  CHECK(a.segments == std::vector<std::string>{"github", "event", "issue", "body"});

  auto n = parse_expr("needs.get-labels.outputs.labels");
  CHECK(n.kind == Kind::ContextPath);
  CHECK(n.segments == std::vector<std::string>{"needs", "get-labels", "outputs", "labels"});

  auto idx = parse_expr("github.event['issue'].title");
  CHECK(idx.kind == Kind::ContextPath);
  CHECK(idx.dotted() == "github.event.issue.title");
}

TEST_CASE("calls, operators and literals") {
  auto t = parse_expr("toJson(github.event)");
  REQUIRE(t.kind == Kind::Call);
  CHECK(t.text == "toJson");
  REQUIRE(t.children.size() == 1);
  CHECK(t.children[0].kind == Kind::ContextPath);
  CHECK(t.children[0].segments == std::vector<std::string>{"github", "event"});

  auto b = parse_expr("github.actor == 'octocat' && !cancelled()");
  REQUIRE(b.kind == Kind::BinaryOp);
  CHECK(b.text == "&&");
  CHECK(b.children[0].kind == Kind::BinaryOp);
  CHECK(b.children[0].children[1].kind == Kind::Literal);
  CHECK(b.children[0].children[1].text == "octocat");
  CHECK(b.children[1].kind == Kind::UnaryOp);

  CHECK(parse_expr("'it''s'").text == "it's");
  CHECK(parse_expr("42").kind == Kind::Literal);
}

TEST_CASE("unsupported syntax is opaque but keeps its paths") {
  auto a = parse_expr("github.event.issue.labels.*.name");
  std::vector<std::string> paths;
  context_paths(a, paths);
  REQUIRE_FALSE(paths.empty());
  CHECK(paths[0].rfind("github.event.issue.labels", 0) == 0);
}

TEST_CASE("tokenization failures raise") {
  CHECK_THROWS_AS(parse_expr("'unterminated"), ExprError);
  CHECK_THROWS_AS(parse_expr("contains(github.event.issue.body, 'x'"), ExprError);
  CHECK_THROWS_AS(parse_expr("(a))"), ExprError);
}

TEST_CASE("resolution in the summary workflow") {
  auto ir = parse_fixture("summary.yml");
  const auto* job = ir.find_job("summary");
  REQUIRE(job);
  const auto* comment = &job->steps[2];
  ExprScope scope{&ir, job, comment, std::nullopt};

  auto out = resolve_raw("steps.inference.outputs.response", scope);
  REQUIRE(out.size() == 1);
  CHECK(out[0].kind == ProducerKind::StepOutput);
  CHECK(out[0].job == "summary");
  CHECK(out[0].step_id == "inference");
  CHECK(out[0].name == "response");

  auto env = resolve_raw("env.RESPONSE", scope);
  REQUIRE(env.size() == 1);
  CHECK(env[0].kind == ProducerKind::EnvVar);
  CHECK(env[0].scope == EnvScope::Step);
  CHECK(env[0].step_key == comment->key);

  auto ev = resolve_raw("github.event.pull_request.head.ref", scope);
  REQUIRE(ev.size() == 1);
  CHECK(ev[0].kind == ProducerKind::EventContext);
  CHECK(ev[0].path == "github.event.pull_request.head.ref");

  auto misc = resolve_raw("inputs.target || vars.MODEL || needs.a.outputs.b", scope);
  REQUIRE(misc.size() == 3);
  CHECK(misc[0].kind == ProducerKind::JobOutput);
  CHECK(misc[1].kind == ProducerKind::WorkflowInput);
  CHECK(misc[2].kind == ProducerKind::Vars);
}

TEST_CASE("env lookup shadows step over job over workflow") {
  auto ir = parse_text(
      "on: push\n"
      "env: {A: w, B: w, C: w}\n"
      "jobs:\n"
      "  j:\n"
      "    env: {A: j, B: j}\n"
      "    steps:\n"
      "      - run: x\n"
      "        env: {A: s, D: '${{ env.A }}'}\n");
  const auto* job = ir.find_job("j");
  ExprScope scope{&ir, job, &job->steps[0], std::nullopt};
  CHECK(resolve_raw("env.A", scope)[0].scope == EnvScope::Step);
  CHECK(resolve_raw("env.B", scope)[0].scope == EnvScope::Job);
  CHECK(resolve_raw("env.C", scope)[0].scope == EnvScope::Workflow);
  CHECK(resolve_raw("env.Z", scope)[0].scope == EnvScope::Runtime);

  // A step env value referring to env.A sees the job-level A.
  ExprScope in_step_env = scope;
  in_step_env.inside_env_of = EnvScope::Step;
  CHECK(resolve_raw("env.A", in_step_env)[0].scope == EnvScope::Job);
  ExprScope in_job_env{&ir, job, nullptr, EnvScope::Job};
  CHECK(resolve_raw("env.A", in_job_env)[0].scope == EnvScope::Workflow);
}

TEST_CASE("constant functions and literals produce nothing") {
  ExprScope none;
  CHECK(resolve_raw("always()", none).empty());
  CHECK(resolve_raw("hashFiles('**/lock')", none).empty());
  CHECK(resolve_raw("'x' == 'y'", none).empty());
}

TEST_CASE("serialization keeps the same producers") {
  std::mt19937 rng(7);
  ExprScope none;
  for (int i = 0; i < 400; ++i) {
    auto raw = random_expr(rng, 0);
    CAPTURE(raw);
    auto plain = resolve_raw(raw, none);
    auto wrapped = resolve_raw("toJson(" + raw + ")", none);
    CHECK(strip_serialized(wrapped) == strip_serialized(plain));
    for (const auto& r : wrapped) CHECK(r.serialized);
  }
}

TEST_CASE("every context path is accounted for") {
  std::mt19937 rng(11);
  ExprScope none;
  for (int i = 0; i < 400; ++i) {
    auto raw = random_expr(rng, 0);
    CAPTURE(raw);
    std::vector<std::string> paths;
    context_paths(parse_expr(raw), paths);
    auto refs = resolve_raw(raw, none);
    for (const auto& p : paths) {
      bool found = std::any_of(refs.begin(), refs.end(), [&](const ProducerRef& r) { return r.path == p; });
      CHECK_MESSAGE(found, p);
    }
  }
}
