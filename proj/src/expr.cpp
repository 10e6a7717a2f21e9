#include "awi/expr.hpp"

#include <algorithm>
#include <cctype>
#include <set>

namespace awi {

std::string ExprAst::dotted() const {
  std::string out;
  for (const auto& s : segments) {
    if (!out.empty()) out += '.';
    out += s;
  }
  return out;
}

std::string_view to_string(ProducerKind k) {
  switch (k) {
    case ProducerKind::EventContext: return "EventContext";
    case ProducerKind::StepOutput: return "StepOutput";
    case ProducerKind::JobOutput: return "JobOutput";
    case ProducerKind::EnvVar: return "EnvVar";
    case ProducerKind::WorkflowInput: return "WorkflowInput";
    case ProducerKind::Vars: return "Vars";
    case ProducerKind::Opaque: return "Opaque";
  }
  return "Opaque";
}

std::string_view to_string(EnvScope s) {
  switch (s) {
    case EnvScope::Workflow: return "workflow";
    case EnvScope::Job: return "job";
    case EnvScope::Step: return "step";
    case EnvScope::Runtime: return "runtime";
  }
  return "runtime";
}

namespace {

enum class Tok { Ident, String, Number, Op, Dot, Star, LBrack, RBrack, LParen, RParen, Comma, End };

struct Token {
  Tok kind;
  std::string text;
};

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-'; }

std::vector<Token> tokenize(std::string_view s) {
  std::vector<Token> out;
  int depth_paren = 0;
  int depth_brack = 0;
  std::size_t i = 0;
  while (i < s.size()) {
    char c = s[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    if (c == '\'') {
      std::string lit;
      ++i;
      bool closed = false;
      while (i < s.size()) {
        if (s[i] == '\'') {
          if (i + 1 < s.size() && s[i + 1] == '\'') {
            lit += '\'';
            i += 2;
            continue;
          }
          closed = true;
          ++i;
          break;
        }
        lit += s[i++];
      }
      if (!closed) throw ExprError("unterminated string literal in expression: " + std::string(s));
      out.push_back({Tok::String, lit});
      continue;
    }
    // A dot directly followed by a digit after a non-identifier is a number
    // like .5; segments such as `commits.0` are handled below.
    if (std::isdigit(static_cast<unsigned char>(c)) && (out.empty() || out.back().kind != Tok::Dot)) {
      std::size_t j = i;
      while (j < s.size() && (std::isalnum(static_cast<unsigned char>(s[j])) || s[j] == '.')) ++j;
      out.push_back({Tok::Number, std::string(s.substr(i, j - i))});
      i = j;
      continue;
    }
    if (ident_start(c) || std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t j = i;
      while (j < s.size() && ident_char(s[j])) ++j;
      out.push_back({Tok::Ident, std::string(s.substr(i, j - i))});
      i = j;
      continue;
    }
    auto two = s.substr(i, 2);
    if (two == "&&" || two == "||" || two == "==" || two == "!=" || two == "<=" || two == ">=") {
      out.push_back({Tok::Op, std::string(two)});
      i += 2;
      continue;
    }
    switch (c) {
      case '!': case '<': case '>': out.push_back({Tok::Op, std::string(1, c)}); break;
      case '.': out.push_back({Tok::Dot, "."}); break;
      case '*': out.push_back({Tok::Star, "*"}); break;
      case '[': ++depth_brack; out.push_back({Tok::LBrack, "["}); break;
      case ']': --depth_brack; out.push_back({Tok::RBrack, "]"}); break;
      case '(': ++depth_paren; out.push_back({Tok::LParen, "("}); break;
      case ')': --depth_paren; out.push_back({Tok::RParen, ")"}); break;
      case ',': out.push_back({Tok::Comma, ","}); break;
      default: out.push_back({Tok::Op, std::string(1, c)}); break;  // unknown; parser turns it Opaque
    }
    if (depth_paren < 0 || depth_brack < 0) throw ExprError("unbalanced brackets in expression: " + std::string(s));
    ++i;
  }
  if (depth_paren != 0 || depth_brack != 0) throw ExprError("unbalanced brackets in expression: " + std::string(s));
  out.push_back({Tok::End, ""});
  return out;
}

struct SyntaxFail {};

class Parser {
 public:
  explicit Parser(const std::vector<Token>& toks) : t_(toks) {}

  ExprAst parse() {
    auto e = parse_or();
    if (peek().kind != Tok::End) throw SyntaxFail{};
    return e;
  }

 private:
  const Token& peek() const { return t_[pos_]; }
  const Token& next() { return t_[pos_++]; }
  bool accept_op(std::string_view op) {
    if (peek().kind == Tok::Op && peek().text == op) {
      ++pos_;
      return true;
    }
    return false;
  }
  void expect(Tok k) {
    if (peek().kind != k) throw SyntaxFail{};
    ++pos_;
  }

  static ExprAst binary(std::string op, ExprAst l, ExprAst r) {
    ExprAst n;
    n.kind = ExprAst::Kind::BinaryOp;
    n.text = std::move(op);
    n.children.push_back(std::move(l));
    n.children.push_back(std::move(r));
    return n;
  }

  ExprAst parse_or() {
    auto l = parse_and();
    while (accept_op("||")) l = binary("||", std::move(l), parse_and());
    return l;
  }
  ExprAst parse_and() {
    auto l = parse_eq();
    while (accept_op("&&")) l = binary("&&", std::move(l), parse_eq());
    return l;
  }
  ExprAst parse_eq() {
    auto l = parse_cmp();
    for (;;) {
      if (accept_op("==")) {
        l = binary("==", std::move(l), parse_cmp());
      } else if (accept_op("!=")) {
        l = binary("!=", std::move(l), parse_cmp());
      } else {
        return l;
      }
    }
  }
  ExprAst parse_cmp() {
    auto l = parse_unary();
    for (const char* op : {"<=", ">=", "<", ">"}) {
      if (accept_op(op)) return binary(op, std::move(l), parse_unary());
    }
    return l;
  }
  ExprAst parse_unary() {
    if (accept_op("!")) {
      ExprAst n;
      n.kind = ExprAst::Kind::UnaryOp;
      n.text = "!";
      n.children.push_back(parse_unary());
      return n;
    }
    return parse_postfix();
  }

  ExprAst parse_postfix() {
    auto base = parse_primary();
    for (;;) {
      if (peek().kind == Tok::Dot) {
        ++pos_;
        std::string seg;
        if (peek().kind == Tok::Ident || peek().kind == Tok::Number) {
          seg = next().text;
        } else if (peek().kind == Tok::Star) {
          ++pos_;
          seg = "*";
        } else {
          throw SyntaxFail{};
        }
        append_segment(base, seg);
      } else if (peek().kind == Tok::LBrack) {
        ++pos_;
        auto idx = parse_or();
        expect(Tok::RBrack);
        if (base.kind == ExprAst::Kind::ContextPath && idx.kind == ExprAst::Kind::Literal) {
          base.segments.push_back(idx.text);
        } else {
          ExprAst n;
          n.kind = ExprAst::Kind::Index;
          n.children.push_back(std::move(base));
          n.children.push_back(std::move(idx));
          base = std::move(n);
        }
      } else {
        return base;
      }
    }
  }

  static void append_segment(ExprAst& base, const std::string& seg) {
    if (base.kind == ExprAst::Kind::ContextPath) {
      base.segments.push_back(seg);
      return;
    }
    // Member access on a call result or index: keep the base reads.
    ExprAst lit;
    lit.kind = ExprAst::Kind::Literal;
    lit.text = seg;
    ExprAst n;
    n.kind = ExprAst::Kind::Index;
    n.children.push_back(std::move(base));
    n.children.push_back(std::move(lit));
    base = std::move(n);
  }

  ExprAst parse_primary() {
    const auto& tok = next();
    ExprAst n;
    switch (tok.kind) {
      case Tok::String:
        n.kind = ExprAst::Kind::Literal;
        n.text = tok.text;
        return n;
      case Tok::Number:
        n.kind = ExprAst::Kind::Literal;
        n.text = tok.text;
        return n;
      case Tok::LParen: {
        auto inner = parse_or();
        expect(Tok::RParen);
        return inner;
      }
      case Tok::Ident: {
        if (tok.text == "true" || tok.text == "false" || tok.text == "null") {
          n.kind = ExprAst::Kind::Literal;
          n.text = tok.text;
          return n;
        }
        if (peek().kind == Tok::LParen) {
          ++pos_;
          n.kind = ExprAst::Kind::Call;
          n.text = tok.text;
          if (peek().kind != Tok::RParen) {
            n.children.push_back(parse_or());
            while (peek().kind == Tok::Comma) {
              ++pos_;
              n.children.push_back(parse_or());
            }
          }
          expect(Tok::RParen);
          return n;
        }
        n.kind = ExprAst::Kind::ContextPath;
        n.segments.push_back(tok.text);
        return n;
      }
      case Tok::Op:
        if (tok.text == "-" && peek().kind == Tok::Number) {
          n.kind = ExprAst::Kind::Literal;
          n.text = "-" + next().text;
          return n;
        }
        throw SyntaxFail{};
      default:
        throw SyntaxFail{};
    }
  }

  const std::vector<Token>& t_;
  std::size_t pos_ = 0;
};

// Recovers the context paths from a token stream the grammar rejected.
std::vector<ExprAst> scavenge_paths(const std::vector<Token>& toks) {
  std::vector<ExprAst> out;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    if (toks[i].kind != Tok::Ident) continue;
    if (i > 0 && toks[i - 1].kind == Tok::Dot) continue;
    const auto& word = toks[i].text;
    if (word == "true" || word == "false" || word == "null") continue;
    if (i + 1 < toks.size() && toks[i + 1].kind == Tok::LParen) continue;
    ExprAst p;
    p.kind = ExprAst::Kind::ContextPath;
    p.segments.push_back(word);
    std::size_t j = i + 1;
    for (;;) {
      if (j + 1 < toks.size() && toks[j].kind == Tok::Dot &&
          (toks[j + 1].kind == Tok::Ident || toks[j + 1].kind == Tok::Number || toks[j + 1].kind == Tok::Star)) {
        p.segments.push_back(toks[j + 1].text);
        j += 2;
      } else if (j + 2 < toks.size() && toks[j].kind == Tok::LBrack &&
                 (toks[j + 1].kind == Tok::String || toks[j + 1].kind == Tok::Number) &&
                 toks[j + 2].kind == Tok::RBrack) {
        p.segments.push_back(toks[j + 1].text);
        j += 3;
      } else {
        break;
      }
    }
    i = j - 1;
    out.push_back(std::move(p));
  }
  return out;
}

bool is_constant_call(const std::string& name) {
  static const std::set<std::string> kConst = {"hashfiles", "always", "success", "failure", "cancelled"};
  return kConst.count(to_lower(name)) > 0;
}

ProducerRef lookup_env(const std::string& name, const std::string& path, const ExprScope& scope) {
  ProducerRef r;
  r.kind = ProducerKind::EnvVar;
  r.path = path;
  r.name = name;
  int start = 0;  // 0 = step, 1 = job, 2 = workflow
  if (scope.inside_env_of) {
    switch (*scope.inside_env_of) {
      case EnvScope::Step: start = 1; break;
      case EnvScope::Job: start = 2; break;
      default: start = 3; break;
    }
  }
  if (start <= 0 && scope.step && scope.step->env.count(name)) {
    r.scope = EnvScope::Step;
    r.step_key = scope.step->key;
    if (scope.job) r.job = scope.job->job_id;
    return r;
  }
  if (start <= 1 && scope.job && scope.job->env.count(name)) {
    r.scope = EnvScope::Job;
    r.job = scope.job->job_id;
    return r;
  }
  if (start <= 2 && scope.workflow && scope.workflow->env.count(name)) {
    r.scope = EnvScope::Workflow;
    return r;
  }
  r.scope = EnvScope::Runtime;
  if (scope.job) r.job = scope.job->job_id;
  return r;
}

ProducerRef resolve_path(const ExprAst& p, const ExprScope& scope) {
  const auto& s = p.segments;
  ProducerRef r;
  r.path = p.dotted();
  auto root = to_lower(s[0]);
  if (root == "github") {
    r.kind = ProducerKind::EventContext;
  } else if (root == "steps" && s.size() >= 4 && s[2] == "outputs") {
    r.kind = ProducerKind::StepOutput;
    r.job = scope.job ? scope.job->job_id : std::string();
    r.step_id = s[1];
    r.name = s[3];
  } else if ((root == "needs" || root == "jobs") && s.size() >= 4 && s[2] == "outputs") {
    r.kind = ProducerKind::JobOutput;
    r.job = s[1];
    r.name = s[3];
  } else if (root == "env" && s.size() >= 2) {
    return lookup_env(s[1], r.path, scope);
  } else if (root == "inputs" && s.size() >= 2) {
    r.kind = ProducerKind::WorkflowInput;
    r.name = s[1];
  } else if (root == "vars" && s.size() >= 2) {
    r.kind = ProducerKind::Vars;
    r.name = s[1];
  } else {
    r.kind = ProducerKind::Opaque;
  }
  return r;
}

void collect(const ExprAst& ast, const ExprScope& scope, bool serialized, std::vector<ProducerRef>& out) {
  switch (ast.kind) {
    case ExprAst::Kind::ContextPath: {
      auto r = resolve_path(ast, scope);
      r.serialized = serialized;
      out.push_back(std::move(r));
      return;
    }
    case ExprAst::Kind::Literal:
      return;
    case ExprAst::Kind::Call: {
      if (is_constant_call(ast.text)) return;
      bool ser = serialized || to_lower(ast.text) == "tojson";
      for (const auto& c : ast.children) collect(c, scope, ser, out);
      return;
    }
    default:
      for (const auto& c : ast.children) collect(c, scope, serialized, out);
      return;
  }
}

}  // namespace

ExprAst parse_expr(std::string_view raw) {
  auto toks = tokenize(raw);
  try {
    Parser p(toks);
    return p.parse();
  } catch (const SyntaxFail&) {
    ExprAst n;
    n.kind = ExprAst::Kind::Opaque;
    n.text = std::string(trim(raw));
    n.children = scavenge_paths(toks);
    return n;
  }
}

std::vector<ProducerRef> resolve(const ExprAst& ast, const ExprScope& scope) {
  std::vector<ProducerRef> out;
  collect(ast, scope, false, out);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<ProducerRef> resolve_raw(std::string_view raw, const ExprScope& scope) {
  try {
    return resolve(parse_expr(raw), scope);
  } catch (const ExprError&) {
    ProducerRef r;
    r.kind = ProducerKind::Opaque;
    r.path = std::string(trim(raw));
    return {r};
  }
}

}  // namespace awi
