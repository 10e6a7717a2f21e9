#include "shell_lexer.hpp"

#include <cctype>

namespace awi::shell {

std::size_t match_paren(std::string_view s, std::size_t open) {
  int depth = 0;
  for (std::size_t i = open; i < s.size(); ++i) {
    char c = s[i];
    if (c == '\\') {
      ++i;
    } else if (c == '\'') {
      auto j = s.find('\'', i + 1);
      if (j == std::string_view::npos) return j;
      i = j;
    } else if (c == '"') {
      std::size_t j = i + 1;
      while (j < s.size() && s[j] != '"') j += (s[j] == '\\') ? 2 : 1;
      if (j >= s.size()) return std::string_view::npos;
      i = j;
    } else if (c == '(') {
      ++depth;
    } else if (c == ')') {
      if (--depth == 0) return i;
    }
  }
  return std::string_view::npos;
}

namespace {

struct Token {
  bool is_op = false;
  std::string op;
  Word word;
};

struct Incomplete {};

std::string unescape_double(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\\' && i + 1 < s.size() && std::string_view("$`\"\\\n").find(s[i + 1]) != std::string_view::npos) {
      out.push_back(s[++i]);
    } else {
      out.push_back(s[i]);
    }
  }
  return out;
}

std::vector<Token> tokenize(std::string_view s) {
  std::vector<Token> toks;
  Word cur;
  bool have = false;
  auto flush = [&] {
    if (have) toks.push_back({false, {}, cur});
    cur = {};
    have = false;
  };
  auto add = [&](std::string_view raw, std::string_view text) {
    cur.raw.append(raw);
    cur.text.append(text);
    have = true;
  };
  static const char* kOps[] = {"&>>", "<<<", "<<-", "&&", "||", ";;", "|&", ">>", "&>", ">&", "<<", "<&", "<>", ">|",
                               "|",   "&",   ";",   "<",  ">",  "(",  ")"};
  std::size_t i = 0;
  while (i < s.size()) {
    char c = s[i];
    if (c == ' ' || c == '\t' || c == '\r') {
      flush();
      ++i;
    } else if (c == '\n') {
      flush();
      toks.push_back({true, ";", {}});
      ++i;
    } else if (c == '#' && !have) {
      while (i < s.size() && s[i] != '\n') ++i;
    } else if (c == '\\') {
      if (i + 1 < s.size()) {
        add(s.substr(i, 2), s.substr(i + 1, 1));
        i += 2;
      } else {
        ++i;
      }
    } else if (c == '\'') {
      auto j = s.find('\'', i + 1);
      if (j == std::string_view::npos) throw Incomplete{};
      add(s.substr(i, j + 1 - i), s.substr(i + 1, j - i - 1));
      i = j + 1;
    } else if (c == '"') {
      std::size_t j = i + 1;
      while (j < s.size() && s[j] != '"') {
        if (s[j] == '\\') {
          j += 2;
        } else if (s[j] == '$' && j + 1 < s.size() && s[j + 1] == '(') {
          auto k = match_paren(s, j + 1);
          if (k == std::string_view::npos) throw Incomplete{};
          j = k + 1;
        } else if (s[j] == '`') {
          auto k = s.find('`', j + 1);
          if (k == std::string_view::npos) throw Incomplete{};
          j = k + 1;
        } else {
          ++j;
        }
      }
      if (j >= s.size()) throw Incomplete{};
      add(s.substr(i, j + 1 - i), unescape_double(s.substr(i + 1, j - i - 1)));
      i = j + 1;
    } else if (c == '$' && i + 1 < s.size() && s[i + 1] == '(') {
      auto k = match_paren(s, i + 1);
      if (k == std::string_view::npos) throw Incomplete{};
      add(s.substr(i, k + 1 - i), s.substr(i, k + 1 - i));
      i = k + 1;
    } else if (c == '$' && i + 1 < s.size() && s[i + 1] == '{') {
      auto k = s.find('}', i);
      if (k == std::string_view::npos) throw Incomplete{};
      add(s.substr(i, k + 1 - i), s.substr(i, k + 1 - i));
      i = k + 1;
    } else if (c == '`') {
      auto k = s.find('`', i + 1);
      if (k == std::string_view::npos) throw Incomplete{};
      add(s.substr(i, k + 1 - i), s.substr(i, k + 1 - i));
      i = k + 1;
    } else if (std::string_view("|&;<>()").find(c) != std::string_view::npos) {
      std::string fd;
      if (have && (c == '<' || c == '>') && cur.raw == cur.text && !cur.text.empty() &&
          cur.text.find_first_not_of("0123456789") == std::string::npos) {
        fd = cur.text;
        cur = {};
        have = false;
      }
      flush();
      for (const char* op : kOps) {
        std::string_view o(op);
        if (s.substr(i, o.size()) == o) {
          toks.push_back({true, fd + std::string(o), {}});
          i += o.size();
          break;
        }
      }
    } else {
      add(s.substr(i, 1), s.substr(i, 1));
      ++i;
    }
  }
  flush();
  return toks;
}

bool is_redirect_op(std::string_view op) {
  auto p = op.find_first_not_of("0123456789");
  if (p == std::string_view::npos) return false;
  auto base = op.substr(p);
  return base == ">" || base == ">>" || base == "<" || base == "<<" || base == "<<-" || base == "<<<" || base == "&>" ||
         base == "&>>" || base == ">&" || base == "<&" || base == "<>" || base == ">|";
}

}  // namespace

LexResult parse_line(std::string_view text) {
  LexResult result;
  std::vector<Token> toks;
  try {
    toks = tokenize(text);
  } catch (const Incomplete&) {
    result.complete = false;
    return result;
  }
  Pipeline pipe;
  Command cmd;
  Redirect* pending = nullptr;
  auto finish_cmd = [&] {
    if (!cmd.words.empty() || !cmd.redirects.empty()) pipe.push_back(std::move(cmd));
    cmd = {};
    pending = nullptr;
  };
  auto finish_pipe = [&] {
    finish_cmd();
    if (!pipe.empty()) result.pipelines.push_back(std::move(pipe));
    pipe = {};
  };
  for (auto& t : toks) {
    if (!t.is_op) {
      if (pending) {
        pending->target = std::move(t.word);
        if (pending->heredoc) {
          const auto& raw = pending->target.raw;
          pending->heredoc_quoted = raw.find_first_of("'\"\\") != std::string::npos;
        }
        pending = nullptr;
      } else {
        cmd.words.push_back(std::move(t.word));
      }
      continue;
    }
    const auto& op = t.op;
    if (is_redirect_op(op)) {
      Redirect r;
      auto p = op.find_first_not_of("0123456789");
      if (p > 0) r.fd = std::stoi(op.substr(0, p));
      r.op = op.substr(p);
      r.heredoc = r.op == "<<" || r.op == "<<-";
      cmd.redirects.push_back(std::move(r));
      pending = &cmd.redirects.back();
    } else if (op == "|" || op == "|&") {
      finish_cmd();
    } else if (op == "(") {
      finish_pipe();
      result.pipelines.push_back({Command{{Word{"{", "{"}}, {}}});
    } else if (op == ")") {
      finish_pipe();
      cmd.words.push_back(Word{"}", "}"});
    } else {
      finish_pipe();
    }
  }
  finish_pipe();
  return result;
}

}  // namespace awi::shell
