#pragma once

// Small sh-subset lexer used by the script data-flow analysis.

#include <string>
#include <string_view>
#include <vector>

namespace awi::shell {

struct Word {
  std::string raw;   // as written, quotes included
  std::string text;  // quotes removed; expansions left literal
};

struct Redirect {
  std::string op;  // ">", ">>", "<", "<<", "<<-", "<<<", "&>", ...
  int fd = -1;     // explicit descriptor prefix, -1 when absent
  Word target;
  bool heredoc = false;
  bool heredoc_quoted = false;
  std::string heredoc_body;
};

struct Command {
  std::vector<Word> words;
  std::vector<Redirect> redirects;
};

using Pipeline = std::vector<Command>;

struct LexResult {
  bool complete = true;  // false on an open quote or unbalanced $( )
  std::vector<Pipeline> pipelines;
};

/// Splits one logical line into pipelines of simple commands. Subshell and
/// group delimiters surface as single-word commands "{" and "}".
LexResult parse_line(std::string_view text);

/// Index of the ')' matching the '(' at `open`, skipping quoted text;
/// npos when unbalanced.
std::size_t match_paren(std::string_view s, std::size_t open);

}  // namespace awi::shell
