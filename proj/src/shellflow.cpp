#include "awi/shellflow.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <regex>

#include "awi/registry.hpp"
#include "awi/workflow.hpp"
#include "shell_lexer.hpp"

namespace awi {

using Kind = ScriptEntity::Kind;

std::string_view to_string(ScriptEntity::Kind k) {
  switch (k) {
    case Kind::ShellVar: return "ShellVar";
    case Kind::Env: return "Env";
    case Kind::File: return "File";
    case Kind::GithubOutput: return "GithubOutput";
    case Kind::GithubEnv: return "GithubEnv";
    case Kind::Interpolation: return "Interpolation";
    case Kind::CommandSource: return "CommandSource";
    case Kind::Command: return "Command";
  }
  return "ShellVar";
}

double ScriptFlow::coverage() const {
  if (commands_total == 0) return 1.0;
  return static_cast<double>(commands_recognized) / static_cast<double>(commands_total);
}

std::string interpolation_placeholder(std::size_t index) { return "__AWI_EXPR_" + std::to_string(index) + "__"; }

bool is_posix_shell(const std::optional<std::string>& shell) {
  if (!shell) return true;
  auto words = split_command_words(*shell);
  if (words.empty()) return true;
  auto prog = words[0];
  auto slash = prog.rfind('/');
  if (slash != std::string::npos) prog = prog.substr(slash + 1);
  prog = to_lower(prog);
  return prog == "bash" || prog == "sh" || prog == "dash" || prog == "zsh" || prog == "ksh";
}

std::optional<SinkMatch> classify_sink_command(std::string_view command_text, const ActionRegistry& registry) {
  return registry.classify_sink_command(split_command_words(command_text));
}

std::optional<SourceCategory> detect_script_source(std::string_view command_text, const ActionRegistry& registry) {
  if (registry.is_collaboration_read(split_command_words(command_text))) return SourceCategory::ScriptCollaborationRead;
  return std::nullopt;
}

namespace {

const std::string kPlaceholderPrefix = "__AWI_EXPR_";

std::string substitute_expressions(std::string_view body) {
  std::string out;
  std::size_t last = 0;
  std::size_t i = 0;
  for (const auto& span : scan_expressions(body)) {
    out.append(body.substr(last, span.offset - last));
    out += interpolation_placeholder(i++);
    last = span.offset + span.length;
  }
  out.append(body.substr(last));
  return out;
}

// Placeholder indices appearing anywhere in `text`, quoting ignored.
std::set<ScriptEntity> placeholder_reads(std::string_view text) {
  std::set<ScriptEntity> out;
  std::size_t pos = 0;
  while ((pos = text.find(kPlaceholderPrefix, pos)) != std::string_view::npos) {
    auto start = pos + kPlaceholderPrefix.size();
    auto end = start;
    while (end < text.size() && std::isdigit(static_cast<unsigned char>(text[end]))) ++end;
    if (end > start && text.substr(end, 2) == "__") out.insert({Kind::Interpolation, std::string(text.substr(start, end - start))});
    pos = end;
  }
  return out;
}

bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

bool is_assignment(const std::string& text, std::string* name, std::size_t* eq) {
  if (text.empty() || !is_ident_start(text[0])) return false;
  std::size_t i = 1;
  while (i < text.size() && is_ident_char(text[i])) ++i;
  if (i < text.size() && text[i] == '+') ++i;
  if (i >= text.size() || text[i] != '=') return false;
  *name = text.substr(0, text[i - 1] == '+' ? i - 1 : i);
  *eq = i;
  return true;
}

std::string channel_of(const std::string& target) {
  std::string t = target;
  if (t.size() > 3 && t.compare(0, 2, "${") == 0 && t.back() == '}') t = "$" + t.substr(2, t.size() - 3);
  if (t == "$GITHUB_OUTPUT") return "output";
  if (t == "$GITHUB_ENV") return "env";
  if (t == "$GITHUB_STEP_SUMMARY" || t == "$GITHUB_PATH" || t == "$GITHUB_STATE") return "ignore";
  return {};
}

bool is_scratch_path(const std::string& p) {
  return p.empty() || starts_with(p, "/dev/") || starts_with(p, "/tmp") || starts_with(p, "$RUNNER_TEMP") ||
         starts_with(p, "${RUNNER_TEMP}") || p[0] == '&';
}

std::string normalize_path(std::string p) {
  while (starts_with(p, "./")) p.erase(0, 2);
  return p;
}

std::string replace_escaped_newlines(std::string s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\\' && i + 1 < s.size() && s[i + 1] == 'n') {
      out.push_back('\n');
      ++i;
    } else {
      out.push_back(s[i]);
    }
  }
  return out;
}

const std::set<std::string> kSpecialVars = {"GITHUB_OUTPUT", "GITHUB_ENV", "GITHUB_PATH", "GITHUB_STEP_SUMMARY",
                                             "GITHUB_STATE"};
const std::set<std::string> kFileReaders = {"cat", "head", "tail", "jq", "yq", "sed", "awk", "grep", "egrep", "fgrep",
                                            "cut", "sort", "uniq", "base64", "less", "more", "wc", "envsubst"};
const std::set<std::string> kProgramFirst = {"jq", "yq", "sed", "awk", "grep", "egrep", "fgrep"};
const std::set<std::string> kKeywords = {"if", "then", "else", "elif", "do", "while", "until", "!", "time",
                                         "fi", "done", "esac"};
const std::set<std::string> kDeclarers = {"export", "local", "declare", "readonly", "typeset"};
const std::set<std::string> kBenign = {"set", "cd", "exit", "true", "false", "test", "[", "[[", "mkdir", "rm", "cp",
                                       "mv", "sleep", "shift", "return", "break", "continue", "pushd", "popd",
                                       "unset", "trap", "source", ".", "chmod", "touch", "ls", "pwd", "wait"};

struct CommandResult {
  std::set<ScriptEntity> out;
  std::string text;
};

struct Frame {
  std::vector<std::pair<shell::Pipeline, std::size_t>> buffered;
};

class Analyzer {
 public:
  Analyzer(const ActionRegistry& reg, const ScriptOptions& opt) : reg_(reg), opt_(opt) {}

  ScriptFlow run(const std::string& text) {
    std::vector<std::string> lines;
    std::size_t start = 0;
    while (start <= text.size()) {
      auto nl = text.find('\n', start);
      if (nl == std::string::npos) nl = text.size();
      lines.push_back(text.substr(start, nl - start));
      start = nl + 1;
    }
    std::vector<Frame> stack;
    std::size_t i = 0;
    while (i < lines.size()) {
      auto line_no = i + 1;
      std::string logical = lines[i++];
      for (;;) {
        auto t = std::string(trim(logical));
        if (starts_with(t, "#")) t.clear();
        bool cont = !t.empty() && t.back() == '\\' && (t.size() < 2 || t[t.size() - 2] != '\\');
        if (cont && i < lines.size()) {
          logical = logical.substr(0, logical.rfind('\\')) + " " + lines[i++];
          continue;
        }
        if ((t.size() >= 2 && (t.ends_with("&&") || t.ends_with("||"))) || (!t.empty() && t.back() == '|')) {
          if (i < lines.size()) {
            logical += " " + lines[i++];
            continue;
          }
        }
        auto lex = shell::parse_line(logical);
        if (!lex.complete && i < lines.size()) {
          logical += "\n" + lines[i++];
          continue;
        }
        if (!lex.complete) {
          flow_.diagnostics.push_back("unterminated quoting at line " + std::to_string(line_no));
          for (const auto& r : placeholder_reads(logical)) flow_.reads.insert(r);
          break;
        }
        for (auto& p : lex.pipelines) {
          for (auto& c : p) {
            for (auto& r : c.redirects) {
              if (!r.heredoc) continue;
              auto delim = r.target.text;
              std::string body;
              while (i < lines.size()) {
                auto l = lines[i++];
                if (trim(l) == delim) break;
                body += l;
                body += '\n';
              }
              r.heredoc_body = body;
            }
          }
        }
        process(lex.pipelines, stack, line_no, nullptr);
        break;
      }
    }
    while (!stack.empty()) {
      auto frame = std::move(stack.back());
      stack.pop_back();
      for (auto& [p, l] : frame.buffered) {
        if (stack.empty()) {
          run_pipeline(p, l);
        } else {
          stack.back().buffered.emplace_back(std::move(p), l);
        }
      }
    }
    finalize();
    return std::move(flow_);
  }

 private:
  void edge(const ScriptEntity& from, const ScriptEntity& to) {
    flow_.edges.insert({from, to});
    flow_.reads.insert(from);
    flow_.writes.insert(to);
  }

  void edges(const std::set<ScriptEntity>& from, const ScriptEntity& to) {
    flow_.writes.insert(to);
    for (const auto& f : from) edge(f, to);
  }

  void assign(const std::string& name, const std::set<ScriptEntity>& from) {
    assigned_.insert(name);
    edges(from, {Kind::ShellVar, name});
  }

  ScriptEntity command_entity(std::size_t line) {
    auto k = per_line_[line]++;
    auto name = std::to_string(line);
    if (k > 0) name += "." + std::to_string(k);
    return {Kind::Command, name};
  }

  ScriptEntity source_entity(std::size_t line) {
    auto k = per_line_src_[line]++;
    auto name = std::to_string(line);
    if (k > 0) name += "." + std::to_string(k);
    return {Kind::CommandSource, name};
  }

  // Reads performed when `raw` is expanded. With quotes=false the text is a
  // heredoc body, where quote characters are literal.
  std::set<ScriptEntity> expand_reads(std::string_view raw, std::size_t line, bool quotes) {
    std::set<ScriptEntity> out = placeholder_reads(raw);
    bool sq = false;
    bool dq = false;
    std::size_t i = 0;
    while (i < raw.size()) {
      char c = raw[i];
      if (c == '\\' && !sq) {
        i += 2;
      } else if (quotes && c == '\'' && !dq) {
        sq = !sq;
        ++i;
      } else if (quotes && c == '"' && !sq) {
        dq = !dq;
        ++i;
      } else if (sq) {
        ++i;
      } else if (c == '$' && i + 1 < raw.size() && raw[i + 1] == '(') {
        auto k = shell::match_paren(raw, i + 1);
        if (k == std::string_view::npos) break;
        auto inner = raw.substr(i + 2, k - i - 2);
        auto sub = run_text(inner, line);
        out.insert(sub.begin(), sub.end());
        i = k + 1;
      } else if (c == '$' && i + 1 < raw.size() && raw[i + 1] == '{') {
        auto k = raw.find('}', i);
        if (k == std::string_view::npos) break;
        auto inner = raw.substr(i + 2, k - i - 2);
        std::size_t j = 0;
        while (j < inner.size() && (inner[j] == '#' || inner[j] == '!')) ++j;
        auto n0 = j;
        while (j < inner.size() && is_ident_char(inner[j])) ++j;
        read_var(std::string(inner.substr(n0, j - n0)), out);
        if (j < inner.size()) {
          auto rest = expand_reads(inner.substr(j), line, quotes);
          out.insert(rest.begin(), rest.end());
        }
        i = k + 1;
      } else if (c == '$' && i + 1 < raw.size() && is_ident_start(raw[i + 1])) {
        auto j = i + 1;
        while (j < raw.size() && is_ident_char(raw[j])) ++j;
        read_var(std::string(raw.substr(i + 1, j - i - 1)), out);
        i = j;
      } else if (c == '`') {
        auto k = raw.find('`', i + 1);
        if (k == std::string_view::npos) break;
        auto sub = run_text(raw.substr(i + 1, k - i - 1), line);
        out.insert(sub.begin(), sub.end());
        i = k + 1;
      } else {
        ++i;
      }
    }
    return out;
  }

  void read_var(const std::string& name, std::set<ScriptEntity>& out) {
    if (name.empty() || kSpecialVars.count(name)) return;
    // Provisional; finalize() splits into ShellVar and/or Env.
    out.insert({Kind::ShellVar, name});
  }

  std::set<ScriptEntity> run_text(std::string_view text, std::size_t line) {
    auto lex = shell::parse_line(text);
    if (!lex.complete) return placeholder_reads(text);
    std::vector<Frame> stack;
    std::set<ScriptEntity> out;
    process(lex.pipelines, stack, line, &out);
    for (auto it = stack.rbegin(); it != stack.rend(); ++it) {
      for (auto& [p, l] : it->buffered) {
        auto r = run_pipeline(p, l);
        out.insert(r.begin(), r.end());
      }
    }
    return out;
  }

  void process(std::vector<shell::Pipeline>& pipes, std::vector<Frame>& stack, std::size_t line,
               std::set<ScriptEntity>* out) {
    for (auto& p : pipes) {
      auto& first = p.front();
      if (!first.words.empty() && first.words[0].text == "{") {
        stack.emplace_back();
        first.words.erase(first.words.begin());
        if (first.words.empty() && first.redirects.empty() && p.size() == 1) continue;
      }
      if (!first.words.empty() && first.words[0].text == "}") {
        if (stack.empty()) continue;
        auto frame = std::move(stack.back());
        stack.pop_back();
        for (auto& [bp, bl] : frame.buffered) {
          auto& last = bp.back();
          bool has_stdout = false;
          for (const auto& r : last.redirects) {
            if (r.op[0] == '>' && r.fd <= 1) has_stdout = true;
          }
          if (!has_stdout) {
            for (const auto& r : first.redirects) last.redirects.push_back(r);
          }
          if (!stack.empty()) {
            stack.back().buffered.emplace_back(std::move(bp), bl);
          } else {
            auto r = run_pipeline(bp, bl);
            if (out) out->insert(r.begin(), r.end());
          }
        }
        continue;
      }
      if (!stack.empty()) {
        stack.back().buffered.emplace_back(std::move(p), line);
        continue;
      }
      auto r = run_pipeline(p, line);
      if (out) out->insert(r.begin(), r.end());
    }
  }

  std::set<ScriptEntity> run_pipeline(shell::Pipeline& p, std::size_t line) {
    CommandResult prev;
    for (auto& c : p) prev = run_command(c, prev, line);
    return prev.out;
  }

  CommandResult run_command(shell::Command& cmd, const CommandResult& stdin_in, std::size_t line);

  void write_channel(bool output, const std::string& content, const std::set<ScriptEntity>& reads);

  void finalize();

  const ActionRegistry& reg_;
  const ScriptOptions& opt_;
  ScriptFlow flow_;
  std::set<std::string> assigned_;
  std::set<std::string> read_targets_;
  std::set<ScriptEntity> loop_inputs_;
  std::map<std::size_t, int> per_line_;
  std::map<std::size_t, int> per_line_src_;
  std::optional<std::pair<std::string, std::string>> open_output_;  // key, delimiter
  std::optional<std::pair<std::string, std::string>> open_env_;
};


CommandResult Analyzer::run_command(shell::Command& cmd, const CommandResult& stdin_in, std::size_t line) {
  CommandResult res;
  auto& words = cmd.words;
  while (!words.empty() && kKeywords.count(words[0].raw)) words.erase(words.begin());

  // Redirects that feed the command, shared by every form below.
  std::set<ScriptEntity> input = stdin_in.out;
  std::string input_text = stdin_in.text;
  for (const auto& r : cmd.redirects) {
    if (r.heredoc) {
      auto reads = r.heredoc_quoted ? placeholder_reads(r.heredoc_body) : expand_reads(r.heredoc_body, line, false);
      input.insert(reads.begin(), reads.end());
      input_text = r.heredoc_body;
    } else if (r.op == "<<<") {
      auto reads = expand_reads(r.target.raw, line, true);
      input.insert(reads.begin(), reads.end());
      input_text = r.target.text;
    } else if (r.op == "<") {
      auto reads = expand_reads(r.target.raw, line, true);
      input.insert(reads.begin(), reads.end());
      if (r.target.text.find('$') == std::string::npos) input.insert({Kind::File, normalize_path(r.target.text)});
    }
  }

  if (words.empty()) {
    // `done < file` and friends: the loop's `read` calls consume the input.
    loop_inputs_.insert(input.begin(), input.end());
    return res;
  }

  const auto& head = words[0].text;
  if (head == "for" && words.size() >= 2) {
    std::set<ScriptEntity> from;
    for (std::size_t i = 3; i < words.size(); ++i) {
      auto r = expand_reads(words[i].raw, line, true);
      from.insert(r.begin(), r.end());
    }
    ++flow_.commands_total;
    ++flow_.commands_recognized;
    assign(words[1].text, from);
    return res;
  }
  if (head == "case" || head == "function" || head.ends_with("()")) return res;

  std::string name;
  std::size_t eq = 0;
  std::size_t idx = 0;
  std::set<ScriptEntity> prefix_reads;
  std::vector<std::pair<std::string, std::set<ScriptEntity>>> assigns;
  while (idx < words.size() && is_assignment(words[idx].text, &name, &eq)) {
    auto raw_eq = words[idx].raw.find('=');
    auto reads = expand_reads(std::string_view(words[idx].raw).substr(raw_eq + 1), line, true);
    prefix_reads.insert(reads.begin(), reads.end());
    assigns.emplace_back(name, std::move(reads));
    ++idx;
  }
  ++flow_.commands_total;
  if (idx == words.size()) {
    ++flow_.commands_recognized;
    for (const auto& [n, r] : assigns) assign(n, r);
    return res;
  }
  if (kDeclarers.count(words[idx].text)) {
    ++flow_.commands_recognized;
    for (std::size_t i = idx + 1; i < words.size(); ++i) {
      if (!is_assignment(words[i].text, &name, &eq)) continue;
      auto raw_eq = words[i].raw.find('=');
      assign(name, expand_reads(std::string_view(words[i].raw).substr(raw_eq + 1), line, true));
    }
    return res;
  }

  std::vector<std::string> texts;
  for (std::size_t i = idx; i < words.size(); ++i) texts.push_back(words[i].text);
  const auto& prog = texts[0];
  auto before_edges = flow_.edges.size();
  auto before_sinks = flow_.sink_hits.size();

  if (prog == "read" || prog == "mapfile" || prog == "readarray") {
    static const std::set<std::string> kTakesArg = {"-p", "-d", "-n", "-N", "-t", "-u", "-i", "-C", "-c", "-O", "-s"};
    std::set<ScriptEntity> from = input;
    from.insert(prefix_reads.begin(), prefix_reads.end());
    for (std::size_t i = 1; i < texts.size(); ++i) {
      if (starts_with(texts[i], "-")) {
        if (kTakesArg.count(texts[i]) && prog == "read" && texts[i] != "-t") ++i;
        continue;
      }
      read_targets_.insert(texts[i]);
      assign(texts[i], from);
    }
    ++flow_.commands_recognized;
    return res;
  }

  std::set<ScriptEntity> reads = input;
  reads.insert(prefix_reads.begin(), prefix_reads.end());
  for (std::size_t i = idx + 1; i < words.size(); ++i) {
    auto r = expand_reads(words[i].raw, line, true);
    reads.insert(r.begin(), r.end());
  }
  auto literal = [](const std::string& t) { return !t.empty() && t.find('$') == std::string::npos &&
                                                   t.find(kPlaceholderPrefix) == std::string::npos; };
  if (kFileReaders.count(prog)) {
    bool skip_program = kProgramFirst.count(prog) > 0;
    for (std::size_t i = 1; i < texts.size(); ++i) {
      if (starts_with(texts[i], "-")) continue;
      if (skip_program) {
        skip_program = false;
        continue;
      }
      if (literal(texts[i])) reads.insert({Kind::File, normalize_path(texts[i])});
    }
  }
  for (std::size_t i = 1; i < texts.size(); ++i) {
    const auto& t = texts[i];
    if (!starts_with(t, "--")) continue;
    auto e = t.find('=');
    auto flag = t.substr(0, e);
    if (!(flag.ends_with("file") || flag == "--input")) continue;
    auto path = e == std::string::npos ? (i + 1 < texts.size() ? texts[i + 1] : std::string()) : t.substr(e + 1);
    if (literal(path) && path != "-") reads.insert({Kind::File, normalize_path(path)});
  }

  if (auto sink = reg_.classify_sink_command(texts)) {
    std::string text;
    for (std::size_t i = idx; i < words.size(); ++i) text += (i > idx ? " " : "") + words[i].raw;
    SinkHit hit;
    hit.command = command_entity(line);
    hit.command_text = text;
    hit.pattern_id = sink->pattern_id;
    hit.effect = sink->effect;
    hit.line = line;
    hit.origins = reads;
    edges(reads, hit.command);
    flow_.effect_kinds.insert(sink->effect);
    flow_.sink_hits.push_back(std::move(hit));
  }
  if (reg_.is_collaboration_read(texts)) {
    std::string text;
    for (std::size_t i = idx; i < words.size(); ++i) text += (i > idx ? " " : "") + words[i].raw;
    auto src = source_entity(line);
    flow_.reads.insert(src);
    flow_.sources.push_back({src, text, line, SourceCategory::ScriptCollaborationRead});
    reads.insert(src);
  }

  std::string content;
  if (prog == "echo" || prog == "printf") {
    std::size_t i = 1;
    while (prog == "echo" && i < texts.size() && (texts[i] == "-n" || texts[i] == "-e" || texts[i] == "-E" ||
                                                   texts[i] == "-ne" || texts[i] == "-en")) ++i;
    for (; i < texts.size(); ++i) content += (content.empty() ? "" : " ") + texts[i];
    content = replace_escaped_newlines(content);
  } else if (prog == "cat" || prog == "tee") {
    content = input_text;
  }
  static const std::regex kLegacy(R"(::(set-output|set-env) name=([A-Za-z0-9_.-]+)::)");
  std::smatch m;
  if (prog == "echo" && std::regex_search(content, m, kLegacy)) {
    edges(reads, {m[1] == "set-output" ? Kind::GithubOutput : Kind::GithubEnv, m[2]});
  }

  std::vector<std::string> targets;
  bool stdout_redirected = false;
  for (const auto& r : cmd.redirects) {
    if (r.heredoc || r.op[0] == '<') continue;
    if (r.fd >= 2) continue;
    if (r.op == ">&" && !r.target.text.empty() && std::isdigit(static_cast<unsigned char>(r.target.text[0]))) continue;
    stdout_redirected = true;
    targets.push_back(r.target.text);
  }
  if (prog == "tee") {
    for (std::size_t i = 1; i < texts.size(); ++i) {
      if (!starts_with(texts[i], "-")) targets.push_back(texts[i]);
    }
  }
  for (const auto& target : targets) {
    auto channel = channel_of(target);
    if (channel == "output" || channel == "env") {
      write_channel(channel == "output", content, reads);
    } else if (channel.empty() && !is_scratch_path(target)) {
      ScriptEntity file{Kind::File, normalize_path(target)};
      edges(reads, file);
      flow_.effect_kinds.insert(SinkEffect::FileWrite);
    } else if (channel.empty() && target.size() > 1 && target[0] != '&' && !starts_with(target, "/dev/")) {
      edges(reads, {Kind::File, normalize_path(target)});
    }
  }

  bool facts = flow_.edges.size() != before_edges || flow_.sink_hits.size() != before_sinks || !targets.empty() ||
               reads.size() != input.size();
  if (facts || kBenign.count(prog) || prog == "echo" || prog == "printf" || prog == "cat") ++flow_.commands_recognized;
  if (!stdout_redirected || prog == "tee") {
    res.out = std::move(reads);
    res.text = content;
  }
  return res;
}

void Analyzer::write_channel(bool output, const std::string& content, const std::set<ScriptEntity>& reads) {
  static const std::regex kMulti(R"(^([A-Za-z_][A-Za-z0-9_.-]*)<<\s*['"]?([^'"\s]+)['"]?)");
  static const std::regex kSingle(R"(^([A-Za-z_][A-Za-z0-9_.-]*)=)");
  auto& open = output ? open_output_ : open_env_;
  auto kind = output ? Kind::GithubOutput : Kind::GithubEnv;
  std::set<std::string> keys;
  bool dynamic = false;
  std::size_t start = 0;
  while (start <= content.size()) {
    auto nl = content.find('\n', start);
    if (nl == std::string::npos) nl = content.size();
    auto l = std::string(trim(std::string_view(content).substr(start, nl - start)));
    start = nl + 1;
    std::smatch m;
    if (open) {
      if (l == open->second) {
        open.reset();
      } else {
        keys.insert(open->first);
      }
    } else if (std::regex_search(l, m, kMulti)) {
      keys.insert(m[1]);
      open = std::make_pair(m[1].str(), m[2].str());
    } else if (std::regex_search(l, m, kSingle)) {
      keys.insert(m[1]);
    } else if (!l.empty()) {
      dynamic = true;
    }
  }
  if (dynamic && keys.empty()) {
    flow_.diagnostics.push_back(std::string("unresolved ") + (output ? "GITHUB_OUTPUT" : "GITHUB_ENV") + " key");
  }
  for (const auto& k : keys) edges(reads, {kind, k});
}

void Analyzer::finalize() {
  for (const auto& v : read_targets_) {
    for (const auto& in : loop_inputs_) flow_.edges.insert({in, {Kind::ShellVar, v}});
  }
  auto expand = [&](const ScriptEntity& e) {
    std::vector<ScriptEntity> out;
    if (e.kind != Kind::ShellVar) {
      out.push_back(e);
      return out;
    }
    bool assigned = assigned_.count(e.name) > 0;
    if (assigned) out.push_back(e);
    if (!assigned || opt_.env_names.count(e.name)) out.push_back({Kind::Env, e.name});
    return out;
  };
  std::set<std::pair<ScriptEntity, ScriptEntity>> edges;
  std::set<ScriptEntity> reads;
  for (const auto& [from, to] : flow_.edges) {
    for (const auto& f : expand(from)) {
      edges.insert({f, to});
      reads.insert(f);
    }
  }
  for (const auto& r : flow_.reads) {
    for (const auto& f : expand(r)) reads.insert(f);
  }
  for (auto& hit : flow_.sink_hits) {
    std::set<ScriptEntity> origins;
    for (const auto& o : hit.origins) {
      for (const auto& f : expand(o)) origins.insert(f);
    }
    hit.origins = std::move(origins);
  }
  flow_.edges = std::move(edges);
  flow_.reads = std::move(reads);
}

ScriptFlow grep_scan(const std::string& text, const ActionRegistry& registry) {
  static const std::regex kEnvRead(R"((\$env:|os\.environ\[['"]|os\.getenv\(['"]|process\.env\.)([A-Za-z_][A-Za-z0-9_]*))");
  ScriptFlow flow;
  flow.diagnostics.push_back("non-shell-run");
  // Without a parser for the language every read may feed every sink.
  std::vector<std::string> lines;
  for (std::size_t start = 0; start <= text.size();) {
    auto nl = text.find('\n', start);
    if (nl == std::string::npos) nl = text.size();
    lines.push_back(text.substr(start, nl - start));
    start = nl + 1;
  }
  for (const auto& l : lines) {
    auto reads = placeholder_reads(l);
    for (std::sregex_iterator it(l.begin(), l.end(), kEnvRead), end; it != end; ++it) {
      reads.insert({Kind::Env, (*it)[2]});
    }
    flow.reads.insert(reads.begin(), reads.end());
  }
  for (std::size_t i = 0; i < lines.size(); ++i) {
    auto words = split_command_words(lines[i]);
    if (words.empty()) continue;
    ++flow.commands_total;
    for (std::size_t j = 0; j < words.size(); ++j) {
      std::vector<std::string> tail(words.begin() + static_cast<long>(j), words.end());
      auto sink = registry.classify_sink_command(tail);
      if (!sink) continue;
      SinkHit hit;
      hit.command = {Kind::Command, std::to_string(i + 1)};
      hit.command_text = std::string(trim(lines[i]));
      hit.pattern_id = sink->pattern_id;
      hit.effect = sink->effect;
      hit.line = i + 1;
      hit.origins = flow.reads;
      for (const auto& r : flow.reads) flow.edges.insert({r, hit.command});
      flow.writes.insert(hit.command);
      flow.effect_kinds.insert(sink->effect);
      flow.sink_hits.push_back(std::move(hit));
      ++flow.commands_recognized;
      break;
    }
  }
  return flow;
}

}  // namespace

ScriptFlow analyze_script(std::string_view body, const ActionRegistry& registry, const ScriptOptions& options) {
  auto text = substitute_expressions(body);
  if (!is_posix_shell(options.shell)) return grep_scan(text, registry);
  Analyzer analyzer(registry, options);
  return analyzer.run(text);
}

ScriptFlow analyze_github_script(std::string_view script, const ScriptAction& action) {
  static const std::regex kEnv(R"(process\.env(?:\.([A-Za-z_][A-Za-z0-9_]*)|\[\s*['"]([^'"]+)['"]\s*\]))");
  static const std::regex kSetOutput(R"(core\.setOutput\(\s*['"`]([^'"`]+)['"`])");
  static const std::regex kExport(R"(core\.exportVariable\(\s*['"`]([^'"`]+)['"`])");
  auto text = substitute_expressions(script);
  ScriptFlow flow;
  flow.diagnostics.push_back("conservative-js");
  std::set<ScriptEntity> reads = placeholder_reads(text);
  for (std::sregex_iterator it(text.begin(), text.end(), kEnv), end; it != end; ++it) {
    reads.insert({Kind::Env, (*it)[1].matched ? (*it)[1].str() : (*it)[2].str()});
  }
  flow.reads = reads;
  auto line_of = [&](std::size_t pos) {
    return static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<long>(pos), '\n')) + 1;
  };
  std::map<std::size_t, int> per_line;
  for (std::size_t w = 0; w < action.write_call_regexes.size(); ++w) {
    const auto& re = action.write_call_regexes[w];
    for (std::sregex_iterator it(text.begin(), text.end(), re), end; it != end; ++it) {
      auto line = line_of(static_cast<std::size_t>(it->position()));
      auto k = per_line[line]++;
      SinkHit hit;
      hit.command = {Kind::Command, std::to_string(line) + (k ? "." + std::to_string(k) : std::string())};
      hit.command_text = it->str();
      hit.pattern_id = "github-script";
      hit.effect = action.effect;
      hit.line = line;
      hit.origins = reads;
      for (const auto& r : reads) flow.edges.insert({r, hit.command});
      flow.writes.insert(hit.command);
      flow.effect_kinds.insert(action.effect);
      flow.sink_hits.push_back(std::move(hit));
    }
  }
  for (std::sregex_iterator it(text.begin(), text.end(), kSetOutput), end; it != end; ++it) {
    ScriptEntity out{Kind::GithubOutput, (*it)[1]};
    flow.writes.insert(out);
    for (const auto& r : reads) flow.edges.insert({r, out});
  }
  for (std::sregex_iterator it(text.begin(), text.end(), kExport), end; it != end; ++it) {
    ScriptEntity out{Kind::GithubEnv, (*it)[1]};
    flow.writes.insert(out);
    for (const auto& r : reads) flow.edges.insert({r, out});
  }
  std::sort(flow.sink_hits.begin(), flow.sink_hits.end(),
            [](const SinkHit& a, const SinkHit& b) { return a.command < b.command; });
  return flow;
}

}  // namespace awi
