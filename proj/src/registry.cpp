#include "awi/registry.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <fstream>
#include <sstream>

#include "registry_seed.inc"

namespace awi {

namespace {

const std::set<std::string> kTopLevelKeys{"actions", "sources", "p2s_sinks", "workflow_guards"};

std::vector<std::string> split_path(std::string_view path) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : path) {
    if (c == '.') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

bool segments_match(const std::vector<std::string>& pattern, const std::vector<std::string>& path) {
  if (pattern.size() != path.size()) return false;
  for (std::size_t i = 0; i < pattern.size(); ++i) {
    if (pattern[i] == "*") continue;
    if (to_lower(pattern[i]) != to_lower(path[i])) return false;
  }
  return true;
}

// Pattern `a.b` is a prefix of `a.b.c` (segment-wise).
bool is_segment_prefix(std::string_view shorter, std::string_view longer) {
  auto s = split_path(shorter);
  auto l = split_path(longer);
  if (s.size() > l.size()) return false;
  return std::equal(s.begin(), s.end(), l.begin());
}

std::optional<std::string> unwrap_to_json(std::string_view text) {
  auto t = trim(text);
  auto lowered = to_lower(t);
  if (starts_with(lowered, "tojson(") && !t.empty() && t.back() == ')') {
    return std::string(trim(t.substr(7, t.size() - 8)));
  }
  return std::nullopt;
}

std::set<std::string> string_set(const YAML::Node& node, const std::string& what) {
  std::set<std::string> out;
  if (!node) return out;
  if (!node.IsSequence()) throw RegistryError(what + " must be a list");
  for (const auto& item : node) out.insert(item.as<std::string>());
  return out;
}

std::regex compile(const std::string& pattern, const std::string& where) {
  try {
    return std::regex(pattern, std::regex::ECMAScript);
  } catch (const std::regex_error& e) {
    throw RegistryError("invalid regex in " + where + ": '" + pattern + "': " + e.what());
  }
}

std::optional<GuardStatus> parse_policy_status(const YAML::Node& node, std::optional<GuardStatus> fallback,
                                               const std::string& where) {
  if (!node) return fallback;
  auto text = node.as<std::string>();
  if (to_lower(text) == "none") return std::nullopt;
  auto status = parse_guard_status(text);
  if (!status) throw RegistryError("unknown guard status '" + text + "' in " + where);
  return status;
}

ActionSpec parse_action(const YAML::Node& node) {
  ActionSpec spec;
  if (!node["ref"]) throw RegistryError("action entry without 'ref'");
  auto raw_ref = node["ref"].as<std::string>();
  if (raw_ref.find('@') != std::string::npos) {
    throw RegistryError("action ref '" + raw_ref + "' must not carry an @version suffix");
  }
  spec.action_ref = to_lower(raw_ref);
  auto kind_text = node["kind"] ? node["kind"].as<std::string>() : std::string("NonLlm");
  auto kind = parse_action_kind(kind_text);
  if (!kind) throw RegistryError("unknown action kind '" + kind_text + "' for " + spec.action_ref);
  spec.kind = *kind;
  const auto where = "action " + spec.action_ref;
  spec.prompt_inputs = string_set(node["prompt_inputs"], where + " prompt_inputs");
  spec.prompt_file_inputs = string_set(node["prompt_file_inputs"], where + " prompt_file_inputs");
  spec.derived_outputs = string_set(node["derived_outputs"], where + " derived_outputs");
  spec.derived_output_files = string_set(node["derived_output_files"], where + " derived_output_files");

  for (const auto& f : spec.prompt_file_inputs) {
    if (!spec.prompt_inputs.count(f)) {
      throw RegistryError(where + ": prompt_file_input '" + f + "' is not a prompt input");
    }
  }
  if (spec.kind == ActionKind::NonLlm && (!spec.prompt_inputs.empty() || !spec.derived_outputs.empty())) {
    throw RegistryError(where + ": NonLlm actions cannot declare prompt inputs or derived outputs");
  }

  if (auto guards = node["guard_fields"]) {
    if (!guards.IsMap()) throw RegistryError(where + ": guard_fields must be a map");
    for (const auto& kv : guards) {
      auto name = kv.first.as<std::string>();
      const auto& g = kv.second;
      GuardPolicy policy;
      const auto gwhere = where + " guard " + name;
      if (g["scope"]) {
        auto scope = to_lower(g["scope"].as<std::string>());
        if (scope == "users") {
          policy.scope = GuardScope::Users;
        } else if (scope == "bots") {
          policy.scope = GuardScope::Bots;
        } else {
          throw RegistryError(gwhere + ": unknown scope '" + scope + "'");
        }
      }
      if (g["separator"]) policy.separator = g["separator"].as<std::string>();
      if (g["wildcard"]) policy.wildcard = g["wildcard"].as<std::string>();
      if (g["boolean"]) policy.boolean = g["boolean"].as<bool>();
      policy.unset = parse_policy_status(g["unset"], GuardStatus::Permissive, gwhere);
      policy.empty = parse_policy_status(g["empty"], policy.unset, gwhere);
      spec.guard_fields.emplace(name, policy);
    }
  }
  for (const auto& kv : node) {
    static const std::set<std::string> known{"ref",
                                             "kind",
                                             "prompt_inputs",
                                             "prompt_file_inputs",
                                             "derived_outputs",
                                             "derived_output_files",
                                             "guard_fields"};
    auto key = kv.first.as<std::string>();
    if (!known.count(key)) throw RegistryError(where + ": unknown key '" + key + "'");
  }
  return spec;
}

void parse_sources(const YAML::Node& node, TaintSpec& spec) {
  if (!node.IsSequence()) throw RegistryError("'sources' must be a list");
  for (const auto& group : node) {
    auto cat_text = group["category"] ? group["category"].as<std::string>() : std::string();
    auto category = parse_source_category(cat_text);
    if (!category) throw RegistryError("unknown source category '" + cat_text + "'");
    auto events = string_set(group["events"], "source events");
    if (events.empty()) events.insert("*");
    bool serialized = group["serialized"] && group["serialized"].as<bool>();
    if (auto patterns = group["patterns"]) {
      for (const auto& p : patterns) {
        auto text = p.as<std::string>();
        if (serialized && !unwrap_to_json(text)) {
          throw RegistryError("serialized source pattern '" + text + "' must be toJson(<path>)");
        }
        if (!serialized && text.find_first_of("() ") != std::string::npos) {
          throw RegistryError("source pattern '" + text + "' is not a dotted context path");
        }
        spec.sources.push_back({text, *category, events, serialized});
      }
    }
    if (auto commands = group["commands"]) {
      if (*category != SourceCategory::ScriptCollaborationRead) {
        throw RegistryError("source commands are only valid for ScriptCollaborationRead");
      }
      for (const auto& c : commands) {
        SourceCommand cmd;
        cmd.prefix = c["prefix"].as<std::string>();
        if (c["argument_pattern"]) {
          cmd.argument_pattern = c["argument_pattern"].as<std::string>();
          cmd.argument_regex = compile(cmd.argument_pattern, "source command " + cmd.prefix);
        }
        spec.source_commands.push_back(std::move(cmd));
      }
    }
  }
  // No pattern may be a prefix of another in the same category.
  for (const auto& a : spec.sources) {
    for (const auto& b : spec.sources) {
      if (&a == &b || a.category != b.category) continue;
      auto pa = a.serialized ? *unwrap_to_json(a.pattern) : a.pattern;
      auto pb = b.serialized ? *unwrap_to_json(b.pattern) : b.pattern;
      if (is_segment_prefix(pa, pb)) {
        throw RegistryError("source pattern '" + a.pattern + "' is a prefix of '" + b.pattern + "' in category " +
                            std::string(to_string(a.category)));
      }
    }
  }
}

void parse_sinks(const YAML::Node& node, TaintSpec& spec) {
  if (!node.IsMap()) throw RegistryError("'p2s_sinks' must be a map");
  for (const auto& kv : node) {
    auto key = kv.first.as<std::string>();
    if (key != "commands" && key != "action_inputs" && key != "script_actions") {
      throw RegistryError("p2s_sinks: unknown key '" + key + "'");
    }
  }
  auto effect_of = [](const YAML::Node& n, const std::string& where) {
    auto text = n["effect"] ? n["effect"].as<std::string>() : std::string("GithubWriteApi");
    auto e = parse_sink_effect(text);
    if (!e) throw RegistryError("unknown sink effect '" + text + "' in " + where);
    return *e;
  };
  for (const auto& c : node["commands"]) {
    SinkCommand cmd;
    cmd.prefix = c["prefix"].as<std::string>();
    cmd.id = c["id"] ? c["id"].as<std::string>() : cmd.prefix;
    cmd.effect = effect_of(c, "sink " + cmd.id);
    if (split_command_words(cmd.prefix).empty()) throw RegistryError("empty sink prefix for " + cmd.id);
    spec.p2s_sink_commands.push_back(std::move(cmd));
  }
  for (const auto& a : node["action_inputs"]) {
    SinkActionInputs s;
    s.action_ref = normalize_action_ref(a["action"].as<std::string>());
    s.inputs = string_set(a["inputs"], "sink action inputs");
    s.effect = effect_of(a, "sink action " + s.action_ref);
    spec.sink_action_inputs.push_back(std::move(s));
  }
  for (const auto& a : node["script_actions"]) {
    ScriptAction s;
    s.action_ref = normalize_action_ref(a["action"].as<std::string>());
    s.input = a["input"] ? a["input"].as<std::string>() : std::string("script");
    s.effect = effect_of(a, "script action " + s.action_ref);
    for (const auto& w : a["write_calls"]) {
      s.write_calls.push_back(w.as<std::string>());
      s.write_call_regexes.push_back(compile(s.write_calls.back(), "script action " + s.action_ref));
    }
    spec.script_actions.push_back(std::move(s));
  }
}

void parse_guards(const YAML::Node& node, TaintSpec& spec) {
  if (!node.IsSequence()) throw RegistryError("'workflow_guards' must be a list");
  for (const auto& g : node) {
    WorkflowGuardPattern p;
    p.id = g["id"].as<std::string>();
    auto kind = to_lower(g["kind"].as<std::string>());
    if (kind == "association") {
      p.kind = WorkflowGuardKind::Association;
    } else if (kind == "identity") {
      p.kind = WorkflowGuardKind::Identity;
    } else if (kind == "label") {
      p.kind = WorkflowGuardKind::Label;
    } else if (kind == "bot_type") {
      p.kind = WorkflowGuardKind::BotType;
    } else {
      throw RegistryError("workflow guard '" + p.id + "': unknown kind '" + kind + "'");
    }
    p.subject = g["subject"].as<std::string>();
    p.subject_regex = compile(p.subject, "workflow guard " + p.id);
    for (const auto& t : string_set(g["trusted"], "trusted")) p.trusted.insert(to_lower(t));
    spec.workflow_guard_patterns.push_back(std::move(p));
  }
}

bool words_have_prefix(const std::vector<std::string>& words, const std::vector<std::string>& prefix) {
  if (prefix.empty() || words.size() < prefix.size()) return false;
  return std::equal(prefix.begin(), prefix.end(), words.begin());
}

}  // namespace

std::string normalize_action_ref(std::string_view raw) {
  auto text = std::string(trim(raw));
  if (starts_with(text, "./") || starts_with(text, "../")) return "local:" + text;
  if (starts_with(to_lower(text), "docker://")) return "docker:" + text.substr(9);
  if (auto at = text.find('@'); at != std::string::npos) text.resize(at);
  while (!text.empty() && text.back() == '/') text.pop_back();
  return to_lower(text);
}

std::vector<std::string> split_command_words(std::string_view text) {
  std::vector<std::string> words;
  std::string cur;
  bool in_word = false;
  char quote = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (quote) {
      if (c == quote) {
        quote = 0;
      } else if (c == '\\' && quote == '"' && i + 1 < text.size()) {
        cur.push_back(text[++i]);
      } else {
        cur.push_back(c);
      }
      continue;
    }
    if (c == '\'' || c == '"') {
      quote = c;
      in_word = true;
    } else if (c == ' ' || c == '\t' || c == '\n') {
      if (in_word) words.push_back(cur);
      cur.clear();
      in_word = false;
    } else {
      cur.push_back(c);
      in_word = true;
    }
  }
  if (in_word) words.push_back(cur);
  return words;
}

ActionRegistry ActionRegistry::load_string(std::string_view yaml_text) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(yaml_text));
  } catch (const YAML::Exception& e) {
    throw RegistryError(std::string("registry is not valid YAML: ") + e.what());
  }
  if (!root.IsMap()) throw RegistryError("registry must be a YAML mapping");
  for (const auto& kv : root) {
    auto key = kv.first.as<std::string>();
    if (!kTopLevelKeys.count(key)) throw RegistryError("unknown top-level registry key '" + key + "'");
  }

  ActionRegistry reg;
  try {
    if (auto actions = root["actions"]) {
      if (!actions.IsSequence()) throw RegistryError("'actions' must be a list");
      for (const auto& a : actions) {
        auto spec = parse_action(a);
        auto ref = spec.action_ref;
        if (!reg.actions_.emplace(ref, std::move(spec)).second) {
          throw RegistryError("duplicate action '" + ref + "'");
        }
      }
    }
    if (auto sources = root["sources"]) parse_sources(sources, reg.spec_);
    if (auto sinks = root["p2s_sinks"]) parse_sinks(sinks, reg.spec_);
    if (auto guards = root["workflow_guards"]) parse_guards(guards, reg.spec_);
  } catch (const YAML::Exception& e) {
    throw RegistryError(std::string("malformed registry: ") + e.what());
  }
  return reg;
}

ActionRegistry ActionRegistry::load_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw RegistryError("cannot open registry file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return load_string(ss.str());
}

const ActionRegistry& ActionRegistry::builtin() {
  static const ActionRegistry registry = load_string(kSeedRegistry);
  return registry;
}

const ActionSpec* ActionRegistry::lookup(std::string_view action_ref) const {
  auto it = actions_.find(std::string(action_ref));
  return it == actions_.end() ? nullptr : &it->second;
}

std::optional<SourceCategory> ActionRegistry::match_source(std::string_view context_path) const {
  static const std::vector<std::string> any{"*"};
  return match_source_for_events(context_path, any);
}

std::optional<SourceCategory> ActionRegistry::match_source_for_events(
    std::string_view context_path, const std::vector<std::string>& events) const {
  // A callee's or workflow_run consumer's event is decided elsewhere, so any
  // context may exist.
  bool any_event = std::any_of(events.begin(), events.end(), [](const std::string& e) {
    return e == "*" || e == "workflow_call";
  });
  auto active = [&](const SourcePattern& p) {
    if (any_event || p.events.count("*")) return true;
    return std::any_of(events.begin(), events.end(), [&](const std::string& e) { return p.events.count(e) > 0; });
  };

  if (auto inner = unwrap_to_json(context_path)) {
    auto path = split_path(*inner);
    for (const auto& p : spec_.sources) {
      if (!p.serialized || !active(p)) continue;
      auto base = split_path(*unwrap_to_json(p.pattern));
      if (path.size() >= base.size() &&
          segments_match(base, std::vector<std::string>(path.begin(), path.begin() + base.size()))) {
        return p.category;
      }
    }
    return std::nullopt;
  }
  auto path = split_path(trim(context_path));
  for (const auto& p : spec_.sources) {
    if (p.serialized || !active(p)) continue;
    if (segments_match(split_path(p.pattern), path)) return p.category;
  }
  return std::nullopt;
}

bool ActionRegistry::is_collaboration_read(const std::vector<std::string>& words) const {
  for (const auto& cmd : spec_.source_commands) {
    auto prefix = split_command_words(cmd.prefix);
    if (!words_have_prefix(words, prefix)) continue;
    if (cmd.argument_pattern.empty()) return true;
    for (std::size_t i = prefix.size(); i < words.size(); ++i) {
      if (std::regex_search(words[i], cmd.argument_regex)) return true;
    }
  }
  return false;
}

std::optional<SinkMatch> ActionRegistry::classify_sink_command(const std::vector<std::string>& words) const {
  const SinkCommand* best = nullptr;
  std::size_t best_len = 0;
  for (const auto& cmd : spec_.p2s_sink_commands) {
    auto prefix = split_command_words(cmd.prefix);
    if (words_have_prefix(words, prefix) && prefix.size() > best_len) {
      best = &cmd;
      best_len = prefix.size();
    }
  }
  if (!best) return std::nullopt;
  return SinkMatch{best->id, best->effect};
}

const SinkActionInputs* ActionRegistry::sink_action(std::string_view action_ref) const {
  for (const auto& s : spec_.sink_action_inputs) {
    if (s.action_ref == action_ref) return &s;
  }
  return nullptr;
}

const ScriptAction* ActionRegistry::script_action(std::string_view action_ref) const {
  for (const auto& s : spec_.script_actions) {
    if (s.action_ref == action_ref) return &s;
  }
  return nullptr;
}

const GuardPolicy* ActionRegistry::guard_policy(std::string_view guard_field) const {
  for (const auto& [ref, spec] : actions_) {
    auto it = spec.guard_fields.find(std::string(guard_field));
    if (it != spec.guard_fields.end()) return &it->second;
  }
  return nullptr;
}

GuardStatus ActionRegistry::classify_guard_value(std::string_view guard_field,
                                                 std::string_view configured_value) const {
  const auto* policy = guard_policy(guard_field);
  if (!policy) return GuardStatus::Unknown;
  return classify_guard_value(*policy, configured_value);
}

GuardStatus ActionRegistry::classify_guard_value(const GuardPolicy& policy, std::string_view configured_value) const {
  auto value = trim(configured_value);
  if (value.find("${{") != std::string_view::npos) return GuardStatus::Unknown;
  if (value.empty()) return policy.empty.value_or(GuardStatus::Permissive);
  if (policy.boolean) {
    auto lowered = to_lower(value);
    if (lowered == "true") return GuardStatus::Permissive;
    if (lowered == "false") return GuardStatus::Effective;
  }
  // Entries may be separated by the policy separator or by newlines.
  std::vector<std::string> entries;
  std::string cur;
  for (std::size_t i = 0; i < value.size(); ++i) {
    bool at_sep = !policy.separator.empty() && value.substr(i, policy.separator.size()) == policy.separator;
    if (at_sep || value[i] == '\n') {
      entries.emplace_back(trim(cur));
      cur.clear();
      if (at_sep) i += policy.separator.size() - 1;
    } else {
      cur.push_back(value[i]);
    }
  }
  entries.emplace_back(trim(cur));
  entries.erase(std::remove(entries.begin(), entries.end(), std::string()), entries.end());
  if (entries.empty()) return policy.empty.value_or(GuardStatus::Permissive);

  static const std::regex login(R"(^[A-Za-z0-9][A-Za-z0-9_.-]*(\[bot\])?$)");
  bool all_logins = true;
  for (const auto& e : entries) {
    if (e == policy.wildcard) return GuardStatus::Permissive;
    if (!std::regex_match(e, login)) all_logins = false;
  }
  return all_logins ? GuardStatus::Effective : GuardStatus::Unknown;
}

}  // namespace awi
