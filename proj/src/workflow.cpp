#include "awi/workflow.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <set>

#include "awi/registry.hpp"

namespace awi {

using ojson = nlohmann::ordered_json;

std::string_view to_string(FieldRole role) {
  switch (role) {
    case FieldRole::PromptInput: return "prompt-input";
    case FieldRole::EnvValue: return "env-value";
    case FieldRole::RunBody: return "run-body";
    case FieldRole::IfCond: return "if-cond";
    case FieldRole::OutputDecl: return "output-decl";
    case FieldRole::WithValue: return "with-value";
    case FieldRole::Other: return "other";
  }
  return "other";
}

std::vector<ExpressionSpan> scan_expressions(std::string_view text) {
  std::vector<ExpressionSpan> out;
  std::size_t pos = 0;
  while ((pos = text.find("${{", pos)) != std::string_view::npos) {
    bool in_quote = false;
    std::size_t close = std::string_view::npos;
    for (std::size_t j = pos + 3; j + 1 < text.size(); ++j) {
      if (text[j] == '\'') {
        in_quote = !in_quote;
      } else if (!in_quote && text[j] == '}' && text[j + 1] == '}') {
        close = j;
        break;
      }
    }
    if (close == std::string_view::npos) break;
    auto raw = trim(text.substr(pos + 3, close - pos - 3));
    if (!raw.empty()) out.push_back({pos, close + 2 - pos, std::string(raw)});
    pos = close + 2;
  }
  return out;
}

std::string condition_expression(std::string_view if_cond) {
  auto t = trim(if_cond);
  auto spans = scan_expressions(t);
  if (spans.size() == 1 && spans[0].offset == 0 && spans[0].length == t.size()) return spans[0].raw;
  return std::string(t);
}

const JobIR* WorkflowIR::find_job(std::string_view job_id) const {
  for (const auto& j : jobs) {
    if (j.job_id == job_id) return &j;
  }
  return nullptr;
}

const StepIR* WorkflowIR::find_step(std::string_view job_id, std::string_view step_id) const {
  const auto* job = find_job(job_id);
  if (!job) return nullptr;
  for (const auto& s : job->steps) {
    if (s.step_id && *s.step_id == step_id) return &s;
  }
  return nullptr;
}

namespace {

class LineIndex {
 public:
  explicit LineIndex(std::string_view text) {
    starts_.push_back(0);
    for (std::size_t i = 0; i < text.size(); ++i) {
      if (text[i] == '\n') starts_.push_back(i + 1);
    }
  }
  SourceLocation at(std::size_t offset, std::size_t length) const {
    auto it = std::upper_bound(starts_.begin(), starts_.end(), offset);
    auto line = static_cast<std::size_t>(it - starts_.begin());
    return {line, offset - starts_[line - 1] + 1, offset, length};
  }

 private:
  std::vector<std::size_t> starts_;
};

ojson to_json(const YAML::Node& node) {
  switch (node.Type()) {
    case YAML::NodeType::Scalar: return node.Scalar();
    case YAML::NodeType::Sequence: {
      ojson arr = ojson::array();
      for (const auto& item : node) arr.push_back(to_json(item));
      return arr;
    }
    case YAML::NodeType::Map: {
      ojson obj = ojson::object();
      for (const auto& kv : node) obj[kv.first.as<std::string>()] = to_json(kv.second);
      return obj;
    }
    default: return nullptr;
  }
}

std::string scalar_text(const YAML::Node& node) {
  if (!node || node.IsNull()) return {};
  if (node.IsScalar()) return node.Scalar();
  return to_json(node).dump();
}

class Lifter {
 public:
  Lifter(std::string_view source, std::string path, const ParseOptions& options)
      : source_(source), lines_(source), options_(options) {
    ir_.path = std::move(path);
  }

  WorkflowIR run(const YAML::Node& root) {
    if (!root.IsMap()) throw ParseError(ir_.path + ": workflow document is not a mapping");
    auto on = root["on"];
    if (!on) throw ParseError(ir_.path + ": missing 'on:' trigger declaration");
    auto jobs = root["jobs"];
    if (!jobs) throw ParseError(ir_.path + ": missing 'jobs:'");
    if (!jobs.IsMap() && !jobs.IsNull()) throw ParseError(ir_.path + ": 'jobs:' must be a mapping");

    parse_triggers(on);
    for (const auto& kv : root) {
      auto key = kv.first.as<std::string>();
      if (key == "on" || key == "jobs" || key == "x-ir") continue;
      if (key == "env") {
        ir_.env = fields(kv.second);
      } else if (key == "permissions") {
        ir_.permissions = permissions(kv.second);
      } else {
        ir_.extra[key] = to_json(kv.second);
      }
    }
    ir_.default_shell = default_shell(root["defaults"]);
    if (jobs.IsMap()) {
      for (const auto& kv : jobs) ir_.jobs.push_back(parse_job(kv.first.as<std::string>(), kv.second));
    }
    check_needs();
    collect_expressions(root, {});
    return std::move(ir_);
  }

 private:
  SourceLocation loc(const YAML::Node& node) const {
    auto m = node.Mark();
    if (m.pos < 0 || m.line < 0) return {};
    return {static_cast<std::size_t>(m.line) + 1, static_cast<std::size_t>(m.column) + 1,
            static_cast<std::size_t>(m.pos), 0};
  }

  FieldMap fields(const YAML::Node& node) {
    FieldMap out;
    if (!node || !node.IsMap()) return out;
    for (const auto& kv : node) {
      out[kv.first.as<std::string>()] = Field{scalar_text(kv.second), loc(kv.second)};
    }
    return out;
  }

  static std::map<std::string, std::string> permissions(const YAML::Node& node) {
    std::map<std::string, std::string> out;
    if (!node) return out;
    if (node.IsScalar()) {
      out["*"] = node.Scalar();
    } else if (node.IsMap()) {
      for (const auto& kv : node) out[kv.first.as<std::string>()] = scalar_text(kv.second);
    }
    return out;
  }

  static std::optional<std::string> default_shell(const YAML::Node& defaults) {
    if (defaults && defaults.IsMap() && defaults["run"] && defaults["run"].IsMap() && defaults["run"]["shell"]) {
      return scalar_text(defaults["run"]["shell"]);
    }
    return std::nullopt;
  }

  void parse_triggers(const YAML::Node& on) {
    ir_.trigger_config = to_json(on);
    if (on.IsScalar()) {
      ir_.trigger_events.push_back(on.Scalar());
    } else if (on.IsSequence()) {
      for (const auto& e : on) ir_.trigger_events.push_back(scalar_text(e));
    } else if (on.IsMap()) {
      for (const auto& kv : on) {
        auto event = kv.first.as<std::string>();
        ir_.trigger_events.push_back(event);
        const auto& cfg = kv.second;
        if (!cfg.IsMap()) continue;
        if ((event == "workflow_dispatch" || event == "workflow_call") && cfg["inputs"] && cfg["inputs"].IsMap()) {
          for (const auto& in : cfg["inputs"]) {
            InputDecl decl;
            decl.name = in.first.as<std::string>();
            decl.trigger = event;
            decl.location = loc(in.first);
            const auto& d = in.second;
            if (d.IsMap()) {
              if (d["type"]) decl.type = scalar_text(d["type"]);
              if (d["default"]) decl.default_value = scalar_text(d["default"]);
              if (d["required"]) decl.required = scalar_text(d["required"]) == "true";
            }
            ir_.inputs[decl.name] = decl;
          }
        }
        if (event == "workflow_call" && cfg["outputs"] && cfg["outputs"].IsMap()) {
          for (const auto& out : cfg["outputs"]) {
            const auto& d = out.second;
            auto value = d.IsMap() ? d["value"] : d;
            if (value) ir_.call_outputs[out.first.as<std::string>()] = Field{scalar_text(value), loc(value)};
          }
        }
      }
    }
    ir_.trigger_events.erase(std::remove(ir_.trigger_events.begin(), ir_.trigger_events.end(), std::string()),
                             ir_.trigger_events.end());
    if (ir_.trigger_events.empty()) throw ParseError(ir_.path + ": 'on:' declares no trigger events");
  }

  JobIR parse_job(const std::string& job_id, const YAML::Node& node) {
    JobIR job;
    job.job_id = job_id;
    job.location = loc(node);
    if (!node.IsMap()) {
      ir_.diagnostics.push_back("job '" + job_id + "' is not a mapping");
      return job;
    }
    for (const auto& kv : node) {
      auto key = kv.first.as<std::string>();
      const auto& v = kv.second;
      if (key == "needs") {
        if (v.IsSequence()) {
          for (const auto& n : v) job.needs.push_back(scalar_text(n));
        } else if (v.IsScalar()) {
          job.needs.push_back(v.Scalar());
        }
      } else if (key == "if") {
        job.if_cond = scalar_text(v);
        job.if_location = loc(v);
      } else if (key == "env") {
        job.env = fields(v);
      } else if (key == "permissions") {
        job.permissions = permissions(v);
      } else if (key == "outputs") {
        job.outputs = fields(v);
      } else if (key == "uses") {
        job.uses = scalar_text(v);
      } else if (key == "with") {
        job.with_block = fields(v);
      } else if (key == "steps") {
        if (v.IsSequence()) {
          std::size_t index = 0;
          for (const auto& s : v) job.steps.push_back(parse_step(job_id, index++, s));
        }
      } else {
        if (key == "environment") job.environment = v.IsMap() ? scalar_text(v["name"]) : scalar_text(v);
        if (key == "defaults") job.default_shell = default_shell(v);
        job.extra[key] = to_json(v);
      }
    }
    if (job.uses && !job.steps.empty()) {
      ir_.diagnostics.push_back("job '" + job_id + "' declares both 'uses' and 'steps'; steps ignored");
      job.steps.clear();
    }
    return job;
  }

  StepIR parse_step(const std::string& job_id, std::size_t index, const YAML::Node& node) {
    StepIR step;
    step.index = index;
    step.key = job_id + "#" + std::to_string(index);
    step.location = loc(node);
    if (!node.IsMap()) {
      ir_.diagnostics.push_back("step " + step.key + " is not a mapping");
      return step;
    }
    for (const auto& kv : node) {
      auto key = kv.first.as<std::string>();
      const auto& v = kv.second;
      if (key == "id") {
        step.step_id = scalar_text(v);
      } else if (key == "name") {
        step.name = scalar_text(v);
      } else if (key == "uses") {
        step.uses = scalar_text(v);
      } else if (key == "run") {
        step.run = scalar_text(v);
        step.run_location = loc(v);
      } else if (key == "shell") {
        step.shell = scalar_text(v);
      } else if (key == "with") {
        step.with_block = fields(v);
      } else if (key == "env") {
        step.env = fields(v);
      } else if (key == "if") {
        step.if_cond = scalar_text(v);
      } else {
        step.extra[key] = to_json(v);
      }
    }
    if (step.uses.has_value() == step.run.has_value()) {
      ir_.diagnostics.push_back("step " + step.key + (step.uses ? " has both 'uses' and 'run'" : " has neither 'uses' nor 'run'"));
    }
    return step;
  }

  void check_needs() {
    std::set<std::string> ids;
    for (const auto& j : ir_.jobs) ids.insert(j.job_id);
    for (const auto& j : ir_.jobs) {
      for (const auto& n : j.needs) {
        if (!ids.count(n)) ir_.diagnostics.push_back("job '" + j.job_id + "' needs unknown job '" + n + "'");
      }
    }
  }

  static std::string render_path(const std::vector<std::string>& segs) {
    std::string out;
    for (const auto& s : segs) {
      if (!s.empty() && s.front() == '[') {
        out += s;
      } else {
        if (!out.empty()) out += '.';
        out += s;
      }
    }
    return out;
  }

  void collect_expressions(const YAML::Node& node, std::vector<std::string> segs) {
    if (node.IsMap()) {
      for (const auto& kv : node) {
        auto key = kv.first.as<std::string>();
        if (segs.empty() && key == "x-ir") continue;
        segs.push_back(key);
        collect_expressions(kv.second, segs);
        segs.pop_back();
      }
    } else if (node.IsSequence()) {
      std::size_t i = 0;
      for (const auto& item : node) {
        segs.push_back("[" + std::to_string(i++) + "]");
        collect_expressions(item, segs);
        segs.pop_back();
      }
    } else if (node.IsScalar()) {
      auto spans = scan_expressions(node.Scalar());
      if (spans.empty()) return;
      auto base = loc(node);
      std::size_t cursor = base.known() ? base.offset : 0;
      for (const auto& span : spans) {
        ExpressionRef ref;
        ref.raw = span.raw;
        ref.ir_path = render_path(segs);
        ref.value_offset = span.offset;
        ref.value_length = span.length;
        ref.location = locate(span.raw, cursor, base);
        classify(segs, ref);
        ir_.expressions.push_back(std::move(ref));
      }
    }
  }

  // Finds the literal occurrence in the file; falls back to the scalar start.
  SourceLocation locate(const std::string& raw, std::size_t& cursor, const SourceLocation& fallback) const {
    auto pos = source_.find("${{", cursor);
    while (pos != std::string_view::npos) {
      auto found = scan_expressions(source_.substr(pos));
      if (!found.empty() && found[0].offset == 0 && found[0].raw == raw) {
        cursor = pos + found[0].length;
        return lines_.at(pos, found[0].length);
      }
      pos = source_.find("${{", pos + 3);
    }
    return fallback;
  }

  void classify(const std::vector<std::string>& segs, ExpressionRef& ref) const {
    auto n = segs.size();
    auto last = n ? segs[n - 1] : std::string();
    if (last == "if") {
      ref.role = FieldRole::IfCond;
    }
    if (n >= 2 && segs[0] == "env" && n == 2) {
      ref.role = FieldRole::EnvValue;
      ref.field_name = segs[1];
      return;
    }
    if (n >= 5 && segs[0] == "on" && segs[1] == "workflow_call" && segs[2] == "outputs") {
      ref.role = FieldRole::OutputDecl;
      ref.field_name = segs[3];
      return;
    }
    if (n < 2 || segs[0] != "jobs") return;
    ref.job_id = segs[1];
    if (n == 4 && segs[2] == "env") {
      ref.role = FieldRole::EnvValue;
      ref.field_name = segs[3];
    } else if (n == 4 && segs[2] == "outputs") {
      ref.role = FieldRole::OutputDecl;
      ref.field_name = segs[3];
    } else if (n == 4 && segs[2] == "with") {
      ref.role = FieldRole::WithValue;
      ref.field_name = segs[3];
    } else if (n >= 4 && segs[2] == "steps" && segs[3].front() == '[') {
      auto index = std::stoul(segs[3].substr(1, segs[3].size() - 2));
      ref.step_key = ref.job_id + "#" + std::to_string(index);
      if (n == 6 && segs[4] == "env") {
        ref.role = FieldRole::EnvValue;
        ref.field_name = segs[5];
      } else if (n == 6 && segs[4] == "with") {
        ref.role = FieldRole::WithValue;
        ref.field_name = segs[5];
        if (is_prompt_input(ref.job_id, index, segs[5])) ref.role = FieldRole::PromptInput;
      } else if (n == 5 && segs[4] == "run") {
        ref.role = FieldRole::RunBody;
        ref.field_name = "run";
      }
    }
  }

  bool is_prompt_input(const std::string& job_id, std::size_t index, const std::string& input) const {
    if (!options_.registry) return false;
    const auto* job = ir_.find_job(job_id);
    if (!job || index >= job->steps.size() || !job->steps[index].uses) return false;
    const auto* spec = options_.registry->lookup(normalize_action_ref(*job->steps[index].uses));
    return spec && spec->prompt_inputs.count(input) > 0;
  }

  std::string_view source_;
  LineIndex lines_;
  const ParseOptions& options_;
  WorkflowIR ir_;
};

ojson fields_json(const FieldMap& m) {
  ojson obj = ojson::object();
  for (const auto& [k, f] : m) obj[k] = f.value;
  return obj;
}

ojson location_json(const SourceLocation& l) {
  return ojson{{"line", l.line}, {"column", l.column}, {"offset", l.offset}, {"length", l.length}};
}

}  // namespace

WorkflowIR parse_workflow(std::string_view source_text, std::string_view path, const ParseOptions& options) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(source_text));
  } catch (const YAML::Exception& e) {
    throw ParseError(std::string(path) + ": invalid YAML: " + e.what());
  }
  try {
    Lifter lifter(source_text, std::string(path), options);
    return lifter.run(root);
  } catch (const YAML::Exception& e) {
    throw ParseError(std::string(path) + ": malformed workflow: " + e.what());
  }
}

std::vector<ExpressionRef> extract_expressions(const WorkflowIR& ir) { return ir.expressions; }

std::string dump_ir_json(const WorkflowIR& ir, bool with_locations) {
  ojson doc = ojson::object();
  doc["on"] = ir.trigger_config;
  if (!ir.env.empty()) doc["env"] = fields_json(ir.env);
  auto perms = [](const std::map<std::string, std::string>& p) -> ojson {
    if (p.size() == 1 && p.count("*")) return p.at("*");
    ojson obj = ojson::object();
    for (const auto& [k, v] : p) obj[k] = v;
    return obj;
  };
  if (!ir.permissions.empty()) doc["permissions"] = perms(ir.permissions);
  for (const auto& [k, v] : ir.extra.items()) doc[k] = v;

  ojson jobs = ojson::object();
  for (const auto& job : ir.jobs) {
    ojson j = ojson::object();
    if (!job.needs.empty()) j["needs"] = job.needs;
    if (job.if_cond) j["if"] = *job.if_cond;
    if (!job.env.empty()) j["env"] = fields_json(job.env);
    if (!job.permissions.empty()) j["permissions"] = perms(job.permissions);
    if (!job.outputs.empty()) j["outputs"] = fields_json(job.outputs);
    if (job.uses) j["uses"] = *job.uses;
    if (!job.with_block.empty()) j["with"] = fields_json(job.with_block);
    for (const auto& [k, v] : job.extra.items()) j[k] = v;
    if (!job.steps.empty()) {
      ojson steps = ojson::array();
      for (const auto& step : job.steps) {
        ojson s = ojson::object();
        if (step.step_id) s["id"] = *step.step_id;
        if (step.name) s["name"] = *step.name;
        if (step.uses) s["uses"] = *step.uses;
        if (step.run) s["run"] = *step.run;
        if (step.shell) s["shell"] = *step.shell;
        if (!step.with_block.empty()) s["with"] = fields_json(step.with_block);
        if (!step.env.empty()) s["env"] = fields_json(step.env);
        if (step.if_cond) s["if"] = *step.if_cond;
        for (const auto& [k, v] : step.extra.items()) s[k] = v;
        steps.push_back(std::move(s));
      }
      j["steps"] = std::move(steps);
    }
    jobs[job.job_id] = std::move(j);
  }
  doc["jobs"] = std::move(jobs);

  ojson meta = ojson::object();
  meta["path"] = ir.path;
  meta["trigger_events"] = ir.trigger_events;
  ojson keys = ojson::array();
  for (const auto& job : ir.jobs) {
    for (const auto& step : job.steps) keys.push_back(step.key);
  }
  meta["step_keys"] = keys;
  auto exprs = ir.expressions;
  if (!with_locations) {
    std::sort(exprs.begin(), exprs.end(), [](const ExpressionRef& a, const ExpressionRef& b) {
      return std::tie(a.ir_path, a.value_offset) < std::tie(b.ir_path, b.value_offset);
    });
  }
  ojson ex = ojson::array();
  for (const auto& e : exprs) {
    ojson r = {{"raw", e.raw}, {"ir_path", e.ir_path}, {"role", to_string(e.role)}};
    if (!e.job_id.empty()) r["job"] = e.job_id;
    if (!e.step_key.empty()) r["step"] = e.step_key;
    if (!e.field_name.empty()) r["field"] = e.field_name;
    if (with_locations) r["location"] = location_json(e.location);
    ex.push_back(std::move(r));
  }
  meta["expressions"] = ex;
  meta["diagnostics"] = ir.diagnostics;
  doc["x-ir"] = std::move(meta);
  return doc.dump(2);
}

}  // namespace awi
