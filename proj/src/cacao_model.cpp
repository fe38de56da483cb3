#include "cacaotk/cacao_model.hpp"

#include <algorithm>
#include <array>

#include "cacaotk/errors.hpp"

namespace cacaotk {

namespace {

constexpr std::array<std::string_view, kStepKindCount> kKindTokens = {
    "start",    "end",      "action",           "if-condition",
    "while-condition", "parallel", "switch-condition", "playbook-action"};

bool is_uuid(std::string_view s) {
  static constexpr std::array<int, 4> dash_at = {8, 13, 18, 23};
  if (s.size() != 36) return false;
  for (size_t i = 0; i < s.size(); ++i) {
    bool dash = std::find(dash_at.begin(), dash_at.end(), static_cast<int>(i)) !=
                dash_at.end();
    char c = s[i];
    if (dash) {
      if (c != '-') return false;
    } else if (!((c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'))) {
      return false;
    }
  }
  return true;
}

[[noreturn]] void bad_field(const std::string& where, const std::string& what) {
  throw InvalidDocument("invalid playbook document: " + where + ": " + what);
}

std::optional<std::string> take_string(OrderedJson& obj, const char* key,
                                       const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) return std::nullopt;
  if (!it->is_string()) bad_field(where, std::string(key) + " must be a string");
  std::string v = it->get<std::string>();
  obj.erase(it);
  return v;
}

std::optional<bool> take_bool(OrderedJson& obj, const char* key,
                              const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) return std::nullopt;
  if (!it->is_boolean()) bad_field(where, std::string(key) + " must be a boolean");
  bool v = it->get<bool>();
  obj.erase(it);
  return v;
}

std::vector<std::string> take_string_array(OrderedJson& obj, const char* key,
                                           const std::string& where) {
  std::vector<std::string> out;
  auto it = obj.find(key);
  if (it == obj.end()) return out;
  if (!it->is_array()) bad_field(where, std::string(key) + " must be an array");
  for (const auto& e : *it) {
    if (!e.is_string()) bad_field(where, std::string(key) + " entries must be strings");
    out.push_back(e.get<std::string>());
  }
  obj.erase(it);
  return out;
}

VariableDef parse_variable(OrderedJson obj, const std::string& where) {
  if (!obj.is_object()) bad_field(where, "variable must be an object");
  VariableDef var;
  if (auto t = take_string(obj, "type", where)) var.var_type = *t;
  var.description = take_string(obj, "description", where);
  if (auto it = obj.find("value"); it != obj.end()) {
    var.value = *it;
    obj.erase(it);
  }
  var.constant = take_bool(obj, "constant", where);
  var.external = take_bool(obj, "external", where);
  var.extras = std::move(obj);
  return var;
}

std::vector<std::pair<std::string, VariableDef>> take_variables(
    OrderedJson& obj, const char* key, const std::string& where) {
  std::vector<std::pair<std::string, VariableDef>> out;
  auto it = obj.find(key);
  if (it == obj.end()) return out;
  if (!it->is_object()) bad_field(where, std::string(key) + " must be an object");
  for (auto& [name, def] : it->items())
    out.emplace_back(name, parse_variable(def, where + "/" + name));
  obj.erase(it);
  return out;
}

WorkflowStep parse_step(OrderedJson obj, const std::string& step_id) {
  const std::string where = "workflow/" + step_id;
  if (!obj.is_object()) bad_field(where, "step must be an object");
  auto type_tok = take_string(obj, "type", where);
  if (!type_tok) bad_field(where, "step is missing its type");
  auto kind = parse_step_kind(*type_tok);
  if (!kind) bad_field(where, "unknown step kind '" + *type_tok + "'");

  WorkflowStep step;
  step.kind = *kind;
  // The `switch` expression lives in `condition`; the two keys are
  // kind-disjoint so no ambiguity arises.
  const char* condition_key =
      *kind == StepKind::switch_condition ? "switch" : "condition";

  step.name = take_string(obj, "name", where);
  step.description = take_string(obj, "description", where);
  step.condition = take_string(obj, condition_key, where);
  step.on_completion = take_string(obj, "on_completion", where);
  step.on_success = take_string(obj, "on_success", where);
  step.on_failure = take_string(obj, "on_failure", where);
  step.on_true = take_string(obj, "on_true", where);
  step.on_false = take_string(obj, "on_false", where);
  if (obj.contains("next_steps")) {
    step.next_steps = take_string_array(obj, "next_steps", where);
  }
  if (auto it = obj.find("cases"); it != obj.end()) {
    if (!it->is_object()) bad_field(where, "cases must be an object");
    std::vector<std::pair<std::string, std::string>> cases;
    for (auto& [token, target] : it->items()) {
      if (!target.is_string()) bad_field(where, "case targets must be strings");
      cases.emplace_back(token, target.get<std::string>());
    }
    step.cases = std::move(cases);
    obj.erase(it);
  }
  step.playbook_id = take_string(obj, "playbook_id", where);
  step.step_variables = take_variables(obj, "step_variables", where);
  step.extras = std::move(obj);

  // Kind/field exclusivity, rejected at construction.
  auto forbid = [&](bool present, const char* field) {
    if (present && !kind_allows_step_field(*kind, field))
      bad_field(where, std::string(field) + " is not allowed on a " +
                           std::string(step_kind_token(*kind)) + " step");
  };
  forbid(step.on_completion.has_value(), "on_completion");
  forbid(step.on_success.has_value(), "on_success");
  forbid(step.on_failure.has_value(), "on_failure");
  forbid(step.condition.has_value(), condition_key);
  forbid(step.on_true.has_value(), "on_true");
  forbid(step.on_false.has_value(), "on_false");
  forbid(step.next_steps.has_value(), "next_steps");
  forbid(step.cases.has_value(), "cases");
  forbid(step.playbook_id.has_value(), "playbook_id");
  if (step.on_completion && (step.on_success || step.on_failure))
    bad_field(where, "on_completion is mutually exclusive with on_success/on_failure");
  return step;
}

void emit_variables(OrderedJson& out, const char* key,
                    const std::vector<std::pair<std::string, VariableDef>>& vars,
                    bool always_emit) {
  if (vars.empty() && !always_emit) return;
  OrderedJson obj = OrderedJson::object();
  for (const auto& [name, var] : vars) {
    OrderedJson v = OrderedJson::object();
    v["type"] = var.var_type;
    if (var.description) v["description"] = *var.description;
    if (var.value) v["value"] = *var.value;
    if (var.constant) v["constant"] = *var.constant;
    if (var.external) v["external"] = *var.external;
    for (const auto& [k, val] : var.extras.items()) v[k] = val;
    obj[name] = std::move(v);
  }
  out[key] = std::move(obj);
}

OrderedJson emit_step(const WorkflowStep& step) {
  OrderedJson s = OrderedJson::object();
  s["type"] = std::string(step_kind_token(step.kind));
  if (step.name) s["name"] = *step.name;
  if (step.description) s["description"] = *step.description;
  if (step.condition)
    s[step.kind == StepKind::switch_condition ? "switch" : "condition"] =
        *step.condition;
  if (step.on_completion) s["on_completion"] = *step.on_completion;
  if (step.on_success) s["on_success"] = *step.on_success;
  if (step.on_failure) s["on_failure"] = *step.on_failure;
  if (step.on_true) s["on_true"] = *step.on_true;
  if (step.on_false) s["on_false"] = *step.on_false;
  if (step.next_steps) s["next_steps"] = *step.next_steps;
  if (step.cases) {
    OrderedJson cases = OrderedJson::object();
    for (const auto& [token, target] : *step.cases) cases[token] = target;
    s["cases"] = std::move(cases);
  }
  if (step.playbook_id) s["playbook_id"] = *step.playbook_id;
  emit_variables(s, "step_variables", step.step_variables, /*always_emit=*/false);
  for (const auto& [k, val] : step.extras.items()) s[k] = val;
  return s;
}

}  // namespace

std::string_view step_kind_token(StepKind kind) {
  return kKindTokens[static_cast<size_t>(kind)];
}

std::optional<StepKind> parse_step_kind(std::string_view token) {
  for (size_t i = 0; i < kKindTokens.size(); ++i)
    if (kKindTokens[i] == token) return static_cast<StepKind>(i);
  return std::nullopt;
}

bool kind_allows_step_field(StepKind kind, std::string_view field) {
  if (field == "on_completion" || field == "on_success" || field == "on_failure")
    return kind != StepKind::end;
  if (field == "condition")
    return kind == StepKind::if_condition || kind == StepKind::while_condition;
  if (field == "switch") return kind == StepKind::switch_condition;
  if (field == "on_true")
    return kind == StepKind::if_condition || kind == StepKind::while_condition;
  if (field == "on_false") return kind == StepKind::if_condition;
  if (field == "next_steps") return kind == StepKind::parallel;
  if (field == "cases") return kind == StepKind::switch_condition;
  if (field == "playbook_id") return kind == StepKind::playbook_action;
  return true;
}

std::string StepId::str() const {
  return std::string(step_kind_token(kind)) + "--" + uuid;
}

std::optional<StepId> StepId::parse(std::string_view text) {
  size_t sep = text.find("--");
  if (sep == std::string_view::npos) return std::nullopt;
  auto kind = parse_step_kind(text.substr(0, sep));
  if (!kind) return std::nullopt;
  std::string_view uuid = text.substr(sep + 2);
  if (!is_uuid(uuid)) return std::nullopt;
  return StepId{*kind, std::string(uuid)};
}

const WorkflowStep* PlaybookDocument::find_step(std::string_view step_id) const {
  for (const auto& [id, step] : workflow)
    if (id == step_id) return &step;
  return nullptr;
}

PlaybookDocument parse_playbook(std::string_view text) {
  OrderedJson root;
  try {
    root = OrderedJson::parse(text);
  } catch (const OrderedJson::parse_error& e) {
    throw MalformedJson(e.what(), e.byte);
  }
  if (!root.is_object() || !root.contains("type") || !root.contains("spec_version"))
    throw NotAPlaybook("input is not a CACAO playbook (missing type/spec_version)");
  if (!root["type"].is_string() || root["type"].get<std::string>() != "playbook")
    throw NotAPlaybook("input is not a CACAO playbook (type is not \"playbook\")");
  if (!root["spec_version"].is_string())
    throw NotAPlaybook("input is not a CACAO playbook (spec_version is not text)");

  PlaybookDocument doc;
  root.erase("type");
  doc.spec_version = root["spec_version"].get<std::string>();
  root.erase("spec_version");
  const std::string where = "playbook";
  if (auto id = take_string(root, "id", where)) doc.id = *id;
  doc.name = take_string(root, "name", where);
  doc.description = take_string(root, "description", where);
  doc.created = take_string(root, "created", where);
  doc.modified = take_string(root, "modified", where);
  doc.playbook_types = take_string_array(root, "playbook_types", where);
  doc.playbook_activities = take_string_array(root, "playbook_activities", where);
  doc.workflow_start = take_string(root, "workflow_start", where);
  if (auto it = root.find("workflow"); it != root.end()) {
    if (!it->is_object()) bad_field(where, "workflow must be an object");
    for (auto& [step_id, step_json] : it->items())
      doc.workflow.emplace_back(step_id, parse_step(step_json, step_id));
    root.erase(it);
  }
  doc.playbook_variables = take_variables(root, "playbook_variables", where);
  doc.extras = std::move(root);
  return doc;
}

std::string serialize_playbook(const PlaybookDocument& doc) {
  OrderedJson out = OrderedJson::object();
  out["type"] = "playbook";
  out["spec_version"] = doc.spec_version;
  out["id"] = doc.id;
  if (doc.name) out["name"] = *doc.name;
  if (doc.description) out["description"] = *doc.description;
  if (doc.created) out["created"] = *doc.created;
  if (doc.modified) out["modified"] = *doc.modified;
  out["playbook_types"] = doc.playbook_types;
  out["playbook_activities"] = doc.playbook_activities;
  if (doc.workflow_start) out["workflow_start"] = *doc.workflow_start;
  emit_variables(out, "playbook_variables", doc.playbook_variables,
                 /*always_emit=*/true);
  for (const auto& [k, val] : doc.extras.items()) out[k] = val;
  OrderedJson workflow = OrderedJson::object();
  for (const auto& [step_id, step] : doc.workflow)
    workflow[step_id] = emit_step(step);
  out["workflow"] = std::move(workflow);
  return out.dump(2) + "\n";
}

WorkflowGraph build_workflow_graph(const PlaybookDocument& doc, EdgeLabelMode mode) {
  WorkflowGraph graph;
  graph.nodes.reserve(doc.workflow.size());
  for (const auto& [step_id, step] : doc.workflow)
    graph.nodes.push_back(
        {step_id, step.kind, normalize_name(step.name.value_or(""))});

  auto check_target = [&](const std::string& from, const std::string& target) {
    if (doc.find_step(target) == nullptr)
      throw DanglingReference(
          "step " + from + " references missing step " + target, target);
  };
  auto add = [&](const std::string& from, const std::optional<std::string>& target,
                 const char* label) {
    if (!target) return;
    check_target(from, *target);
    graph.edges.push_back({from, *target, label});
  };

  for (const auto& [step_id, step] : doc.workflow) {
    add(step_id, step.on_completion, "on_completion");
    add(step_id, step.on_success, "on_success");
    add(step_id, step.on_failure, "on_failure");
    add(step_id, step.on_true, "on_true");
    add(step_id, step.on_false, "on_false");
    if (step.next_steps) {
      for (const auto& target : *step.next_steps) {
        check_target(step_id, target);
        if (mode == EdgeLabelMode::all)
          graph.edges.push_back({step_id, target, "next_steps"});
      }
    }
    if (step.cases) {
      for (const auto& [token, target] : *step.cases) {
        check_target(step_id, target);
        if (mode == EdgeLabelMode::all)
          graph.edges.push_back({step_id, target, "case"});
      }
    }
  }
  return graph;
}

}  // namespace cacaotk
