#include "cacaotk/schema_validator.hpp"

#include <algorithm>
#include <regex>

#include "cacaotk/cacao_model.hpp"
#include "cacaotk/errors.hpp"

namespace cacaotk {

namespace {

constexpr std::array<std::string_view, 7> kIssueKindTokens = {
    "missing-required",  "type-mismatch",      "enum-violation",
    "pattern-violation", "unknown-step-kind",  "dangling-reference",
    "mutual-exclusion"};

std::string escape_pointer_token(std::string_view token) {
  std::string out;
  out.reserve(token.size());
  for (char c : token) {
    if (c == '~')
      out += "~0";
    else if (c == '/')
      out += "~1";
    else
      out.push_back(c);
  }
  return out;
}

std::string type_name(const OrderedJson& v) {
  if (v.is_object()) return "object";
  if (v.is_array()) return "array";
  if (v.is_string()) return "string";
  if (v.is_boolean()) return "boolean";
  if (v.is_null()) return "null";
  if (v.is_number_integer() || v.is_number_unsigned()) return "integer";
  return "number";
}

bool type_matches(const OrderedJson& v, const std::string& want) {
  if (want == "object") return v.is_object();
  if (want == "array") return v.is_array();
  if (want == "string") return v.is_string();
  if (want == "boolean") return v.is_boolean();
  if (want == "null") return v.is_null();
  if (want == "integer") return v.is_number_integer() || v.is_number_unsigned();
  if (want == "number") return v.is_number();
  return false;
}

// Transition and kind-specific fields the structural exclusivity rule covers.
// Arbitrary other properties (commands, agents, vendor extensions) pass
// through unflagged in both schema sets.
constexpr std::array<std::string_view, 10> kRestrictedStepFields = {
    "on_completion", "on_success", "on_failure", "condition", "switch",
    "on_true",       "on_false",   "next_steps", "cases",     "playbook_id"};

}  // namespace

std::string_view issue_kind_token(IssueKind kind) {
  return kIssueKindTokens[static_cast<size_t>(kind)];
}

bool ValidationReport::contains(std::string_view path, IssueKind kind) const {
  for (const auto& issue : issues)
    if (issue.path == path && issue.kind == kind) return true;
  return false;
}

OrderedJson ValidationReport::to_json() const {
  OrderedJson out = OrderedJson::object();
  out["syntax_err_count"] = syntax_err_count();
  OrderedJson list = OrderedJson::array();
  for (const auto& issue : issues) {
    OrderedJson item = OrderedJson::object();
    item["path"] = issue.path;
    item["kind"] = std::string(issue_kind_token(issue.kind));
    item["message"] = issue.message;
    item["schema_rule"] = issue.schema_rule;
    list.push_back(std::move(item));
  }
  out["issues"] = std::move(list);
  return out;
}

struct SchemaValidator::CompiledPattern {
  std::string source;
  std::regex regex;
};

SchemaValidator::~SchemaValidator() = default;
SchemaValidator::SchemaValidator(SchemaValidator&&) noexcept = default;
SchemaValidator& SchemaValidator::operator=(SchemaValidator&&) noexcept =
    default;

SchemaValidator::SchemaValidator(const std::filesystem::path& schema_dir,
                                 SchemaSet set)
    : set_(set) {
  schema_ = Json::parse(read_file(schema_dir / "strict.schema.json"));
  if (set_ == SchemaSet::patched) {
    Json overlay = Json::parse(read_file(schema_dir / "patched.overlay.json"));
    for (const auto& relax : overlay.at("relaxations")) {
      Json& target = schema_.at(Json::json_pointer(relax.at("target").get<std::string>()));
      for (const auto& item : relax.at("remove")) {
        const std::string name = item.get<std::string>();
        if (target.is_array()) {
          target.erase(std::remove(target.begin(), target.end(), Json(name)),
                       target.end());
        } else if (target.is_object()) {
          target.erase(name);
        }
      }
    }
  }
  // Precompile every pattern in the (possibly patched) schema so validate()
  // is read-only and safe for concurrent use.
  std::vector<const Json*> stack = {&schema_};
  while (!stack.empty()) {
    const Json* node = stack.back();
    stack.pop_back();
    if (node->is_object()) {
      for (const auto& [key, value] : node->items()) {
        if (key == "pattern" && value.is_string())
          patterns_.push_back({value.get<std::string>(),
                               std::regex(value.get<std::string>(),
                                          std::regex::ECMAScript)});
        if (value.is_structured()) stack.push_back(&value);
      }
    } else if (node->is_array()) {
      for (const auto& value : *node)
        if (value.is_structured()) stack.push_back(&value);
    }
  }
}

bool SchemaValidator::matches(const std::string& pattern,
                              const std::string& text) const {
  for (const auto& compiled : patterns_)
    if (compiled.source == pattern) return std::regex_search(text, compiled.regex);
  return std::regex_search(text, std::regex(pattern));  // unreachable in practice
}

const Json& SchemaValidator::resolve_ref(const Json& schema,
                                         std::string& rule_base) const {
  if (!schema.contains("$ref")) return schema;
  const std::string ref = schema.at("$ref").get<std::string>();
  // Only intra-document "#/..." references are used.
  rule_base = ref.substr(2);
  return schema_.at(Json::json_pointer(ref.substr(1)));
}

void SchemaValidator::schema_check(const OrderedJson& instance, const Json& raw,
                                   const std::string& path,
                                   const std::string& rule_in,
                                   std::vector<ValidationIssue>& out) const {
  std::string rule_base = rule_in;
  const Json& schema = resolve_ref(raw, rule_base);
  const std::string here = path.empty() ? "/" : path;

  if (schema.contains("type")) {
    const Json& t = schema.at("type");
    bool ok = false;
    std::string wanted;
    if (t.is_string()) {
      wanted = t.get<std::string>();
      ok = type_matches(instance, wanted);
    } else {
      for (const auto& alt : t) {
        if (!wanted.empty()) wanted += " or ";
        wanted += alt.get<std::string>();
        ok = ok || type_matches(instance, alt.get<std::string>());
      }
    }
    if (!ok) {
      out.push_back({here, IssueKind::type_mismatch,
                     "expected " + wanted + ", got " + type_name(instance),
                     rule_base + "/type"});
      return;  // further keyword checks would only cascade
    }
  }
  if (schema.contains("const")) {
    // Consts in the vendored schemas are strings.
    const std::string want = schema.at("const").get<std::string>();
    if (!instance.is_string() || instance.get<std::string>() != want)
      out.push_back({here, IssueKind::enum_violation,
                     "value must be \"" + want + "\"", rule_base + "/const"});
  }
  if (schema.contains("enum")) {
    bool found = false;
    for (const auto& alt : schema.at("enum"))
      if (instance.is_string() && alt.is_string() &&
          instance.get<std::string>() == alt.get<std::string>())
        found = true;
    if (!found)
      out.push_back({here, IssueKind::enum_violation,
                     "value is not one of the allowed tokens",
                     rule_base + "/enum"});
  }
  if (instance.is_string()) {
    const std::string value = instance.get<std::string>();
    if (schema.contains("pattern") &&
        !matches(schema.at("pattern").get<std::string>(), value))
      out.push_back({here, IssueKind::pattern_violation,
                     "value does not match required pattern",
                     rule_base + "/pattern"});
    if (schema.contains("minLength") &&
        value.size() < schema.at("minLength").get<size_t>())
      out.push_back({here, IssueKind::pattern_violation,
                     "string is shorter than the required minimum",
                     rule_base + "/minLength"});
  }
  if (instance.is_array()) {
    if (schema.contains("minItems") &&
        instance.size() < schema.at("minItems").get<size_t>())
      out.push_back({here, IssueKind::type_mismatch,
                     "array has fewer entries than required",
                     rule_base + "/minItems"});
    if (schema.contains("items")) {
      size_t i = 0;
      for (const auto& element : instance) {
        schema_check(element, schema.at("items"), path + "/" + std::to_string(i),
                     rule_base + "/items", out);
        ++i;
      }
    }
  }
  if (instance.is_object()) {
    if (schema.contains("required")) {
      for (const auto& req : schema.at("required")) {
        const std::string key = req.get<std::string>();
        if (!instance.contains(key))
          out.push_back({path + "/" + escape_pointer_token(key),
                         IssueKind::missing_required,
                         "required field '" + key + "' is missing",
                         rule_base + "/required/" + key});
      }
    }
    const Json* props =
        schema.contains("properties") ? &schema.at("properties") : nullptr;
    if (schema.contains("propertyNames")) {
      const std::string pattern =
          schema.at("propertyNames").at("pattern").get<std::string>();
      for (const auto& [key, value] : instance.items()) {
        (void)value;
        if (!matches(pattern, key))
          out.push_back({path + "/" + escape_pointer_token(key),
                         IssueKind::pattern_violation,
                         "name '" + key + "' does not match required pattern",
                         rule_base + "/propertyNames"});
      }
    }
    for (const auto& [key, value] : instance.items()) {
      if (props && props->contains(key)) {
        schema_check(value, props->at(key), path + "/" + escape_pointer_token(key),
                     rule_base + "/properties/" + key, out);
      } else if (schema.contains("additionalProperties") &&
                 schema.at("additionalProperties").is_object()) {
        schema_check(value, schema.at("additionalProperties"),
                     path + "/" + escape_pointer_token(key),
                     rule_base + "/additionalProperties", out);
      }
    }
  }
}

void SchemaValidator::check_step(const std::string& step_path,
                                 const std::string& step_key,
                                 const OrderedJson& step,
                                 const OrderedJson& workflow,
                                 std::vector<ValidationIssue>& out) const {
  if (!step.is_object()) return;  // already flagged by the playbook schema
  if (!step.contains("type")) {
    out.push_back({step_path + "/type", IssueKind::missing_required,
                   "workflow step is missing its type", "step/type-required"});
    return;
  }
  if (!step.at("type").is_string()) {
    out.push_back({step_path + "/type", IssueKind::type_mismatch,
                   "step type must be a string", "step/type"});
    return;
  }
  const std::string token = step.at("type").get<std::string>();
  const auto kind = parse_step_kind(token);
  if (!kind) {
    out.push_back({step_path, IssueKind::unknown_step_kind,
                   "'" + token + "' is not one of the eight step kinds",
                   "step/unknown-kind"});
    return;
  }

  schema_check(step, schema_.at("steps").at("common"), step_path, "steps/common",
               out);
  schema_check(step, schema_.at("steps").at(token), step_path, "steps/" + token,
               out);

  // The step key must be a `<kind>--<uuid>` identifier whose prefix matches
  // the declared kind.
  auto parsed_key = StepId::parse(step_key);
  if (!parsed_key || parsed_key->kind != *kind)
    out.push_back({step_path, IssueKind::pattern_violation,
                   "step key does not have the form '" + token + "--<uuid>'",
                   "step/id-prefix"});

  for (const auto& field : kRestrictedStepFields) {
    if (step.contains(std::string(field)) && !kind_allows_step_field(*kind, field))
      out.push_back({step_path + "/" + std::string(field),
                     IssueKind::mutual_exclusion,
                     std::string(field) + " is not allowed on a " + token + " step",
                     "step/field-not-allowed"});
  }
  if (step.contains("on_completion") &&
      (step.contains("on_success") || step.contains("on_failure")))
    out.push_back({step_path, IssueKind::mutual_exclusion,
                   "on_completion is mutually exclusive with on_success/on_failure",
                   "step/exclusive-transitions"});

  auto check_target = [&](const OrderedJson& target, const std::string& at) {
    if (!target.is_string()) return;  // typed issues already reported
    if (!workflow.contains(target.get<std::string>()))
      out.push_back({at, IssueKind::dangling_reference,
                     "transition targets missing step '" +
                         target.get<std::string>() + "'",
                     "step/dangling-reference"});
  };
  for (const char* field : {"on_completion", "on_success", "on_failure",
                            "on_true", "on_false"}) {
    if (step.contains(field)) check_target(step.at(field), step_path + "/" + field);
  }
  if (step.contains("next_steps") && step.at("next_steps").is_array()) {
    size_t i = 0;
    for (const auto& target : step.at("next_steps")) {
      check_target(target, step_path + "/next_steps/" + std::to_string(i));
      ++i;
    }
  }
  if (step.contains("cases") && step.at("cases").is_object()) {
    for (const auto& [token_key, target] : step.at("cases").items())
      check_target(target,
                   step_path + "/cases/" + escape_pointer_token(token_key));
  }
}

ValidationReport SchemaValidator::validate(std::string_view candidate_json) const {
  ValidationReport report;
  OrderedJson root;
  try {
    root = OrderedJson::parse(candidate_json);
  } catch (const OrderedJson::parse_error& e) {
    report.issues.push_back({"/", IssueKind::type_mismatch,
                             std::string("input is not well-formed JSON: ") +
                                 e.what(),
                             "json/parse"});
    return report;
  }

  schema_check(root, schema_.at("playbook"), "", "playbook", report.issues);

  if (!root.is_object() || !root.contains("workflow") ||
      !root.at("workflow").is_object())
    return report;
  const OrderedJson& workflow = root.at("workflow");

  int start_count = 0;
  int end_count = 0;
  for (const auto& [step_key, step] : workflow.items()) {
    const std::string step_path = "/workflow/" + escape_pointer_token(step_key);
    check_step(step_path, step_key, step, workflow, report.issues);
    if (step.is_object() && step.contains("type") && step.at("type").is_string()) {
      const std::string token = step.at("type").get<std::string>();
      if (token == "start") ++start_count;
      if (token == "end") ++end_count;
    }
  }

  if (root.contains("workflow_start") && root.at("workflow_start").is_string()) {
    const std::string target = root.at("workflow_start").get<std::string>();
    if (!workflow.contains(target)) {
      report.issues.push_back({"/workflow_start", IssueKind::dangling_reference,
                               "workflow_start references missing step '" +
                                   target + "'",
                               "workflow/start-missing"});
    } else {
      const OrderedJson& target_step = workflow.at(target);
      if (target_step.is_object() && target_step.contains("type") &&
          target_step.at("type").is_string() &&
          target_step.at("type").get<std::string>() != "start")
        report.issues.push_back({"/workflow_start", IssueKind::type_mismatch,
                                 "workflow_start must reference a start step",
                                 "workflow/start-kind"});
    }
  }
  if (start_count == 0)
    report.issues.push_back({"/workflow", IssueKind::missing_required,
                             "workflow must contain a start step",
                             "workflow/start-required"});
  if (start_count > 1)
    report.issues.push_back({"/workflow", IssueKind::mutual_exclusion,
                             "workflow must contain exactly one start step",
                             "workflow/single-start"});
  if (end_count == 0)
    report.issues.push_back({"/workflow", IssueKind::missing_required,
                             "workflow must contain at least one end step",
                             "workflow/end-required"});
  return report;
}

Rational SchemaValidator::avg_syn_err(const std::vector<ValidationReport>& reports) {
  if (reports.empty())
    throw EmptyDataset("avg_syn_err requires a non-empty dataset");
  long long total = 0;
  for (const auto& report : reports) total += report.syntax_err_count();
  return Rational(total, static_cast<long long>(reports.size()));
}

}  // namespace cacaotk
