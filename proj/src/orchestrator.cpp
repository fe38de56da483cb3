#include "cacaotk/orchestrator.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>

#include "cacaotk/errors.hpp"

namespace cacaotk {

namespace {

std::string format_uuid(std::mt19937_64& rng) {
  unsigned char bytes[16];
  for (int half = 0; half < 2; ++half) {
    unsigned long long word = rng();
    for (int i = 0; i < 8; ++i)
      bytes[half * 8 + i] = static_cast<unsigned char>(word >> (8 * i));
  }
  bytes[6] = static_cast<unsigned char>((bytes[6] & 0x0F) | 0x40);  // version 4
  bytes[8] = static_cast<unsigned char>((bytes[8] & 0x3F) | 0x80);  // variant
  char buf[37];
  std::snprintf(buf, sizeof(buf),
                "%02x%02x%02x%02x-%02x%02x-%02x%02x-%02x%02x-"
                "%02x%02x%02x%02x%02x%02x",
                bytes[0], bytes[1], bytes[2], bytes[3], bytes[4], bytes[5],
                bytes[6], bytes[7], bytes[8], bytes[9], bytes[10], bytes[11],
                bytes[12], bytes[13], bytes[14], bytes[15]);
  return buf;
}

std::optional<std::string> first_balanced_object(const std::string& text) {
  for (size_t start = text.find('{'); start != std::string::npos;
       start = text.find('{', start + 1)) {
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    for (size_t i = start; i < text.size(); ++i) {
      const char c = text[i];
      if (in_string) {
        if (escaped)
          escaped = false;
        else if (c == '\\')
          escaped = true;
        else if (c == '"')
          in_string = false;
        continue;
      }
      if (c == '"') {
        in_string = true;
      } else if (c == '{') {
        ++depth;
      } else if (c == '}') {
        if (--depth == 0) {
          std::string candidate = text.substr(start, i - start + 1);
          try {
            if (OrderedJson::parse(candidate).is_object()) return candidate;
          } catch (const OrderedJson::parse_error&) {
          }
          break;  // balanced but not valid JSON; try the next opening brace
        }
      }
    }
  }
  return std::nullopt;
}

struct SkeletonStep {
  std::string name;
  StepKind kind = StepKind::action;
  std::optional<std::string> description;
  std::string id;
};

// Resolution order: generated id, exact name, case-insensitive name.
std::optional<std::string> resolve_step_ref(const std::vector<SkeletonStep>& steps,
                                            const std::string& ref) {
  for (const auto& step : steps)
    if (step.id == ref) return step.id;
  for (const auto& step : steps)
    if (step.name == ref) return step.id;
  const std::string folded = to_lower(trim(ref));
  for (const auto& step : steps)
    if (to_lower(trim(step.name)) == folded) return step.id;
  return std::nullopt;
}

std::optional<VariableDef> variable_from_json(const OrderedJson& value) {
  if (!value.is_object()) return std::nullopt;
  VariableDef var;
  OrderedJson extras = OrderedJson::object();
  for (const auto& [key, field] : value.items()) {
    if (key == "type" && field.is_string())
      var.var_type = field.get<std::string>();
    else if (key == "description" && field.is_string())
      var.description = field.get<std::string>();
    else if (key == "value")
      var.value = field;
    else if (key == "constant" && field.is_boolean())
      var.constant = field.get<bool>();
    else if (key == "external" && field.is_boolean())
      var.external = field.get<bool>();
    else
      extras[key] = field;
  }
  var.extras = std::move(extras);
  return var;
}

std::vector<std::pair<std::string, VariableDef>> variables_from_json(
    const OrderedJson& map) {
  std::vector<std::pair<std::string, VariableDef>> out;
  if (!map.is_object()) return out;
  for (const auto& [name, value] : map.items())
    if (auto var = variable_from_json(value)) out.emplace_back(name, *var);
  return out;
}

std::string render_issue(const ValidationIssue& issue) {
  return issue.path + ": " + issue.message + " [" + issue.schema_rule + "]";
}

std::vector<std::string> render_issues(const ValidationReport& report) {
  std::vector<std::string> out;
  out.reserve(report.issues.size());
  for (const auto& issue : report.issues) out.push_back(render_issue(issue));
  return out;
}

}  // namespace

std::string DeterministicIdSource::uuid() { return format_uuid(rng_); }

SystemIdSource::SystemIdSource() {
  std::random_device device;
  rng_.seed((static_cast<unsigned long long>(device()) << 32) ^ device() ^
            static_cast<unsigned long long>(
                std::chrono::steady_clock::now().time_since_epoch().count()));
}

std::string SystemIdSource::uuid() { return format_uuid(rng_); }

std::string SystemIdSource::timestamp() {
  const auto now = std::chrono::system_clock::now();
  return format_rfc3339_ms(
      std::chrono::duration_cast<std::chrono::milliseconds>(
          now.time_since_epoch())
          .count());
}

UsageTotals TransformResult::usage() const {
  UsageTotals totals;
  totals.calls = static_cast<long long>(responses.size());
  for (const auto& response : responses) {
    totals.tokens_in += response.tokens_in;
    totals.tokens_out += response.tokens_out;
  }
  return totals;
}

OrderedJson TransformResult::trace_json() const {
  OrderedJson out = OrderedJson::object();
  OrderedJson iterations = OrderedJson::array();
  for (const auto& point : refinement_trace) {
    OrderedJson item = OrderedJson::object();
    item["iteration"] = point.iteration;
    item["syntax_err_count"] = point.syntax_err_count;
    iterations.push_back(std::move(item));
  }
  out["iterations"] = std::move(iterations);
  out["final_syntax_err_count"] = validation.syntax_err_count();
  const UsageTotals totals = usage();
  OrderedJson usage_json = OrderedJson::object();
  usage_json["calls"] = totals.calls;
  usage_json["tokens_in"] = totals.tokens_in;
  usage_json["tokens_out"] = totals.tokens_out;
  out["usage"] = std::move(usage_json);
  return out;
}

std::string extract_json_fragment(const std::string& completion_text) {
  // A fenced block wins when present.
  const size_t fence = completion_text.find("```");
  if (fence != std::string::npos) {
    const size_t content_start = completion_text.find('\n', fence);
    if (content_start != std::string::npos) {
      const size_t closing = completion_text.find("```", content_start);
      if (closing != std::string::npos) {
        const std::string inner = completion_text.substr(
            content_start + 1, closing - content_start - 1);
        if (auto object = first_balanced_object(inner)) return *object;
      }
    }
  }
  if (auto object = first_balanced_object(completion_text)) return *object;
  throw NoJsonFound("completion contains no JSON object");
}

PlaybookDocument assemble(const FragmentList& fragments, IdSource& ids) {
  auto find_fragment = [&](std::string_view key) -> const std::string* {
    for (const auto& [name, text] : fragments)
      if (name == key) return &text;
    return nullptr;
  };
  auto parse_object = [](const std::string& key,
                         const std::string& text) -> OrderedJson {
    try {
      OrderedJson parsed = OrderedJson::parse(text);
      if (!parsed.is_object())
        throw FragmentUnparseable("fragment '" + key + "' is not a JSON object",
                                  key);
      return parsed;
    } catch (const OrderedJson::parse_error& e) {
      throw FragmentUnparseable(
          "fragment '" + key + "' is not valid JSON: " + e.what(), key);
    }
  };

  const std::string* metadata_text = find_fragment("metadata");
  const std::string* skeleton_text = find_fragment("workflow-skeleton");
  if (metadata_text == nullptr)
    throw FragmentUnparseable("metadata fragment is missing", "metadata");
  if (skeleton_text == nullptr)
    throw FragmentUnparseable("workflow-skeleton fragment is missing",
                              "workflow-skeleton");
  OrderedJson metadata = parse_object("metadata", *metadata_text);
  OrderedJson skeleton = parse_object("workflow-skeleton", *skeleton_text);
  if (!skeleton.contains("steps") || !skeleton.at("steps").is_array())
    throw FragmentUnparseable("workflow-skeleton fragment lacks a steps array",
                              "workflow-skeleton");

  std::vector<SkeletonStep> steps;
  for (const auto& entry : skeleton.at("steps")) {
    if (!entry.is_object() || !entry.contains("type") ||
        !entry.at("type").is_string())
      throw FragmentUnparseable("skeleton step lacks a type token",
                                "workflow-skeleton");
    const std::string token = entry.at("type").get<std::string>();
    const auto kind = parse_step_kind(token);
    if (!kind)
      throw FragmentUnparseable(
          "skeleton step uses unknown kind token '" + token + "'",
          "workflow-skeleton");
    SkeletonStep step;
    step.kind = *kind;
    if (entry.contains("name") && entry.at("name").is_string())
      step.name = entry.at("name").get<std::string>();
    if (entry.contains("description") && entry.at("description").is_string())
      step.description = entry.at("description").get<std::string>();
    step.id = StepId{*kind, ids.uuid()}.str();
    steps.push_back(std::move(step));
  }

  PlaybookDocument doc;
  doc.spec_version = "cacao-2.0";

  // Metadata; reserved keys are assembler-controlled, everything else passes
  // through so the validator sees what the model produced.
  static const std::vector<std::string> reserved = {
      "type",          "spec_version",       "id",
      "name",          "description",        "created",
      "modified",      "playbook_types",     "playbook_activities",
      "workflow_start", "workflow",          "playbook_variables"};
  if (metadata.contains("name") && metadata.at("name").is_string())
    doc.name = metadata.at("name").get<std::string>();
  if (metadata.contains("description") && metadata.at("description").is_string())
    doc.description = metadata.at("description").get<std::string>();
  auto copy_tokens = [&](const char* key, std::vector<std::string>& into) {
    if (!metadata.contains(key) || !metadata.at(key).is_array()) return;
    for (const auto& token : metadata.at(key))
      if (token.is_string()) into.push_back(token.get<std::string>());
  };
  copy_tokens("playbook_types", doc.playbook_types);
  copy_tokens("playbook_activities", doc.playbook_activities);
  if (metadata.contains("id") && metadata.at("id").is_string())
    doc.id = metadata.at("id").get<std::string>();
  else
    doc.id = "playbook--" + ids.uuid();
  if (metadata.contains("created") && metadata.at("created").is_string())
    doc.created = metadata.at("created").get<std::string>();
  else
    doc.created = ids.timestamp();
  if (metadata.contains("modified") && metadata.at("modified").is_string())
    doc.modified = metadata.at("modified").get<std::string>();
  else
    doc.modified = ids.timestamp();
  for (const auto& [key, value] : metadata.items())
    if (std::find(reserved.begin(), reserved.end(), key) == reserved.end())
      doc.extras[key] = value;

  // Workflow skeleton -> typed steps.
  for (const auto& skeleton_step : steps) {
    WorkflowStep step;
    step.kind = skeleton_step.kind;
    if (!skeleton_step.name.empty()) step.name = skeleton_step.name;
    step.description = skeleton_step.description;
    doc.workflow.emplace_back(skeleton_step.id, std::move(step));
    if (skeleton_step.kind == StepKind::start && !doc.workflow_start)
      doc.workflow_start = skeleton_step.id;
  }

  // Per-step attributes, joined by name (exact, case-insensitive, position).
  size_t attribute_ordinal = 0;
  for (const auto& [key, text] : fragments) {
    if (!starts_with(key, "step-attributes")) continue;
    OrderedJson attrs = parse_object(key, text);
    const size_t ordinal = attribute_ordinal++;
    std::string fragment_name;
    if (attrs.contains("name") && attrs.at("name").is_string())
      fragment_name = attrs.at("name").get<std::string>();

    int target_index = -1;
    for (size_t i = 0; i < steps.size() && target_index < 0; ++i)
      if (!fragment_name.empty() && steps[i].name == fragment_name)
        target_index = static_cast<int>(i);
    if (target_index < 0 && !fragment_name.empty()) {
      const std::string folded = to_lower(trim(fragment_name));
      for (size_t i = 0; i < steps.size() && target_index < 0; ++i)
        if (to_lower(trim(steps[i].name)) == folded)
          target_index = static_cast<int>(i);
    }
    if (target_index < 0 && ordinal < steps.size())
      target_index = static_cast<int>(ordinal);
    if (target_index < 0)
      throw SkeletonAttributeMismatch(
          "attribute fragment names no skeleton step: '" + fragment_name + "'",
          fragment_name);

    WorkflowStep& step = doc.workflow[static_cast<size_t>(target_index)].second;
    const StepKind kind = step.kind;
    auto resolve = [&](const OrderedJson& value) -> std::optional<std::string> {
      if (!value.is_string()) return std::nullopt;
      return resolve_step_ref(steps, value.get<std::string>());
    };
    for (const auto& [field, value] : attrs.items()) {
      if (field == "name" || field == "type") continue;  // skeleton governs
      if (field == "description") {
        if (value.is_string()) step.description = value.get<std::string>();
      } else if (field == "condition" || field == "switch") {
        if (value.is_string() && kind_allows_step_field(kind, field))
          step.condition = value.get<std::string>();
      } else if (field == "on_completion" || field == "on_success" ||
                 field == "on_failure" || field == "on_true" ||
                 field == "on_false") {
        if (!kind_allows_step_field(kind, field)) continue;
        auto target = resolve(value);
        if (!target) continue;  // never invent a transition
        if (field == "on_completion") step.on_completion = *target;
        if (field == "on_success") step.on_success = *target;
        if (field == "on_failure") step.on_failure = *target;
        if (field == "on_true") step.on_true = *target;
        if (field == "on_false") step.on_false = *target;
      } else if (field == "next_steps") {
        if (!value.is_array() || !kind_allows_step_field(kind, field)) continue;
        std::vector<std::string> resolved;
        for (const auto& item : value)
          if (auto target = resolve(item)) resolved.push_back(*target);
        if (!resolved.empty()) step.next_steps = std::move(resolved);
      } else if (field == "cases") {
        if (!value.is_object() || !kind_allows_step_field(kind, field)) continue;
        std::vector<std::pair<std::string, std::string>> cases;
        for (const auto& [token, target_value] : value.items())
          if (auto target = resolve(target_value))
            cases.emplace_back(token, *target);
        if (!cases.empty()) step.cases = std::move(cases);
      } else if (field == "playbook_id") {
        if (value.is_string() && kind_allows_step_field(kind, field))
          step.playbook_id = value.get<std::string>();
      } else if (field == "step_variables") {
        step.step_variables = variables_from_json(value);
      } else {
        step.extras[field] = value;
      }
    }
    // Both transitions present in the fragment: keep on_completion, drop the
    // pair the typed document cannot hold alongside it.
    if (step.on_completion && (step.on_success || step.on_failure)) {
      step.on_success.reset();
      step.on_failure.reset();
    }
  }

  if (const std::string* variables_text = find_fragment("variables")) {
    OrderedJson variables = parse_object("variables", *variables_text);
    const OrderedJson& map = variables.contains("playbook_variables")
                                 ? variables.at("playbook_variables")
                                 : variables;
    doc.playbook_variables = variables_from_json(map);
  }
  return doc;
}

CompletionResponse Orchestrator::complete_task(
    const SubTask& task, const TransformConfig& config,
    const PromptInputs& inputs, std::vector<CompletionResponse>& responses) {
  const PromptSpec prompt = prompts_.build_prompt(task, config.patterns, inputs);
  CompletionRequest request;
  request.model_id = config.model_id;
  request.system_text = prompt.system_text;
  request.user_text = prompt.user_text;
  request.temperature = config.temperature;
  request.seed = config.seed;
  request.max_output_tokens = config.max_output_tokens;
  CompletionResponse response = backend_.complete(request);
  responses.push_back(response);
  return response;
}

std::unique_ptr<IdSource> Orchestrator::make_id_source(
    const TransformConfig& config) const {
  if (config.deterministic_ids)
    return std::make_unique<DeterministicIdSource>(
        static_cast<unsigned long long>(config.seed));
  return std::make_unique<SystemIdSource>();
}

TransformResult Orchestrator::finalize(
    std::string candidate_json, ValidationReport report,
    std::vector<RefineTracePoint> trace,
    std::map<std::string, std::string> fragments,
    std::vector<CompletionResponse> responses) const {
  TransformResult result;
  try {
    result.playbook = parse_playbook(candidate_json);
  } catch (const Error& e) {
    throw FragmentUnparseable(
        std::string("final candidate does not parse as a typed playbook: ") +
            e.what(),
        "final");
  }
  result.playbook_json = serialize_playbook(result.playbook);
  result.fragments = std::move(fragments);
  result.validation = std::move(report);
  result.refinement_trace = std::move(trace);
  result.responses = std::move(responses);
  return result;
}

TransformResult Orchestrator::transform(
    const LegacyDocument& legacy, const TransformConfig& config,
    const std::optional<std::string>& analyst_notes,
    const AnalystCallback& on_iteration) {
  std::vector<CompletionResponse> responses;
  FragmentList fragments;
  std::string candidate_json;

  auto extract_for = [](const std::string& key, const std::string& text) {
    try {
      return extract_json_fragment(text);
    } catch (const NoJsonFound& e) {
      throw FragmentUnparseable("sub-task '" + key + "': " + e.what(), key);
    }
  };

  if (config.decompose) {
    PromptInputs base;
    base.legacy_text = legacy.payload;

    const auto metadata_response =
        complete_task(SubTask::metadata(), config, base, responses);
    fragments.emplace_back("metadata",
                           extract_for("metadata", metadata_response.text));

    const auto skeleton_response =
        complete_task(SubTask::skeleton(), config, base, responses);
    const std::string skeleton_text =
        extract_for("workflow-skeleton", skeleton_response.text);
    fragments.emplace_back("workflow-skeleton", skeleton_text);

    OrderedJson skeleton;
    try {
      skeleton = OrderedJson::parse(skeleton_text);
    } catch (const OrderedJson::parse_error& e) {
      throw FragmentUnparseable(std::string("workflow-skeleton: ") + e.what(),
                                "workflow-skeleton");
    }
    if (!skeleton.is_object() || !skeleton.contains("steps") ||
        !skeleton.at("steps").is_array())
      throw FragmentUnparseable("workflow-skeleton fragment lacks a steps array",
                                "workflow-skeleton");

    // One focused prompt per skeleton step, in skeleton order, each carrying
    // that step's kind snippet when knowledge injection is on.
    for (const auto& entry : skeleton.at("steps")) {
      if (!entry.is_object() || !entry.contains("type") ||
          !entry.at("type").is_string())
        throw FragmentUnparseable("skeleton step lacks a type token",
                                  "workflow-skeleton");
      const std::string token = entry.at("type").get<std::string>();
      const auto kind = parse_step_kind(token);
      if (!kind)
        throw FragmentUnparseable(
            "skeleton step uses unknown kind token '" + token + "'",
            "workflow-skeleton");
      std::string step_name;
      if (entry.contains("name") && entry.at("name").is_string())
        step_name = entry.at("name").get<std::string>();

      PromptInputs inputs;
      inputs.legacy_text = legacy.payload;
      inputs.prior_fragments["workflow-skeleton"] = skeleton_text;
      inputs.focus_step_name = step_name;
      const SubTask task = SubTask::attributes(*kind);
      const auto response = complete_task(task, config, inputs, responses);
      const std::string key = task.str() + ":" + step_name;
      fragments.emplace_back(key, extract_for(key, response.text));
    }

    const auto variables_response =
        complete_task(SubTask::variables(), config, base, responses);
    fragments.emplace_back("variables",
                           extract_for("variables", variables_response.text));

    auto ids = make_id_source(config);
    candidate_json = serialize_playbook(assemble(fragments, *ids));
  } else {
    PromptInputs inputs;
    inputs.legacy_text = legacy.payload;
    const auto response =
        complete_task(SubTask::whole_playbook(), config, inputs, responses);
    candidate_json = extract_for("whole-playbook", response.text);
    fragments.emplace_back("whole-playbook", candidate_json);
  }

  ValidationReport report = validator_.validate(candidate_json);
  std::map<std::string, std::string> fragment_map(fragments.begin(),
                                                  fragments.end());

  if (report.clean() || config.max_refine_iterations == 0) {
    return finalize(std::move(candidate_json), std::move(report),
                    {{0, report.syntax_err_count()}}, std::move(fragment_map),
                    std::move(responses));
  }

  TransformResult refined = refine(legacy, std::move(candidate_json), report,
                                   config, analyst_notes, on_iteration);
  refined.fragments.insert(fragment_map.begin(), fragment_map.end());
  refined.responses.insert(refined.responses.begin(), responses.begin(),
                           responses.end());
  return refined;
}

TransformResult Orchestrator::refine(
    const LegacyDocument& legacy, std::string candidate_json,
    const ValidationReport& report, const TransformConfig& config,
    const std::optional<std::string>& analyst_notes,
    const AnalystCallback& on_iteration,
    std::vector<RefineTracePoint>* partial_trace) {
  std::vector<RefineTracePoint> trace = {{0, report.syntax_err_count()}};
  if (partial_trace) *partial_trace = trace;
  if (report.clean())
    return finalize(std::move(candidate_json), report, std::move(trace), {}, {});

  std::vector<CompletionResponse> responses;
  std::string best_candidate = candidate_json;
  ValidationReport best_report = report;
  std::string current_candidate = std::move(candidate_json);
  ValidationReport current_report = report;
  std::optional<std::string> notes = analyst_notes;

  for (int iteration = 1; iteration <= config.max_refine_iterations;
       ++iteration) {
    if (on_iteration) {
      if (auto updated = on_iteration(iteration, current_report))
        notes = std::move(updated);
    }
    PromptInputs inputs;
    inputs.legacy_text = legacy.payload;
    inputs.prior_candidate = current_candidate;
    inputs.error_messages = render_issues(current_report);
    inputs.analyst_notes = notes;

    std::string next_candidate;
    try {
      const auto response =
          complete_task(SubTask::refinement(), config, inputs, responses);
      next_candidate = extract_json_fragment(response.text);
    } catch (const NoJsonFound& e) {
      if (partial_trace) *partial_trace = trace;
      throw FragmentUnparseable(
          std::string("refinement iteration ") + std::to_string(iteration) +
              ": " + e.what(),
          "refinement");
    } catch (const Error&) {
      if (partial_trace) *partial_trace = trace;
      throw;
    }

    ValidationReport next_report = validator_.validate(next_candidate);
    trace.push_back({iteration, next_report.syntax_err_count()});
    if (partial_trace) *partial_trace = trace;
    // Best-seen wins; ties go to the latest candidate.
    if (next_report.syntax_err_count() <= best_report.syntax_err_count()) {
      best_report = next_report;
      best_candidate = next_candidate;
    }
    current_candidate = std::move(next_candidate);
    current_report = std::move(next_report);
    if (current_report.clean()) break;
  }
  return finalize(std::move(best_candidate), std::move(best_report),
                  std::move(trace), {}, std::move(responses));
}

}  // namespace cacaotk
