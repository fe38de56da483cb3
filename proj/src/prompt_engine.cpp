#include "cacaotk/prompt_engine.hpp"

#include <array>

#include "cacaotk/errors.hpp"
#include "cacaotk/util.hpp"

namespace cacaotk {

namespace {

constexpr int kTokenOverhead = 8;

std::string replace_all(std::string text, std::string_view needle,
                        std::string_view replacement) {
  size_t pos = 0;
  while ((pos = text.find(needle, pos)) != std::string::npos) {
    text.replace(pos, needle.size(), replacement);
    pos += replacement.size();
  }
  return text;
}

std::string task_stem(const SubTask& task) {
  switch (task.kind) {
    case SubTaskKind::metadata:
      return "metadata";
    case SubTaskKind::workflow_skeleton:
      return "workflow_skeleton";
    case SubTaskKind::step_attributes:
      return "step_attributes";
    case SubTaskKind::variables:
      return "variables";
    case SubTaskKind::whole_playbook:
      return "whole_playbook";
    case SubTaskKind::refinement:
      return "refinement";
  }
  return "";
}

}  // namespace

PatternSet PatternSet::parse(std::string_view text) {
  const std::string t = trim(text);
  if (t.empty() || t == "baseline") return baseline();
  if (t == "all") return all();
  if (t == "all-no-oneshot" || t == "all-without-one-shot")
    return all_without_one_shot();
  PatternSet set;
  for (const auto& raw : split(t, ',')) {
    const std::string name = trim(raw);
    if (name == "persona")
      set.persona = true;
    else if (name == "template")
      set.template_block = true;
    else if (name == "reasoning" || name == "reason")
      set.reasoning = true;
    else if (name == "knowledge")
      set.knowledge_injection = true;
    else if (name == "oneshot" || name == "one-shot")
      set.one_shot = true;
    else
      throw Error("unknown prompt pattern '" + name + "'");
  }
  return set;
}

std::string PatternSet::str() const {
  if (*this == baseline()) return "baseline";
  if (*this == all()) return "all";
  if (*this == all_without_one_shot()) return "all-no-oneshot";
  std::string out;
  auto add = [&](bool on, const char* name) {
    if (!on) return;
    if (!out.empty()) out += ",";
    out += name;
  };
  add(persona, "persona");
  add(template_block, "template");
  add(reasoning, "reasoning");
  add(knowledge_injection, "knowledge");
  add(one_shot, "oneshot");
  return out;
}

std::string SubTask::str() const {
  switch (kind) {
    case SubTaskKind::metadata:
      return "metadata";
    case SubTaskKind::workflow_skeleton:
      return "workflow-skeleton";
    case SubTaskKind::step_attributes:
      return "step-attributes(" +
             std::string(step_kind ? step_kind_token(*step_kind) : "?") + ")";
    case SubTaskKind::variables:
      return "variables";
    case SubTaskKind::whole_playbook:
      return "whole-playbook";
    case SubTaskKind::refinement:
      return "refinement";
  }
  return "";
}

PromptEngine::PromptEngine(const std::filesystem::path& data_dir,
                           int context_window_tokens, int snippet_max_chars)
    : context_window_tokens_(context_window_tokens) {
  const auto templates = data_dir / "templates";
  for (const char* name :
       {"system_base", "persona", "reasoning", "analyst_notes"})
    templates_[name] = read_file(templates / (std::string(name) + ".tmpl"));
  for (const char* name : {"metadata", "workflow_skeleton", "step_attributes",
                           "variables", "whole_playbook", "refinement"}) {
    templates_[std::string("task/") + name] =
        read_file(templates / "tasks" / (std::string(name) + ".tmpl"));
    templates_[std::string("scaffold/") + name] =
        read_file(templates / "scaffold" / (std::string(name) + ".json"));
  }

  const auto snippets = data_dir / "snippets";
  std::vector<std::string> topics = {"metadata", "variables", "workflow"};
  for (int i = 0; i < kStepKindCount; ++i)
    topics.emplace_back(step_kind_token(static_cast<StepKind>(i)));
  for (const auto& topic : topics) {
    std::string text = read_file(snippets / (topic + ".txt"));
    if (static_cast<int>(text.size()) > snippet_max_chars)
      throw Error("snippet '" + topic + "' exceeds the configured maximum of " +
                  std::to_string(snippet_max_chars) + " characters");
    snippets_[topic] = std::move(text);
  }

  const auto oneshot = data_dir / "oneshot";
  for (const char* name : {"metadata", "workflow_skeleton", "step_attributes",
                           "variables", "whole_playbook"})
    one_shot_[name] = {
        read_file(oneshot / (std::string(name) + ".legacy.txt")),
        read_file(oneshot / (std::string(name) + ".cacao.json"))};
}

const std::string& PromptEngine::tpl(const std::string& name) const {
  auto it = templates_.find(name);
  if (it == templates_.end()) throw Error("missing template '" + name + "'");
  return it->second;
}

const std::string& PromptEngine::select_schema_snippet(
    std::string_view kind_token) const {
  if (!parse_step_kind(kind_token))
    throw UnknownStepKind(
        "'" + std::string(kind_token) + "' is not a CACAO step kind token",
        std::string(kind_token));
  return snippets_.at(std::string(kind_token));
}

int PromptEngine::estimate_tokens(const PromptSpec& spec) {
  const size_t chars = spec.system_text.size() + spec.user_text.size();
  const int by_length = static_cast<int>((chars + 3) / 4);
  return std::max(kTokenOverhead, by_length);
}

PromptSpec PromptEngine::build_prompt(const SubTask& task,
                                      const PatternSet& requested,
                                      const PromptInputs& inputs) const {
  if (inputs.legacy_text.empty())
    throw Error("build_prompt requires non-empty legacy playbook text");
  const bool refining = task.kind == SubTaskKind::refinement;
  if (task.kind == SubTaskKind::step_attributes &&
      !inputs.prior_fragments.count("workflow-skeleton"))
    throw MissingPriorFragment(
        "step-attributes prompts need the workflow-skeleton fragment");

  // Refinement fixes the pattern set to template+persona+reasoning.
  PatternSet patterns = requested;
  if (refining) {
    patterns = PatternSet{};
    patterns.persona = true;
    patterns.template_block = true;
    patterns.reasoning = true;
  }

  PromptSpec spec;
  spec.system_text = trim(tpl("system_base"));
  if (patterns.persona)
    spec.system_text = trim(tpl("persona")) + "\n" + spec.system_text;

  const std::string stem = task_stem(task);
  std::string instruction = tpl("task/" + stem);
  if (task.kind == SubTaskKind::step_attributes) {
    instruction = replace_all(instruction, "{{step_kind}}",
                              step_kind_token(*task.step_kind));
    instruction = replace_all(instruction, "{{step_name}}",
                              inputs.focus_step_name.value_or(""));
  }

  std::string user = trim(instruction);
  auto add_block = [&user](std::string_view heading, std::string_view body) {
    user += "\n\n";
    user += heading;
    user += "\n";
    user += body;
  };

  if (patterns.knowledge_injection) {
    std::string topic;
    switch (task.kind) {
      case SubTaskKind::metadata:
        topic = "metadata";
        break;
      case SubTaskKind::variables:
        topic = "variables";
        break;
      case SubTaskKind::step_attributes:
        topic = std::string(step_kind_token(*task.step_kind));
        break;
      default:
        topic = "workflow";
        break;
    }
    const std::string& snippet = snippets_.at(topic);
    add_block("CACAO 2.0 specification excerpt:", trim(snippet));
    spec.injected_snippets.emplace_back("knowledge:" + topic, trim(snippet));
  }

  if (patterns.one_shot && !refining) {
    const std::string key =
        task.kind == SubTaskKind::step_attributes ? "step_attributes" : stem;
    const auto& [example_in, example_out] = one_shot_.at(key);
    const std::string block = "Input:\n" + trim(example_in) + "\nOutput:\n" +
                              trim(example_out);
    add_block("Worked example of the expected output format:", block);
    spec.injected_snippets.emplace_back("one-shot:" + key, block);
  }

  if (patterns.reasoning) add_block("Approach:", trim(tpl("reasoning")));

  if (patterns.template_block) {
    const std::string& scaffold = tpl("scaffold/" + stem);
    add_block("Fill in this JSON structure, replacing every {{placeholder}}:",
              trim(scaffold));
    spec.injected_snippets.emplace_back("scaffold:" + stem, trim(scaffold));
  }

  add_block("Legacy playbook:", inputs.legacy_text);

  if (task.kind == SubTaskKind::step_attributes)
    add_block("Workflow skeleton extracted earlier:",
              inputs.prior_fragments.at("workflow-skeleton"));

  if (refining) {
    add_block("Previous transformation:", inputs.prior_candidate.value_or(""));
    std::string errors;
    for (const auto& message : inputs.error_messages) {
      errors += "- ";
      errors += message;
      errors += "\n";
    }
    if (!errors.empty()) errors.pop_back();
    add_block("Validator errors to fix:", errors);
    if (inputs.analyst_notes && !inputs.analyst_notes->empty()) {
      const std::string notes = replace_all(tpl("analyst_notes"), "{{notes}}",
                                            trim(*inputs.analyst_notes));
      user += "\n\n" + trim(notes);
    }
  }

  spec.user_text = std::move(user);
  spec.est_tokens = estimate_tokens(spec);
  if (spec.est_tokens > context_window_tokens_)
    throw ContextOverflow("prompt estimate of " +
                              std::to_string(spec.est_tokens) +
                              " tokens exceeds the context window",
                          spec.est_tokens, context_window_tokens_);
  return spec;
}

}  // namespace cacaotk
