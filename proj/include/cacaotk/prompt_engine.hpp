#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cacaotk/cacao_model.hpp"

namespace cacaotk {

// The five prompt-engineering patterns. `template_block` is the JSON output
// scaffold; `reasoning` combines the zero-shot chain-of-thought cue with a
// reflection request.
struct PatternSet {
  bool persona = false;
  bool template_block = false;
  bool reasoning = false;
  bool knowledge_injection = false;
  bool one_shot = false;

  static PatternSet baseline() { return {}; }
  static PatternSet all() { return {true, true, true, true, true}; }
  static PatternSet all_without_one_shot() {
    return {true, true, true, true, false};
  }
  // Accepts a preset name (baseline | all | all-no-oneshot) or a comma list
  // of pattern names (persona,template,reasoning,knowledge,oneshot).
  static PatternSet parse(std::string_view text);

  std::string str() const;
  bool operator==(const PatternSet&) const = default;
};

enum class SubTaskKind {
  metadata,
  workflow_skeleton,
  step_attributes,
  variables,
  whole_playbook,
  refinement,
};

struct SubTask {
  SubTaskKind kind;
  // step_attributes carries exactly one of the eight step kinds.
  std::optional<StepKind> step_kind;

  std::string str() const;
  static SubTask metadata() { return {SubTaskKind::metadata, {}}; }
  static SubTask skeleton() { return {SubTaskKind::workflow_skeleton, {}}; }
  static SubTask attributes(StepKind kind) {
    return {SubTaskKind::step_attributes, kind};
  }
  static SubTask variables() { return {SubTaskKind::variables, {}}; }
  static SubTask whole_playbook() { return {SubTaskKind::whole_playbook, {}}; }
  static SubTask refinement() { return {SubTaskKind::refinement, {}}; }
};

struct PromptSpec {
  std::string system_text;
  std::string user_text;
  std::vector<std::pair<std::string, std::string>> injected_snippets;
  int est_tokens = 0;
};

struct PromptInputs {
  std::string legacy_text;  // must be non-empty
  // Keyed by SubTask::str(); step-attributes requires "workflow-skeleton".
  std::map<std::string, std::string> prior_fragments;
  // step-attributes: the skeleton step the prompt focuses on.
  std::optional<std::string> focus_step_name;
  // refinement: the previous transformation and its validator messages.
  std::optional<std::string> prior_candidate;
  std::vector<std::string> error_messages;
  std::optional<std::string> analyst_notes;
};

// Assembles sub-task prompts from versioned template files, the CACAO
// snippet library, and one-shot exemplar pairs. Pure and deterministic:
// identical (task, patterns, inputs) yield a byte-identical PromptSpec.
//
// Block order is fixed: persona, task instruction, knowledge snippet,
// one-shot example, reasoning cue, template scaffold, input payload.
// Refinement prompts always use exactly {template, persona, reasoning},
// whatever was requested, and embed the prior transformation plus error
// messages verbatim.
class PromptEngine {
 public:
  explicit PromptEngine(const std::filesystem::path& data_dir,
                        int context_window_tokens = 128000,
                        int snippet_max_chars = 4000);

  // Throws ContextOverflow when the estimate exceeds the context window and
  // MissingPriorFragment for step-attributes without a skeleton fragment.
  PromptSpec build_prompt(const SubTask& task, const PatternSet& patterns,
                          const PromptInputs& inputs) const;

  // Total injective mapping from the eight step-kind tokens to excerpts.
  // Throws UnknownStepKind for anything else (aliases like "loop" included).
  const std::string& select_schema_snippet(std::string_view kind_token) const;

  // max(8, ceil(chars/4)) over system+user text: the documented chars/4
  // heuristic with a small constant floor for message framing.
  static int estimate_tokens(const PromptSpec& spec);

  int context_window_tokens() const { return context_window_tokens_; }

 private:
  const std::string& tpl(const std::string& name) const;

  int context_window_tokens_;
  std::map<std::string, std::string> templates_;  // by file stem
  std::map<std::string, std::string> snippets_;   // by kind/topic
  std::map<std::string, std::pair<std::string, std::string>> one_shot_;
};

}  // namespace cacaotk
