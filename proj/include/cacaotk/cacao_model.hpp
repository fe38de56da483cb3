#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cacaotk/util.hpp"

namespace cacaotk {

// The eight CACAO 2.0 workflow step kinds. Tokens are the canonical
// spec vocabulary; informal aliases ("loop", "conditional") are rejected.
enum class StepKind {
  start,
  end,
  action,
  if_condition,
  while_condition,
  parallel,
  switch_condition,
  playbook_action,
};

inline constexpr int kStepKindCount = 8;

std::string_view step_kind_token(StepKind kind);
std::optional<StepKind> parse_step_kind(std::string_view token);

// Kind/field exclusivity table for the transition and kind-specific fields
// (on_completion, on_true, next_steps, cases, ...). Fields outside that set
// are always allowed and pass through as extras.
bool kind_allows_step_field(StepKind kind, std::string_view field);

// A `<kind>--<uuid>` step identifier. Transition targets are kept as raw
// strings in the model (so imperfect candidates can round-trip through the
// refinement loop); StepId is used where identifiers are generated or the
// prefix matters.
struct StepId {
  StepKind kind;
  std::string uuid;

  std::string str() const;
  static std::optional<StepId> parse(std::string_view text);
};

struct VariableDef {
  std::string var_type;  // JSON key "type"
  std::optional<std::string> description;
  std::optional<OrderedJson> value;  // usually text; preserved verbatim
  std::optional<bool> constant;
  std::optional<bool> external;
  OrderedJson extras = OrderedJson::object();
};

// One workflow step. Shape-level rules (kind/field exclusivity,
// on_completion vs on_success/on_failure, end steps carrying no
// transitions) are enforced at construction; referential rules (dangling
// targets, start/end counts) are schema_validator's job so that candidates
// with reportable issues still parse.
struct WorkflowStep {
  StepKind kind = StepKind::action;
  std::optional<std::string> name;
  std::optional<std::string> description;
  // Holds the `condition` expression for if/while steps and the `switch`
  // expression for switch-condition steps (serialized under that key).
  std::optional<std::string> condition;
  std::optional<std::string> on_completion;
  std::optional<std::string> on_success;
  std::optional<std::string> on_failure;
  std::optional<std::string> on_true;
  std::optional<std::string> on_false;
  std::optional<std::vector<std::string>> next_steps;             // parallel
  std::optional<std::vector<std::pair<std::string, std::string>>> cases;  // switch
  std::optional<std::string> playbook_id;  // playbook-action
  std::vector<std::pair<std::string, VariableDef>> step_variables;
  OrderedJson extras = OrderedJson::object();
};

struct PlaybookDocument {
  // `type` ("playbook") and `spec_version` are literal tags; the parser
  // requires their presence, the validator enforces the exact values.
  std::string spec_version;
  std::string id;
  std::optional<std::string> name;
  std::optional<std::string> description;
  std::optional<std::string> created;
  std::optional<std::string> modified;
  std::vector<std::string> playbook_types;
  std::vector<std::string> playbook_activities;
  std::optional<std::string> workflow_start;
  std::vector<std::pair<std::string, WorkflowStep>> workflow;  // document order
  std::vector<std::pair<std::string, VariableDef>> playbook_variables;
  OrderedJson extras = OrderedJson::object();

  const WorkflowStep* find_step(std::string_view step_id) const;
};

// Which transition labels become graph edges. `paper` keeps the five labels
// on_completion/on_success/on_failure/on_true/on_false; `all` (default) also
// fans out parallel next_steps and switch cases so those steps stay connected.
enum class EdgeLabelMode { paper, all };

struct GraphNode {
  std::string node_key;
  StepKind kind;
  std::string normalized_name;  // lowercased, trimmed, whitespace-collapsed
};

struct GraphEdge {
  std::string from_key;
  std::string to_key;
  std::string label;  // transition field name; "case" for switch targets
};

struct WorkflowGraph {
  std::vector<GraphNode> nodes;
  std::vector<GraphEdge> edges;
};

// Parses CACAO JSON into the typed document. Unknown fields are preserved
// in per-object side-maps so serialization is lossless.
// Throws MalformedJson, NotAPlaybook, InvalidDocument.
PlaybookDocument parse_playbook(std::string_view text);

// Canonical, deterministic serialization: fixed documented key order per
// object kind (metadata first, workflow last), 2-space indent, trailing
// newline. playbook_types, playbook_activities and playbook_variables are
// always emitted, even when empty.
std::string serialize_playbook(const PlaybookDocument& doc);

// One node per step, one labeled edge per transition-field target.
// Throws DanglingReference if any transition targets a missing step.
WorkflowGraph build_workflow_graph(const PlaybookDocument& doc,
                                   EdgeLabelMode mode = EdgeLabelMode::all);

}  // namespace cacaotk
