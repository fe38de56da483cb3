#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "cacaotk/cacao_model.hpp"
#include "cacaotk/ingest.hpp"
#include "cacaotk/llm_backend.hpp"
#include "cacaotk/prompt_engine.hpp"
#include "cacaotk/schema_validator.hpp"

namespace cacaotk {

struct TransformConfig {
  PatternSet patterns;
  bool decompose = true;
  int max_refine_iterations = 5;
  EdgeLabelMode ged_edge_mode = EdgeLabelMode::all;
  int context_window_tokens = 128000;
  std::string model_id = "gpt-4o-mini";
  double temperature = 0.0;
  long long seed = 42;
  int max_output_tokens = 4096;
  // Replay runs use a seeded id/clock source so outputs are byte-identical.
  bool deterministic_ids = false;
};

// Generated identifiers and timestamps for assembly.
class IdSource {
 public:
  virtual ~IdSource() = default;
  virtual std::string uuid() = 0;       // lowercase canonical UUID text
  virtual std::string timestamp() = 0;  // RFC3339, millisecond precision, Z
};

class DeterministicIdSource : public IdSource {
 public:
  explicit DeterministicIdSource(unsigned long long seed) : rng_(seed) {}
  std::string uuid() override;
  std::string timestamp() override { return "2024-01-01T00:00:00.000Z"; }

 private:
  std::mt19937_64 rng_;
};

class SystemIdSource : public IdSource {
 public:
  SystemIdSource();
  std::string uuid() override;
  std::string timestamp() override;

 private:
  std::mt19937_64 rng_;
};

struct RefineTracePoint {
  int iteration;  // 0 is the pre-refinement candidate
  int syntax_err_count;
};

struct TransformResult {
  PlaybookDocument playbook;
  std::string playbook_json;  // canonical serialization of `playbook`
  std::map<std::string, std::string> fragments;  // sub-task key -> JSON text
  ValidationReport validation;
  std::vector<RefineTracePoint> refinement_trace;
  std::vector<CompletionResponse> responses;  // every completion, in order

  UsageTotals usage() const;
  OrderedJson trace_json() const;
};

// Strips Markdown code fences if present, otherwise returns the first
// balanced top-level JSON object found in the text, verbatim (no
// reformatting). Throws NoJsonFound.
std::string extract_json_fragment(const std::string& completion_text);

// Ordered (sub-task key, JSON text) pairs; order carries the positional
// fallback for attribute matching.
using FragmentList = std::vector<std::pair<std::string, std::string>>;

// Merges the per-sub-task fragments into one typed document: metadata fields,
// skeleton steps with generated `<kind>--<uuid>` ids, per-step attributes
// joined by step name (exact, then case-insensitive, then positional), and
// variables. id/created/modified are generated when absent. Transition
// targets are given by skeleton step name and resolve through the same
// matching; unresolvable targets are omitted rather than invented, and fields
// illegal for a step's kind are discarded (the typed document cannot hold
// them).
// Throws SkeletonAttributeMismatch and FragmentUnparseable.
PlaybookDocument assemble(const FragmentList& fragments, IdSource& ids);

// Per-iteration analyst feedback for interactive refinement; returning
// nullopt keeps the previous notes.
using AnalystCallback = std::function<std::optional<std::string>(
    int iteration, const ValidationReport& report)>;

// Drives the end-to-end transformation: task decomposition (metadata ->
// workflow-skeleton -> step-attributes per skeleton step -> variables),
// fragment extraction, assembly, validation, and the capped syntactic
// refinement loop. One transformation is single-threaded; run batches in
// parallel across playbooks instead.
class Orchestrator {
 public:
  Orchestrator(const PromptEngine& prompts, const SchemaValidator& validator,
               CompletionBackend& backend)
      : prompts_(prompts), validator_(validator), backend_(backend) {}

  TransformResult transform(const LegacyDocument& legacy,
                            const TransformConfig& config,
                            const std::optional<std::string>& analyst_notes = {},
                            const AnalystCallback& on_iteration = nullptr);

  // The iterative correction loop: rebuilds a whole-playbook refinement
  // prompt from the candidate and its validator report, up to
  // config.max_refine_iterations times, and returns the best-scoring
  // candidate (fewest issues, ties to the latest). A clean input returns
  // immediately with a single trace entry. Backend/extraction errors
  // propagate; when `partial_trace` is given it holds the trace collected
  // up to the failing iteration.
  TransformResult refine(const LegacyDocument& legacy, std::string candidate_json,
                         const ValidationReport& report,
                         const TransformConfig& config,
                         const std::optional<std::string>& analyst_notes = {},
                         const AnalystCallback& on_iteration = nullptr,
                         std::vector<RefineTracePoint>* partial_trace = nullptr);

 private:
  CompletionResponse complete_task(const SubTask& task,
                                   const TransformConfig& config,
                                   const PromptInputs& inputs,
                                   std::vector<CompletionResponse>& responses);
  std::unique_ptr<IdSource> make_id_source(const TransformConfig& config) const;
  TransformResult finalize(std::string candidate_json, ValidationReport report,
                           std::vector<RefineTracePoint> trace,
                           std::map<std::string, std::string> fragments,
                           std::vector<CompletionResponse> responses) const;

  const PromptEngine& prompts_;
  const SchemaValidator& validator_;
  CompletionBackend& backend_;
};

}  // namespace cacaotk
