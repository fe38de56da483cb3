#pragma once

#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "cacaotk/cacao_model.hpp"
#include "cacaotk/util.hpp"

namespace cacaotk {

// True (unrestricted) Damerau-Levenshtein distance over Unicode code points:
// insertions, deletions, substitutions, and adjacent transpositions, each
// unit cost, with no restriction on editing a transposed pair again.
// This is deliberately not the cheaper optimal-string-alignment variant
// (e.g. distance("ca","abc") is 2, not 3).
int dl_distance(std::string_view a, std::string_view b);

// Piecewise similarity: 0 when either string is empty (including both),
// otherwise 1 - D(a,b) / max(|a|,|b|).
double dl_similarity(std::string_view a, std::string_view b);

// TP / (TP + FN) against the ground-truth token set. An empty truth set
// scores 1.0 (vacuous truth; the textbook formula is undefined there).
double recall(const std::set<std::string>& truth,
              const std::set<std::string>& generated);

enum class FieldKind { string_field, vocabulary };

struct FieldComparison {
  std::string field_path;
  FieldKind field_kind;
  std::string ground_truth;  // vocabulary sets rendered comma-joined
  std::string generated;
  double score;  // in [0,1]
};

// Mean of the per-field scores. Throws EmptyFieldSet on an empty list.
double field_accuracy(const std::vector<FieldComparison>& comparisons);

struct GedOptions {
  // Exact search runs when |V1|+|V2| <= exact_threshold and within the
  // timeout; otherwise a greedy complete mapping provides an upper bound.
  int exact_threshold = 14;
  double timeout_seconds = 10.0;
};

struct GedResult {
  double raw_cost = 0;
  double max_cost = 0;
  double normalized = 0;  // raw_cost / max_cost, 0 when max_cost == 0
  bool exact = true;      // false when the greedy fallback bound was used
  // node_mapping[i] = index into g2.nodes for g1.nodes[i], or -1 if deleted.
  std::vector<int> node_mapping;
};

// Graph edit distance under the unit cost model: node substitution is free
// iff kind and normalized name both match; edge substitution is free iff the
// endpoints are mapped and the labels are equal; every other edit costs 1.
// max_cost is |V1|+|E1|+|V2|+|E2| (deleting one graph, inserting the other).
GedResult ged(const WorkflowGraph& g1, const WorkflowGraph& g2,
              const GedOptions& options = {});

struct EvalOptions {
  EdgeLabelMode edge_mode = EdgeLabelMode::all;
  GedOptions ged;
};

struct EvaluationReport {
  double metadata_accuracy = 1.0;
  double workflow_field_accuracy = 1.0;
  double variables_accuracy = 1.0;
  GedResult ged;
  std::vector<FieldComparison> metadata_fields;
  std::vector<FieldComparison> workflow_fields;
  std::vector<FieldComparison> variable_fields;
  // Filled by callers that also validate / track a transformation run.
  std::optional<int> syntax_err_count;
  std::optional<std::string> patterns;
  std::optional<bool> decompose;
  OrderedJson usage = OrderedJson::object();

  // Accuracies rounded to 4 decimals in the export; internals full precision.
  OrderedJson to_json() const;
};

// Scores a generated playbook against its hand-built reference: metadata
// name/description via dl_similarity and playbook_types/playbook_activities
// via recall; per-step name/description/condition via dl_similarity with
// steps matched through the optimal GED node mapping; variables matched by
// name, var_type via singleton recall and description via dl_similarity.
// Fields absent or empty on the reference are skipped; a category with no
// comparable fields scores 1.0.
EvaluationReport evaluate_pair(const PlaybookDocument& generated,
                               const PlaybookDocument& reference,
                               const EvalOptions& options = {});

}  // namespace cacaotk
