#include "cacaotk/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <unordered_map>

#include "cacaotk/errors.hpp"

namespace cacaotk {

namespace {

double round4(double x) { return std::round(x * 10000.0) / 10000.0; }

std::string join_tokens(const std::set<std::string>& tokens) {
  std::string out;
  for (const auto& t : tokens) {
    if (!out.empty()) out += ",";
    out += t;
  }
  return out;
}

// ---- graph edit distance search ----

using LabelSet = std::vector<std::string>;  // sorted multiset of edge labels

struct GraphIndex {
  int node_count = 0;
  std::map<std::pair<int, int>, LabelSet> labels;  // (from,to) -> labels
  int edge_count = 0;

  explicit GraphIndex(const WorkflowGraph& g) {
    node_count = static_cast<int>(g.nodes.size());
    std::unordered_map<std::string, int> index;
    for (int i = 0; i < node_count; ++i) index[g.nodes[i].node_key] = i;
    for (const auto& e : g.edges) {
      labels[{index.at(e.from_key), index.at(e.to_key)}].push_back(e.label);
      ++edge_count;
    }
    for (auto& [key, set] : labels) std::sort(set.begin(), set.end());
  }

  const LabelSet& at(int from, int to) const {
    static const LabelSet empty;
    auto it = labels.find({from, to});
    return it == labels.end() ? empty : it->second;
  }
};

int multiset_intersection_size(const LabelSet& a, const LabelSet& b) {
  int count = 0;
  size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] == b[j]) {
      ++count;
      ++i;
      ++j;
    } else if (a[i] < b[j]) {
      ++i;
    } else {
      ++j;
    }
  }
  return count;
}

// Cost of reconciling the edge label multisets between one ordered node pair:
// shared labels are free, the overlap difference is substitutions, the size
// difference is insertions/deletions.
int label_cost(const LabelSet& a, const LabelSet& b) {
  return static_cast<int>(std::max(a.size(), b.size())) -
         multiset_intersection_size(a, b);
}

struct GedSearch {
  const WorkflowGraph& g1;
  const WorkflowGraph& g2;
  GraphIndex idx1;
  GraphIndex idx2;
  std::vector<std::vector<int>> node_cost;  // substitution cost matrix
  std::chrono::steady_clock::time_point deadline;
  bool timed_out = false;
  long long expansions = 0;

  int best_cost = 0;
  std::vector<int> best_mapping;

  GedSearch(const WorkflowGraph& a, const WorkflowGraph& b, double timeout_s)
      : g1(a), g2(b), idx1(a), idx2(b) {
    node_cost.assign(idx1.node_count, std::vector<int>(idx2.node_count, 1));
    for (int i = 0; i < idx1.node_count; ++i)
      for (int j = 0; j < idx2.node_count; ++j)
        if (g1.nodes[i].kind == g2.nodes[j].kind &&
            g1.nodes[i].normalized_name == g2.nodes[j].normalized_name)
          node_cost[i][j] = 0;
    deadline = std::chrono::steady_clock::now() +
               std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                   std::chrono::duration<double>(timeout_s));
  }

  // Incremental cost of deciding g1 node `u` (target >= 0 maps it, -1
  // deletes it) given all prior decisions: the node edit itself plus every
  // edge between `u` and already-decided nodes, in both directions,
  // including self-loops.
  int decide_cost(int u, int target, const std::vector<int>& mapping) const {
    int cost = target >= 0 ? node_cost[u][target] : 1;
    for (int p = 0; p < u; ++p) {
      const int pt = mapping[p];
      const LabelSet& out1 = idx1.at(u, p);
      const LabelSet& in1 = idx1.at(p, u);
      if (target >= 0 && pt >= 0) {
        cost += label_cost(out1, idx2.at(target, pt));
        cost += label_cost(in1, idx2.at(pt, target));
      } else {
        // Either endpoint unmapped: every g1 edge between the pair is a
        // deletion; any g2 counterpart is picked up by leftover_cost.
        cost += static_cast<int>(out1.size() + in1.size());
      }
    }
    const LabelSet& self1 = idx1.at(u, u);
    cost += target >= 0 ? label_cost(self1, idx2.at(target, target))
                        : static_cast<int>(self1.size());
    return cost;
  }

  // Insertions owed for g2 content untouched by the mapping: unused nodes
  // plus every g2 edge with at least one unused endpoint.
  int leftover_cost(const std::vector<bool>& used) const {
    int cost = 0;
    for (int j = 0; j < idx2.node_count; ++j)
      if (!used[j]) ++cost;
    for (const auto& [key, set] : idx2.labels)
      if (!used[key.first] || !used[key.second])
        cost += static_cast<int>(set.size());
    return cost;
  }

  void dfs(int u, int cost_so_far, std::vector<int>& mapping,
           std::vector<bool>& used, int unused_g2) {
    if (timed_out) return;
    if ((++expansions & 1023) == 0 &&
        std::chrono::steady_clock::now() > deadline) {
      timed_out = true;
      return;
    }
    if (u == idx1.node_count) {
      const int total = cost_so_far + leftover_cost(used);
      if (total < best_cost) {
        best_cost = total;
        best_mapping = mapping;
      }
      return;
    }
    const int remaining = idx1.node_count - u;
    const int floor = std::abs(remaining - unused_g2);
    if (cost_so_far + floor >= best_cost) return;

    for (int j = 0; j < idx2.node_count; ++j) {
      if (used[j]) continue;
      const int delta = decide_cost(u, j, mapping);
      if (cost_so_far + delta >= best_cost) continue;
      mapping[u] = j;
      used[j] = true;
      dfs(u + 1, cost_so_far + delta, mapping, used, unused_g2 - 1);
      used[j] = false;
      mapping[u] = -1;
    }
    const int delta = decide_cost(u, -1, mapping);
    if (cost_so_far + delta < best_cost)
      dfs(u + 1, cost_so_far + delta, mapping, used, unused_g2);
  }

  // Complete mapping built by locally cheapest choices; its cost is always
  // an upper bound on the true distance.
  std::pair<int, std::vector<int>> greedy() const {
    std::vector<int> mapping(idx1.node_count, -1);
    std::vector<bool> used(idx2.node_count, false);
    int cost = 0;
    for (int u = 0; u < idx1.node_count; ++u) {
      int best_delta = decide_cost(u, -1, mapping);
      int best_target = -1;
      for (int j = 0; j < idx2.node_count; ++j) {
        if (used[j]) continue;
        const int delta = decide_cost(u, j, mapping);
        if (delta < best_delta) {
          best_delta = delta;
          best_target = j;
        }
      }
      mapping[u] = best_target;
      if (best_target >= 0) used[best_target] = true;
      cost += best_delta;
    }
    cost += leftover_cost(used);
    return {cost, mapping};
  }

  std::pair<int, std::vector<int>> exact() {
    auto [upper, upper_mapping] = greedy();
    best_cost = upper;  // greedy gives a valid complete mapping to start from
    best_mapping = std::move(upper_mapping);
    std::vector<int> mapping(idx1.node_count, -1);
    std::vector<bool> used(idx2.node_count, false);
    dfs(0, 0, mapping, used, idx2.node_count);
    return {best_cost, best_mapping};
  }
};

struct StepFields {
  std::string name;
  std::string description;
  std::string condition;
};

StepFields fields_of(const WorkflowStep& step) {
  return {step.name.value_or(""), step.description.value_or(""),
          step.condition.value_or("")};
}

void add_string_comparison(std::vector<FieldComparison>& out,
                           const std::string& path, const std::string& truth,
                           const std::string& generated) {
  if (truth.empty()) return;  // nothing to score against
  out.push_back({path, FieldKind::string_field, truth, generated,
                 dl_similarity(truth, generated)});
}

void add_vocabulary_comparison(std::vector<FieldComparison>& out,
                               const std::string& path,
                               const std::set<std::string>& truth,
                               const std::set<std::string>& generated) {
  if (truth.empty()) return;
  out.push_back({path, FieldKind::vocabulary, join_tokens(truth),
                 join_tokens(generated), recall(truth, generated)});
}

double category_accuracy(const std::vector<FieldComparison>& comparisons) {
  return comparisons.empty() ? 1.0 : field_accuracy(comparisons);
}

OrderedJson comparisons_to_json(const std::vector<FieldComparison>& comparisons) {
  OrderedJson list = OrderedJson::array();
  for (const auto& c : comparisons) {
    OrderedJson item = OrderedJson::object();
    item["field_path"] = c.field_path;
    item["field_kind"] =
        c.field_kind == FieldKind::string_field ? "string" : "vocabulary";
    item["ground_truth"] = c.ground_truth;
    item["generated"] = c.generated;
    item["score"] = round4(c.score);
    list.push_back(std::move(item));
  }
  return list;
}

}  // namespace

int dl_distance(std::string_view a_utf8, std::string_view b_utf8) {
  const std::vector<char32_t> a = utf8_decode(a_utf8);
  const std::vector<char32_t> b = utf8_decode(b_utf8);
  const int n = static_cast<int>(a.size());
  const int m = static_cast<int>(b.size());
  if (n == 0) return m;
  if (m == 0) return n;

  const int maxdist = n + m;
  // (n+2) x (m+2) table with a sentinel row/column holding maxdist; the
  // transposition recurrence may reach back to it.
  std::vector<std::vector<int>> d(static_cast<size_t>(n) + 2,
                                  std::vector<int>(static_cast<size_t>(m) + 2));
  d[0][0] = maxdist;
  for (int i = 0; i <= n; ++i) {
    d[static_cast<size_t>(i) + 1][0] = maxdist;
    d[static_cast<size_t>(i) + 1][1] = i;
  }
  for (int j = 0; j <= m; ++j) {
    d[0][static_cast<size_t>(j) + 1] = maxdist;
    d[1][static_cast<size_t>(j) + 1] = j;
  }
  std::unordered_map<char32_t, int> last_row_of;  // char -> last row seen in a
  for (int i = 1; i <= n; ++i) {
    int last_match_col = 0;
    for (int j = 1; j <= m; ++j) {
      auto it = last_row_of.find(b[static_cast<size_t>(j) - 1]);
      const int k = it == last_row_of.end() ? 0 : it->second;
      const int l = last_match_col;
      int cost = 1;
      if (a[static_cast<size_t>(i) - 1] == b[static_cast<size_t>(j) - 1]) {
        cost = 0;
        last_match_col = j;
      }
      d[static_cast<size_t>(i) + 1][static_cast<size_t>(j) + 1] = std::min(
          {d[static_cast<size_t>(i)][static_cast<size_t>(j)] + cost,
           d[static_cast<size_t>(i) + 1][static_cast<size_t>(j)] + 1,
           d[static_cast<size_t>(i)][static_cast<size_t>(j) + 1] + 1,
           d[static_cast<size_t>(k)][static_cast<size_t>(l)] + (i - k - 1) + 1 +
               (j - l - 1)});
    }
    last_row_of[a[static_cast<size_t>(i) - 1]] = i;
  }
  return d[static_cast<size_t>(n) + 1][static_cast<size_t>(m) + 1];
}

double dl_similarity(std::string_view a, std::string_view b) {
  const size_t la = utf8_decode(a).size();
  const size_t lb = utf8_decode(b).size();
  if (la == 0 || lb == 0) return 0.0;
  return 1.0 - static_cast<double>(dl_distance(a, b)) /
                   static_cast<double>(std::max(la, lb));
}

double recall(const std::set<std::string>& truth,
              const std::set<std::string>& generated) {
  if (truth.empty()) return 1.0;
  size_t tp = 0;
  for (const auto& token : truth)
    if (generated.count(token)) ++tp;
  return static_cast<double>(tp) / static_cast<double>(truth.size());
}

double field_accuracy(const std::vector<FieldComparison>& comparisons) {
  if (comparisons.empty())
    throw EmptyFieldSet("field_accuracy requires at least one field");
  double sum = 0;
  for (const auto& c : comparisons) sum += c.score;
  return sum / static_cast<double>(comparisons.size());
}

GedResult ged(const WorkflowGraph& g1, const WorkflowGraph& g2,
              const GedOptions& options) {
  GedResult result;
  result.max_cost = static_cast<double>(g1.nodes.size() + g1.edges.size() +
                                        g2.nodes.size() + g2.edges.size());
  GedSearch search(g1, g2, options.timeout_seconds);
  const int combined = static_cast<int>(g1.nodes.size() + g2.nodes.size());
  if (combined <= options.exact_threshold) {
    auto [cost, mapping] = search.exact();
    result.raw_cost = cost;
    result.node_mapping = std::move(mapping);
    result.exact = !search.timed_out;
  } else {
    auto [cost, mapping] = search.greedy();
    result.raw_cost = cost;
    result.node_mapping = std::move(mapping);
    result.exact = false;
  }
  result.normalized =
      result.max_cost > 0 ? result.raw_cost / result.max_cost : 0.0;
  return result;
}

OrderedJson EvaluationReport::to_json() const {
  OrderedJson out = OrderedJson::object();
  out["metadata_accuracy"] = round4(metadata_accuracy);
  out["workflow_field_accuracy"] = round4(workflow_field_accuracy);
  out["variables_accuracy"] = round4(variables_accuracy);
  OrderedJson g = OrderedJson::object();
  g["raw_cost"] = ged.raw_cost;
  g["max_cost"] = ged.max_cost;
  g["normalized"] = round4(ged.normalized);
  g["exact"] = ged.exact;
  out["ged"] = std::move(g);
  if (syntax_err_count) out["syntax_err_count"] = *syntax_err_count;
  if (patterns) out["patterns"] = *patterns;
  if (decompose) out["decompose"] = *decompose;
  if (!usage.empty()) out["usage"] = usage;
  OrderedJson fields = OrderedJson::object();
  fields["metadata"] = comparisons_to_json(metadata_fields);
  fields["workflow"] = comparisons_to_json(workflow_fields);
  fields["variables"] = comparisons_to_json(variable_fields);
  out["fields"] = std::move(fields);
  return out;
}

EvaluationReport evaluate_pair(const PlaybookDocument& generated,
                               const PlaybookDocument& reference,
                               const EvalOptions& options) {
  EvaluationReport report;

  // Metadata.
  add_string_comparison(report.metadata_fields, "/name",
                        reference.name.value_or(""), generated.name.value_or(""));
  add_string_comparison(report.metadata_fields, "/description",
                        reference.description.value_or(""),
                        generated.description.value_or(""));
  const std::set<std::string> ref_types(reference.playbook_types.begin(),
                                        reference.playbook_types.end());
  const std::set<std::string> gen_types(generated.playbook_types.begin(),
                                        generated.playbook_types.end());
  add_vocabulary_comparison(report.metadata_fields, "/playbook_types", ref_types,
                            gen_types);
  const std::set<std::string> ref_acts(reference.playbook_activities.begin(),
                                       reference.playbook_activities.end());
  const std::set<std::string> gen_acts(generated.playbook_activities.begin(),
                                       generated.playbook_activities.end());
  add_vocabulary_comparison(report.metadata_fields, "/playbook_activities",
                            ref_acts, gen_acts);

  // Workflow graph + GED; the optimal node mapping doubles as the step
  // matching for field comparisons so string and graph scores agree.
  const WorkflowGraph gen_graph = build_workflow_graph(generated, options.edge_mode);
  const WorkflowGraph ref_graph = build_workflow_graph(reference, options.edge_mode);
  report.ged = ged(gen_graph, ref_graph, options.ged);

  std::vector<int> ref_to_gen(ref_graph.nodes.size(), -1);
  for (size_t i = 0; i < report.ged.node_mapping.size(); ++i)
    if (report.ged.node_mapping[i] >= 0)
      ref_to_gen[static_cast<size_t>(report.ged.node_mapping[i])] =
          static_cast<int>(i);

  for (size_t r = 0; r < ref_graph.nodes.size(); ++r) {
    const auto& ref_key = ref_graph.nodes[r].node_key;
    const WorkflowStep* ref_step = reference.find_step(ref_key);
    if (ref_step == nullptr) continue;
    StepFields truth = fields_of(*ref_step);
    StepFields gen;
    if (ref_to_gen[r] >= 0) {
      const auto& gen_key =
          gen_graph.nodes[static_cast<size_t>(ref_to_gen[r])].node_key;
      if (const WorkflowStep* gen_step = generated.find_step(gen_key))
        gen = fields_of(*gen_step);
    }
    const std::string base = "/workflow/" + ref_key;
    add_string_comparison(report.workflow_fields, base + "/name", truth.name,
                          gen.name);
    add_string_comparison(report.workflow_fields, base + "/description",
                          truth.description, gen.description);
    add_string_comparison(report.workflow_fields, base + "/condition",
                          truth.condition, gen.condition);
  }

  // Variables, matched by exact name.
  for (const auto& [name, ref_var] : reference.playbook_variables) {
    const VariableDef* gen_var = nullptr;
    for (const auto& [gen_name, candidate] : generated.playbook_variables)
      if (gen_name == name) gen_var = &candidate;
    const std::string base = "/playbook_variables/" + name;
    std::set<std::string> truth_type;
    if (!ref_var.var_type.empty()) truth_type.insert(ref_var.var_type);
    std::set<std::string> gen_type;
    if (gen_var && !gen_var->var_type.empty()) gen_type.insert(gen_var->var_type);
    add_vocabulary_comparison(report.variable_fields, base + "/type", truth_type,
                              gen_type);
    add_string_comparison(
        report.variable_fields, base + "/description",
        ref_var.description.value_or(""),
        gen_var ? gen_var->description.value_or("") : std::string());
  }

  report.metadata_accuracy = category_accuracy(report.metadata_fields);
  report.workflow_field_accuracy = category_accuracy(report.workflow_fields);
  report.variables_accuracy = category_accuracy(report.variable_fields);
  return report;
}

}  // namespace cacaotk
