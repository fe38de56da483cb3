#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "cacaotk/util.hpp"

namespace cacaotk {

enum class IssueKind {
  missing_required,
  type_mismatch,
  enum_violation,
  pattern_violation,
  unknown_step_kind,
  dangling_reference,
  mutual_exclusion,
};

std::string_view issue_kind_token(IssueKind kind);

struct ValidationIssue {
  std::string path;  // JSON pointer into the candidate (or the missing spot)
  IssueKind kind;
  std::string message;
  std::string schema_rule;  // stable identifier of the violated rule
};

struct ValidationReport {
  std::vector<ValidationIssue> issues;

  int syntax_err_count() const { return static_cast<int>(issues.size()); }
  bool clean() const { return issues.empty(); }
  bool contains(std::string_view path, IssueKind kind) const;
  OrderedJson to_json() const;
};

// Validates candidate CACAO JSON against the vendored schema set and the
// structural rules the schemas cannot express (dangling step references,
// workflow_start integrity, transition exclusivity, start/end counts).
//
// The schema set ships as data files: `strict.schema.json` is the full rule
// set, `patched.overlay.json` removes the requirements touching agents,
// targets and commands (the default evaluation scope). Issue granularity is
// one issue per violated rule per location.
class SchemaValidator {
 public:
  enum class SchemaSet { patched, strict };

  explicit SchemaValidator(const std::filesystem::path& schema_dir,
                           SchemaSet set = SchemaSet::patched);
  ~SchemaValidator();
  SchemaValidator(SchemaValidator&&) noexcept;
  SchemaValidator& operator=(SchemaValidator&&) noexcept;

  // Never throws on candidate content; all problems become report entries.
  // Malformed JSON yields a single type-mismatch issue at path "/".
  ValidationReport validate(std::string_view candidate_json) const;

  SchemaSet schema_set() const { return set_; }

  // Mean syntax_err_count over the reports, exact rational arithmetic.
  // Throws EmptyDataset when the list is empty.
  static Rational avg_syn_err(const std::vector<ValidationReport>& reports);

 private:
  struct CompiledPattern;

  void schema_check(const OrderedJson& instance, const Json& schema,
                    const std::string& path, const std::string& rule_base,
                    std::vector<ValidationIssue>& out) const;
  const Json& resolve_ref(const Json& schema, std::string& rule_base) const;
  bool matches(const std::string& pattern, const std::string& text) const;
  void check_step(const std::string& step_path, const std::string& step_key,
                  const OrderedJson& step, const OrderedJson& workflow,
                  std::vector<ValidationIssue>& out) const;

  SchemaSet set_;
  Json schema_;
  std::vector<CompiledPattern> patterns_;
};

}  // namespace cacaotk
