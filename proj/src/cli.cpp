#include "cacaotk/cli.hpp"

#include <atomic>
#include <cstdlib>
#include <iostream>
#include <thread>

#include "CLI11.hpp"
#include "cacaotk/cacao_model.hpp"
#include "cacaotk/errors.hpp"
#include "cacaotk/ingest.hpp"
#include "cacaotk/llm_backend.hpp"
#include "cacaotk/metrics.hpp"
#include "cacaotk/orchestrator.hpp"
#include "cacaotk/prompt_engine.hpp"
#include "cacaotk/schema_validator.hpp"

#ifndef CACAOTK_DEFAULT_DATA_DIR
#define CACAOTK_DEFAULT_DATA_DIR ""
#endif

namespace cacaotk::cli {

namespace {

namespace fs = std::filesystem;

struct GlobalOptions {
  std::string config_path;
  std::string data_dir;
  bool verbose = false;
  bool json = false;
};

// Precedence: command-line flag > environment variable > config file.
class Settings {
 public:
  Settings(const GlobalOptions& global) {
    if (!global.config_path.empty())
      config_ = OrderedJson::parse(read_file(global.config_path));
  }

  std::string resolve(const std::string& flag_value, const char* env_var,
                      const char* config_key,
                      const std::string& fallback = "") const {
    if (!flag_value.empty()) return flag_value;
    if (const char* env = std::getenv(env_var); env && *env) return env;
    if (config_.contains(config_key) && config_.at(config_key).is_string())
      return config_.at(config_key).get<std::string>();
    return fallback;
  }

 private:
  OrderedJson config_ = OrderedJson::object();
};

std::string resolve_data_dir(const GlobalOptions& global,
                             const Settings& settings) {
  const std::string dir = settings.resolve(global.data_dir, "CACAOTK_DATA_DIR",
                                           "data_dir", CACAOTK_DEFAULT_DATA_DIR);
  if (dir.empty() || !fs::exists(dir))
    throw Error("data directory not found; pass --data-dir or set "
                "CACAOTK_DATA_DIR (looked at '" +
                dir + "')");
  return dir;
}

void emit(const std::string& text, const std::string& out_path) {
  if (out_path.empty())
    std::cout << text;
  else
    write_file(out_path, text);
}

struct BackendOptions {
  std::string mode = "remote";
  std::string cassette;
  std::string cache_dir;
  std::string endpoint;
  std::string model;
  double timeout_seconds = 60.0;
};

void add_backend_flags(CLI::App* cmd, BackendOptions& opts) {
  cmd->add_option("--backend", opts.mode, "Completion backend")
      ->check(CLI::IsMember({"remote", "replay", "cache-through"}))
      ->capture_default_str();
  cmd->add_option("--cassette", opts.cassette, "Cassette file for replay");
  cmd->add_option("--cache", opts.cache_dir, "Cache directory");
  cmd->add_option("--endpoint", opts.endpoint, "Chat-completion endpoint URL");
  cmd->add_option("--model", opts.model, "Model identifier");
  cmd->add_option("--timeout", opts.timeout_seconds, "Remote timeout seconds");
}

std::unique_ptr<CompletionBackend> make_backend(const BackendOptions& opts,
                                                const Settings& settings) {
  if (opts.mode == "replay") {
    if (opts.cassette.empty())
      throw Error("--backend replay requires --cassette");
    return std::make_unique<ReplayBackend>(Cassette::load(opts.cassette));
  }
  RemoteConfig remote;
  remote.endpoint = settings.resolve(opts.endpoint, "CACAOTK_ENDPOINT",
                                     "endpoint");
  if (remote.endpoint.empty())
    throw Error("no endpoint configured; pass --endpoint or set "
                "CACAOTK_ENDPOINT");
  if (const char* key = std::getenv("CACAOTK_API_KEY")) remote.api_key = key;
  remote.timeout_seconds = opts.timeout_seconds;
  auto inner = std::make_unique<RemoteBackend>(remote);
  if (opts.mode == "cache-through") {
    if (opts.cache_dir.empty())
      throw Error("--backend cache-through requires --cache");
    return std::make_unique<CacheThroughBackend>(
        std::move(inner), std::make_shared<FileCache>(opts.cache_dir));
  }
  return inner;
}

std::string resolve_model(const BackendOptions& opts, const Settings& settings) {
  return settings.resolve(opts.model, "CACAOTK_MODEL", "model", "gpt-4o-mini");
}

// ---- validate ----

int run_validate(const GlobalOptions& global, const Settings& settings,
                 const std::string& input, const std::string& schema_set,
                 bool as_json, const std::string& out_path) {
  const fs::path schemas =
      fs::path(resolve_data_dir(global, settings)) / "schemas" / "cacao";
  SchemaValidator validator(schemas, schema_set == "strict"
                                         ? SchemaValidator::SchemaSet::strict
                                         : SchemaValidator::SchemaSet::patched);
  const ValidationReport report = validator.validate(read_file(input));
  if (as_json || global.json) {
    emit(report.to_json().dump(2) + "\n", out_path);
  } else {
    std::string text = std::to_string(report.syntax_err_count()) + " issues\n";
    for (const auto& issue : report.issues)
      text += "  " + issue.path + "  [" +
              std::string(issue_kind_token(issue.kind)) + "] " + issue.message +
              "\n";
    emit(text, out_path);
  }
  return report.clean() ? 0 : 1;
}

// ---- transform / record / refine ----

struct TransformOptions {
  std::string input;
  std::string out;
  std::string patterns = "all";
  bool no_decompose = false;
  int max_refine = 5;
  std::string notes_path;
  std::string trace_path;
  BackendOptions backend;
};

TransformConfig to_config(const TransformOptions& opts,
                          const Settings& settings) {
  TransformConfig config;
  config.patterns = PatternSet::parse(opts.patterns);
  config.decompose = !opts.no_decompose;
  config.max_refine_iterations = opts.max_refine;
  config.model_id = resolve_model(opts.backend, settings);
  config.deterministic_ids = opts.backend.mode == "replay";
  return config;
}

std::optional<std::string> load_notes(const std::string& path) {
  if (path.empty()) return std::nullopt;
  return read_file(path);
}

void write_trace(const std::string& path, const TransformResult& result) {
  if (path.empty()) return;
  write_file(path, result.trace_json().dump(2) + "\n");
}

int run_transform(const GlobalOptions& global, const Settings& settings,
                  const TransformOptions& opts, bool record_cassette) {
  const fs::path data_dir = resolve_data_dir(global, settings);
  PromptEngine prompts(data_dir);
  SchemaValidator validator(data_dir / "schemas" / "cacao");
  std::unique_ptr<CompletionBackend> backend;
  if (record_cassette) {
    if (opts.backend.cassette.empty())
      throw Error("record requires --cassette");
    BackendOptions remote_opts = opts.backend;
    remote_opts.mode = "remote";
    backend = std::make_unique<RecordingBackend>(
        make_backend(remote_opts, settings), opts.backend.cassette);
  } else {
    backend = make_backend(opts.backend, settings);
  }

  Orchestrator orchestrator(prompts, validator, *backend);
  const LegacyDocument legacy = load_legacy(opts.input);
  const TransformResult result = orchestrator.transform(
      legacy, to_config(opts, settings), load_notes(opts.notes_path));

  write_trace(opts.trace_path, result);
  if (!opts.out.empty()) write_file(opts.out, result.playbook_json);
  if (global.json) {
    OrderedJson summary = OrderedJson::object();
    summary["syntax_err_count"] = result.validation.syntax_err_count();
    summary["trace"] = result.trace_json();
    summary["output"] = opts.out;
    std::cout << summary.dump(2) << "\n";
  } else {
    std::cout << "final syntax errors: " << result.validation.syntax_err_count()
              << " after " << result.refinement_trace.size() - 1
              << " refinement iteration(s), " << result.responses.size()
              << " completion call(s)\n";
    if (opts.out.empty()) std::cout << result.playbook_json;
  }
  return result.validation.clean() ? 0 : 1;
}

int run_refine(const GlobalOptions& global, const Settings& settings,
               const TransformOptions& opts, const std::string& candidate_path,
               bool interactive) {
  const fs::path data_dir = resolve_data_dir(global, settings);
  PromptEngine prompts(data_dir);
  SchemaValidator validator(data_dir / "schemas" / "cacao");
  auto backend = make_backend(opts.backend, settings);
  Orchestrator orchestrator(prompts, validator, *backend);

  const LegacyDocument legacy = load_legacy(opts.input);
  const std::string candidate = read_file(candidate_path);
  const ValidationReport report = validator.validate(candidate);

  AnalystCallback callback;
  if (interactive) {
    callback = [](int iteration,
                  const ValidationReport& current) -> std::optional<std::string> {
      std::cerr << "refinement iteration " << iteration << ": "
                << current.syntax_err_count() << " issue(s) outstanding\n";
      for (const auto& issue : current.issues)
        std::cerr << "  " << issue.path << ": " << issue.message << "\n";
      std::cerr << "analyst notes (empty line to continue): " << std::flush;
      std::string line;
      if (!std::getline(std::cin, line) || trim(line).empty())
        return std::nullopt;
      return line;
    };
  }

  std::vector<RefineTracePoint> partial;
  TransformResult result;
  try {
    result = orchestrator.refine(legacy, candidate, report,
                                 to_config(opts, settings),
                                 load_notes(opts.notes_path), callback, &partial);
  } catch (...) {
    if (!opts.trace_path.empty()) {
      OrderedJson trace = OrderedJson::object();
      OrderedJson iterations = OrderedJson::array();
      for (const auto& point : partial) {
        OrderedJson item = OrderedJson::object();
        item["iteration"] = point.iteration;
        item["syntax_err_count"] = point.syntax_err_count;
        iterations.push_back(std::move(item));
      }
      trace["iterations"] = std::move(iterations);
      trace["aborted"] = true;
      write_file(opts.trace_path, trace.dump(2) + "\n");
    }
    throw;
  }

  write_trace(opts.trace_path, result);
  if (!opts.out.empty()) write_file(opts.out, result.playbook_json);
  if (global.json) {
    std::cout << result.trace_json().dump(2) << "\n";
  } else {
    std::cout << "refinement trace:";
    for (const auto& point : result.refinement_trace)
      std::cout << " " << point.syntax_err_count;
    std::cout << "\n";
    if (opts.out.empty()) std::cout << result.playbook_json;
  }
  return result.validation.clean() ? 0 : 1;
}

// ---- evaluate ----

int run_evaluate(const GlobalOptions& global, const Settings& settings,
                 const std::string& generated_path,
                 const std::string& reference_path,
                 const std::string& edge_labels, bool as_json,
                 const std::string& out_path) {
  const fs::path data_dir = resolve_data_dir(global, settings);
  SchemaValidator validator(data_dir / "schemas" / "cacao");
  const std::string generated_text = read_file(generated_path);
  const PlaybookDocument generated = parse_playbook(generated_text);
  const PlaybookDocument reference = parse_playbook(read_file(reference_path));

  EvalOptions options;
  options.edge_mode =
      edge_labels == "paper" ? EdgeLabelMode::paper : EdgeLabelMode::all;
  EvaluationReport report = evaluate_pair(generated, reference, options);
  report.syntax_err_count = validator.validate(generated_text).syntax_err_count();

  if (as_json || global.json) {
    emit(report.to_json().dump(2) + "\n", out_path);
  } else {
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "metadata %.4f  workflow %.4f  variables %.4f  "
                  "normalized GED %.4f%s  syntax errors %d\n",
                  report.metadata_accuracy, report.workflow_field_accuracy,
                  report.variables_accuracy, report.ged.normalized,
                  report.ged.exact ? "" : " (bound)", *report.syntax_err_count);
    emit(buf, out_path);
  }
  return 0;
}

// ---- batch-eval ----

struct BatchOptions {
  std::string manifest;
  std::string configs = "all";
  std::string pricing;
  int jobs = 1;
  int max_refine = 5;
  std::string out;
  std::string edge_labels = "all";
  BackendOptions backend;
};

struct BatchRow {
  std::string config_name;
  Rational avg_syn_err{0};
  double metadata = 0;
  double workflow = 0;
  double variables = 0;
  double ged = 0;
  UsageTotals usage;
  bool cost_known = false;
};

int run_batch_eval(const GlobalOptions& global, const Settings& settings,
                   const BatchOptions& opts) {
  const fs::path data_dir = resolve_data_dir(global, settings);
  PromptEngine prompts(data_dir);
  SchemaValidator validator(data_dir / "schemas" / "cacao");
  auto backend = make_backend(opts.backend, settings);
  const DatasetManifest manifest = load_manifest(opts.manifest);

  std::optional<PricingConfig> pricing;
  if (!opts.pricing.empty()) pricing = PricingConfig::load(opts.pricing);

  std::vector<std::string> config_names = split(opts.configs, ';');
  std::vector<BatchRow> rows;

  for (const auto& raw_name : config_names) {
    const std::string config_name = trim(raw_name);
    struct EntryResult {
      int syntax_errors = 0;
      EvaluationReport evaluation;
      std::vector<CompletionResponse> responses;
      std::string error;
    };
    std::vector<EntryResult> results(manifest.entries.size());

    std::atomic<size_t> next{0};
    auto worker = [&]() {
      Orchestrator orchestrator(prompts, validator, *backend);
      while (true) {
        const size_t index = next.fetch_add(1);
        if (index >= manifest.entries.size()) return;
        const ManifestEntry& entry = manifest.entries[index];
        EntryResult& slot = results[index];
        try {
          if (!entry.reference_path)
            throw Error("manifest entry '" + entry.name +
                        "' has no reference; batch-eval requires one");
          TransformOptions topts;
          topts.patterns = config_name;
          topts.max_refine = opts.max_refine;
          topts.backend = opts.backend;
          const TransformResult result = orchestrator.transform(
              load_legacy(entry.legacy_path), to_config(topts, settings));
          const PlaybookDocument reference =
              parse_playbook(read_file(*entry.reference_path));
          EvalOptions eval_options;
          eval_options.edge_mode = opts.edge_labels == "paper"
                                       ? EdgeLabelMode::paper
                                       : EdgeLabelMode::all;
          slot.evaluation =
              evaluate_pair(result.playbook, reference, eval_options);
          slot.syntax_errors = result.validation.syntax_err_count();
          slot.responses = result.responses;
        } catch (const std::exception& e) {
          slot.error = e.what();
        }
      }
    };
    std::vector<std::thread> pool;
    const int jobs = std::max(1, opts.jobs);
    for (int i = 1; i < jobs; ++i) pool.emplace_back(worker);
    worker();
    for (auto& thread : pool) thread.join();

    for (const auto& result : results)
      if (!result.error.empty()) throw Error(result.error);

    BatchRow row;
    row.config_name = config_name;
    long long total_errors = 0;
    std::vector<std::pair<std::string, std::vector<CompletionResponse>>> groups;
    for (size_t i = 0; i < results.size(); ++i) {
      total_errors += results[i].syntax_errors;
      row.metadata += results[i].evaluation.metadata_accuracy;
      row.workflow += results[i].evaluation.workflow_field_accuracy;
      row.variables += results[i].evaluation.variables_accuracy;
      row.ged += results[i].evaluation.ged.normalized;
      groups.emplace_back(manifest.entries[i].name, results[i].responses);
    }
    const auto n = static_cast<double>(results.size());
    row.avg_syn_err =
        Rational(total_errors, static_cast<long long>(results.size()));
    row.metadata /= n;
    row.workflow /= n;
    row.variables /= n;
    row.ged /= n;
    if (pricing) {
      row.usage = usage_report(groups, *pricing).total;
      row.cost_known = true;
    } else {
      for (const auto& [name, responses] : groups) {
        (void)name;
        for (const auto& response : responses) {
          row.usage.calls += 1;
          row.usage.tokens_in += response.tokens_in;
          row.usage.tokens_out += response.tokens_out;
        }
      }
    }
    rows.push_back(std::move(row));
  }

  if (global.json) {
    OrderedJson out = OrderedJson::array();
    for (const auto& row : rows) {
      OrderedJson item = OrderedJson::object();
      item["config"] = row.config_name;
      item["avg_syn_err"] = rational_to_decimal(row.avg_syn_err, 2);
      item["metadata_accuracy"] = std::round(row.metadata * 1e4) / 1e4;
      item["workflow_field_accuracy"] = std::round(row.workflow * 1e4) / 1e4;
      item["variables_accuracy"] = std::round(row.variables * 1e4) / 1e4;
      item["normalized_ged"] = std::round(row.ged * 1e4) / 1e4;
      item["calls"] = row.usage.calls;
      item["tokens_in"] = row.usage.tokens_in;
      item["tokens_out"] = row.usage.tokens_out;
      if (row.cost_known)
        item["cost_usd"] = rational_to_decimal(row.usage.cost_usd, 6);
      out.push_back(std::move(item));
    }
    emit(out.dump(2) + "\n", opts.out);
  } else {
    std::string text =
        "config            avg_syn_err  metadata  workflow  variables  "
        "norm_ged  cost_usd\n";
    for (const auto& row : rows) {
      char buf[256];
      std::snprintf(buf, sizeof(buf),
                    "%-17s %11s  %8.4f  %8.4f  %9.4f  %8.4f  %s\n",
                    row.config_name.c_str(),
                    rational_to_decimal(row.avg_syn_err, 2).c_str(),
                    row.metadata, row.workflow, row.variables, row.ged,
                    row.cost_known
                        ? rational_to_decimal(row.usage.cost_usd, 6).c_str()
                        : "-");
      text += buf;
    }
    emit(text, opts.out);
  }
  return 0;
}

// ---- cache maintenance ----

int run_cache(const std::string& action, const std::string& cache_dir) {
  if (cache_dir.empty()) throw Error("cache maintenance requires --cache");
  FileCache cache(cache_dir);
  if (action == "stats") {
    std::cout << cache.entry_count() << " cached completion(s) in "
              << cache.dir().string() << "\n";
  } else {
    cache.clear();
    std::cout << "cache cleared\n";
  }
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"Legacy SOAR playbook to CACAO 2.0 transformation toolkit"};
  app.require_subcommand(1);

  GlobalOptions global;
  app.add_option("--config", global.config_path, "JSON config file");
  app.add_option("--data-dir", global.data_dir,
                 "Directory holding templates/, snippets/, schemas/");
  app.add_flag("--verbose", global.verbose, "Verbose diagnostics");
  app.add_flag("--json", global.json, "Machine-readable output");

  // validate
  auto* validate_cmd = app.add_subcommand("validate",
                                          "Validate CACAO JSON against the "
                                          "patched schema set");
  std::string validate_input, validate_schema_set = "patched", validate_out;
  bool validate_json = false;
  validate_cmd->add_option("input", validate_input, "CACAO JSON file")
      ->required();
  validate_cmd->add_option("--schema-set", validate_schema_set, "Schema set")
      ->check(CLI::IsMember({"patched", "strict"}))
      ->capture_default_str();
  validate_cmd->add_flag("--json", validate_json, "JSON report");
  validate_cmd->add_option("--out", validate_out, "Write the report here");

  // transform
  auto* transform_cmd =
      app.add_subcommand("transform", "Transform a legacy playbook into CACAO");
  TransformOptions transform_opts;
  transform_cmd->add_option("--input", transform_opts.input, "Legacy playbook")
      ->required();
  transform_cmd->add_option("--out", transform_opts.out, "Output CACAO file");
  transform_cmd
      ->add_option("--patterns", transform_opts.patterns,
                   "Pattern preset or comma list "
                   "(persona,template,reasoning,knowledge,oneshot)")
      ->capture_default_str();
  transform_cmd->add_flag("--no-decompose", transform_opts.no_decompose,
                          "Single whole-playbook prompt");
  transform_cmd
      ->add_option("--max-refine", transform_opts.max_refine,
                   "Refinement iteration cap")
      ->capture_default_str();
  transform_cmd->add_option("--notes", transform_opts.notes_path,
                            "Analyst notes file for refinement prompts");
  transform_cmd->add_option("--trace", transform_opts.trace_path,
                            "Write the JSON refinement trace here");
  add_backend_flags(transform_cmd, transform_opts.backend);

  // refine
  auto* refine_cmd =
      app.add_subcommand("refine", "Iteratively repair a CACAO candidate");
  TransformOptions refine_opts;
  std::string refine_candidate;
  bool interactive = false;
  refine_cmd->add_option("--input", refine_opts.input, "Legacy playbook")
      ->required();
  refine_cmd->add_option("--candidate", refine_candidate, "CACAO candidate file")
      ->required();
  refine_cmd->add_option("--out", refine_opts.out, "Output CACAO file");
  refine_cmd
      ->add_option("--max-refine", refine_opts.max_refine,
                   "Refinement iteration cap")
      ->capture_default_str();
  refine_cmd->add_option("--notes", refine_opts.notes_path, "Analyst notes file");
  refine_cmd->add_option("--trace", refine_opts.trace_path, "Trace JSON file");
  refine_cmd->add_flag("--interactive-review", interactive,
                       "Pause per iteration for analyst notes on stdin");
  add_backend_flags(refine_cmd, refine_opts.backend);

  // evaluate
  auto* evaluate_cmd = app.add_subcommand(
      "evaluate", "Score a generated playbook against its reference");
  std::string eval_generated, eval_reference, eval_edge_labels = "all", eval_out;
  bool eval_json = false;
  evaluate_cmd->add_option("--generated", eval_generated, "Generated CACAO file")
      ->required();
  evaluate_cmd->add_option("--reference", eval_reference, "Reference CACAO file")
      ->required();
  evaluate_cmd
      ->add_option("--ged-edge-labels", eval_edge_labels,
                   "Which transition labels become graph edges")
      ->check(CLI::IsMember({"paper", "all"}))
      ->capture_default_str();
  evaluate_cmd->add_flag("--json", eval_json, "JSON report");
  evaluate_cmd->add_option("--out", eval_out, "Write the report here");

  // batch-eval
  auto* batch_cmd = app.add_subcommand(
      "batch-eval", "Transform and score a dataset per pattern configuration");
  BatchOptions batch_opts;
  batch_opts.backend.mode = "replay";
  batch_cmd->add_option("--manifest", batch_opts.manifest, "Dataset manifest")
      ->required();
  batch_cmd
      ->add_option("--configs", batch_opts.configs,
                   "Semicolon-separated configurations (baseline;persona;"
                   "reason;knowledge;oneshot;all-no-oneshot;all)")
      ->capture_default_str();
  batch_cmd->add_option("--pricing", batch_opts.pricing, "Pricing JSON file");
  batch_cmd->add_option("--jobs", batch_opts.jobs, "Parallel workers")
      ->capture_default_str();
  batch_cmd
      ->add_option("--max-refine", batch_opts.max_refine,
                   "Refinement iteration cap")
      ->capture_default_str();
  batch_cmd
      ->add_option("--ged-edge-labels", batch_opts.edge_labels,
                   "Which transition labels become graph edges")
      ->check(CLI::IsMember({"paper", "all"}))
      ->capture_default_str();
  batch_cmd->add_option("--out", batch_opts.out, "Write the table here");
  add_backend_flags(batch_cmd, batch_opts.backend);

  // record
  auto* record_cmd = app.add_subcommand(
      "record", "Run a remote transform while writing a cassette");
  TransformOptions record_opts;
  record_cmd->add_option("--input", record_opts.input, "Legacy playbook")
      ->required();
  record_cmd->add_option("--out", record_opts.out, "Output CACAO file");
  record_cmd
      ->add_option("--patterns", record_opts.patterns, "Pattern preset or list")
      ->capture_default_str();
  record_cmd->add_flag("--no-decompose", record_opts.no_decompose,
                       "Single whole-playbook prompt");
  record_cmd
      ->add_option("--max-refine", record_opts.max_refine,
                   "Refinement iteration cap")
      ->capture_default_str();
  add_backend_flags(record_cmd, record_opts.backend);
  record_cmd->get_option("--cassette")->required();

  // cache
  auto* cache_cmd = app.add_subcommand("cache", "Completion cache maintenance");
  cache_cmd->require_subcommand(1);
  std::string cache_dir;
  auto* cache_stats = cache_cmd->add_subcommand("stats", "Show cache size");
  auto* cache_clear = cache_cmd->add_subcommand("clear", "Delete cached entries");
  for (auto* sub : {cache_stats, cache_clear})
    sub->add_option("--cache", cache_dir, "Cache directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    Settings settings(global);
    if (validate_cmd->parsed())
      return run_validate(global, settings, validate_input, validate_schema_set,
                          validate_json, validate_out);
    if (transform_cmd->parsed())
      return run_transform(global, settings, transform_opts,
                           /*record_cassette=*/false);
    if (record_cmd->parsed()) {
      record_opts.backend.mode = "remote";
      return run_transform(global, settings, record_opts,
                           /*record_cassette=*/true);
    }
    if (refine_cmd->parsed())
      return run_refine(global, settings, refine_opts, refine_candidate,
                        interactive);
    if (evaluate_cmd->parsed())
      return run_evaluate(global, settings, eval_generated, eval_reference,
                          eval_edge_labels, eval_json, eval_out);
    if (batch_cmd->parsed()) return run_batch_eval(global, settings, batch_opts);
    if (cache_cmd->parsed())
      return run_cache(cache_stats->parsed() ? "stats" : "clear", cache_dir);
    return 2;
  } catch (const BackendError& e) {
    std::cerr << "backend error: " << e.what() << "\n";
    return 3;
  } catch (const UnreadableFile& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const MissingFile& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const MalformedManifest& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const UnparseableContent& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace cacaotk::cli
