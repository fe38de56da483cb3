#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "cacaotk/util.hpp"

namespace cacaotk {

struct CompletionRequest {
  std::string model_id;
  std::string system_text;
  std::string user_text;
  // Reproducibility controls: greedy decoding and a fixed seed by default.
  double temperature = 0.0;
  long long seed = 42;
  int max_output_tokens = 4096;
};

enum class ResponseSource { remote, cache, cassette };

std::string_view response_source_token(ResponseSource source);

struct CompletionResponse {
  std::string text;
  std::string model_id;
  long long tokens_in = 0;
  long long tokens_out = 0;
  long long latency_ms = 0;
  ResponseSource source = ResponseSource::remote;
};

// SHA-256 over the canonical JSON encoding of (model_id, temperature, seed,
// system_text, user_text), in that key order. Equal inputs always fingerprint
// equally; max_output_tokens deliberately does not participate.
std::string request_fingerprint(const CompletionRequest& request);

class CompletionBackend {
 public:
  virtual ~CompletionBackend() = default;
  virtual CompletionResponse complete(const CompletionRequest& request) = 0;
  virtual std::string describe() const = 0;
};

// Ordered fingerprint -> response map stored as a JSON file with the full
// plaintext prompts embedded for auditability. Loading recomputes every
// fingerprint and rejects the file on mismatch.
class Cassette {
 public:
  struct Entry {
    std::string fingerprint;
    CompletionRequest request;
    CompletionResponse response;
  };

  Cassette() = default;
  static Cassette load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  const Entry* find(const std::string& fingerprint) const;
  void put(const CompletionRequest& request, const CompletionResponse& response);
  size_t size() const { return entries_.size(); }
  const std::vector<Entry>& entries() const { return entries_; }

 private:
  std::vector<Entry> entries_;
  std::map<std::string, size_t> index_;
};

// Deterministic offline playback. Holds no HTTP client whatsoever, so no
// network activity can occur in replay mode by construction.
class ReplayBackend : public CompletionBackend {
 public:
  explicit ReplayBackend(Cassette cassette) : cassette_(std::move(cassette)) {}

  // Throws ReplayMiss when the cassette lacks the request.
  CompletionResponse complete(const CompletionRequest& request) override;
  std::string describe() const override { return "replay"; }

  // Fingerprints served, in call order; the call-count oracle for tests.
  std::vector<std::string> access_log() const;

 private:
  Cassette cassette_;
  mutable std::mutex mutex_;
  std::vector<std::string> accesses_;
};

struct RetryPolicy {
  int attempts = 3;
  int base_delay_ms = 250;  // doubles after each failed attempt
};

struct RemoteConfig {
  // Full chat-completion-style endpoint URL, e.g.
  // "https://api.openai.com/v1/chat/completions".
  std::string endpoint;
  std::string api_key;  // resolved from the environment by the CLI
  double timeout_seconds = 60.0;
  RetryPolicy retry;
};

// Single configurable HTTP endpoint speaking the common chat-completion
// wire shape; no vendor SDKs. Retries transport errors and 429/5xx with
// exponential backoff, then throws RemoteError or Timeout.
class RemoteBackend : public CompletionBackend {
 public:
  explicit RemoteBackend(RemoteConfig config) : config_(std::move(config)) {}
  CompletionResponse complete(const CompletionRequest& request) override;
  std::string describe() const override { return "remote"; }

 private:
  RemoteConfig config_;
};

// Persistent fingerprint-keyed store, one JSON file per entry under a
// directory. Writes are serialized and atomic (temp file + rename); reads
// are lock-free, so concurrent workers can share one cache.
class FileCache {
 public:
  explicit FileCache(std::filesystem::path dir);
  std::optional<CompletionResponse> get(const std::string& fingerprint) const;
  void put(const std::string& fingerprint, const CompletionRequest& request,
           const CompletionResponse& response);
  size_t entry_count() const;
  void clear();
  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
  std::mutex write_mutex_;
};

// Checks the cache before delegating to the inner backend and stores every
// miss, so repeated runs never re-issue identical requests.
class CacheThroughBackend : public CompletionBackend {
 public:
  CacheThroughBackend(std::unique_ptr<CompletionBackend> inner,
                      std::shared_ptr<FileCache> cache)
      : inner_(std::move(inner)), cache_(std::move(cache)) {}
  CompletionResponse complete(const CompletionRequest& request) override;
  std::string describe() const override {
    return "cache-through(" + inner_->describe() + ")";
  }

 private:
  std::unique_ptr<CompletionBackend> inner_;
  std::shared_ptr<FileCache> cache_;
};

// Delegates to the inner (remote) backend and appends every exchange to a
// cassette file; backs the `record` subcommand.
class RecordingBackend : public CompletionBackend {
 public:
  RecordingBackend(std::unique_ptr<CompletionBackend> inner,
                   std::filesystem::path cassette_path);
  CompletionResponse complete(const CompletionRequest& request) override;
  std::string describe() const override {
    return "record(" + inner_->describe() + ")";
  }

 private:
  std::unique_ptr<CompletionBackend> inner_;
  std::filesystem::path path_;
  Cassette cassette_;
  std::mutex mutex_;
};

// USD per million tokens, kept as exact rationals.
struct ModelRate {
  Rational rate_in{0};
  Rational rate_out{0};
};

struct PricingConfig {
  std::map<std::string, ModelRate> models;

  static PricingConfig load(const std::filesystem::path& path);
  // Throws UnknownModelPrice.
  const ModelRate& rate_for(const std::string& model_id) const;
};

struct UsageTotals {
  long long calls = 0;
  long long tokens_in = 0;
  long long tokens_out = 0;
  Rational cost_usd{0};

  void add(const UsageTotals& other);
};

struct UsageReport {
  std::vector<std::pair<std::string, UsageTotals>> per_playbook;
  UsageTotals total;

  OrderedJson to_json() const;
};

// cost = sum(tokens_in * rate_in + tokens_out * rate_out) / 1e6 per group,
// exact decimal arithmetic. Throws UnknownModelPrice for unpriced models.
UsageReport usage_report(
    const std::vector<std::pair<std::string, std::vector<CompletionResponse>>>&
        playbook_responses,
    const PricingConfig& pricing);

}  // namespace cacaotk
