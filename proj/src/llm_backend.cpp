#include "cacaotk/llm_backend.hpp"

#include <chrono>
#include <thread>

#include "cacaotk/errors.hpp"

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"

namespace cacaotk {

namespace {

OrderedJson request_to_json(const CompletionRequest& request) {
  OrderedJson j = OrderedJson::object();
  j["model_id"] = request.model_id;
  j["temperature"] = request.temperature;
  j["seed"] = request.seed;
  j["system_text"] = request.system_text;
  j["user_text"] = request.user_text;
  j["max_output_tokens"] = request.max_output_tokens;
  return j;
}

CompletionRequest request_from_json(const OrderedJson& j) {
  CompletionRequest request;
  request.model_id = j.at("model_id").get<std::string>();
  request.temperature = j.at("temperature").get<double>();
  request.seed = j.at("seed").get<long long>();
  request.system_text = j.at("system_text").get<std::string>();
  request.user_text = j.at("user_text").get<std::string>();
  if (j.contains("max_output_tokens"))
    request.max_output_tokens = j.at("max_output_tokens").get<int>();
  return request;
}

OrderedJson response_to_json(const CompletionResponse& response) {
  OrderedJson j = OrderedJson::object();
  j["text"] = response.text;
  j["model_id"] = response.model_id;
  j["tokens_in"] = response.tokens_in;
  j["tokens_out"] = response.tokens_out;
  j["latency_ms"] = response.latency_ms;
  return j;
}

CompletionResponse response_from_json(const OrderedJson& j) {
  CompletionResponse response;
  response.text = j.at("text").get<std::string>();
  response.model_id = j.value("model_id", std::string());
  response.tokens_in = j.at("tokens_in").get<long long>();
  response.tokens_out = j.at("tokens_out").get<long long>();
  response.latency_ms = j.at("latency_ms").get<long long>();
  return response;
}

struct ParsedUrl {
  std::string base;  // scheme://host[:port]
  std::string path;
};

ParsedUrl parse_url(const std::string& url) {
  const size_t scheme_end = url.find("://");
  if (scheme_end == std::string::npos)
    throw Error("endpoint URL must include a scheme: " + url);
  const size_t path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

std::string_view response_source_token(ResponseSource source) {
  switch (source) {
    case ResponseSource::remote:
      return "remote";
    case ResponseSource::cache:
      return "cache";
    case ResponseSource::cassette:
      return "cassette";
  }
  return "";
}

std::string request_fingerprint(const CompletionRequest& request) {
  OrderedJson canonical = OrderedJson::object();
  canonical["model_id"] = request.model_id;
  canonical["temperature"] = request.temperature;
  canonical["seed"] = request.seed;
  canonical["system_text"] = request.system_text;
  canonical["user_text"] = request.user_text;
  return sha256_hex(canonical.dump());
}

// ---- Cassette ----

Cassette Cassette::load(const std::filesystem::path& path) {
  Cassette cassette;
  OrderedJson doc;
  try {
    doc = OrderedJson::parse(read_file(path));
  } catch (const OrderedJson::parse_error& e) {
    throw CassetteCorrupt("cassette " + path.string() +
                          " is not valid JSON: " + e.what());
  }
  if (!doc.is_object() || !doc.contains("entries") ||
      !doc.at("entries").is_array())
    throw CassetteCorrupt("cassette " + path.string() +
                          " lacks an entries array");
  for (const auto& item : doc.at("entries")) {
    Entry entry;
    entry.fingerprint = item.at("fingerprint").get<std::string>();
    entry.request = request_from_json(item.at("request"));
    entry.response = response_from_json(item.at("response"));
    if (request_fingerprint(entry.request) != entry.fingerprint)
      throw CassetteCorrupt("cassette " + path.string() +
                            " entry fingerprint does not match its embedded "
                            "prompt: " +
                            entry.fingerprint);
    cassette.put(entry.request, entry.response);
  }
  return cassette;
}

void Cassette::save(const std::filesystem::path& path) const {
  OrderedJson doc = OrderedJson::object();
  doc["version"] = 1;
  OrderedJson entries = OrderedJson::array();
  for (const auto& entry : entries_) {
    OrderedJson item = OrderedJson::object();
    item["fingerprint"] = entry.fingerprint;
    item["request"] = request_to_json(entry.request);
    item["response"] = response_to_json(entry.response);
    entries.push_back(std::move(item));
  }
  doc["entries"] = std::move(entries);
  write_file(path, doc.dump(2) + "\n");
}

const Cassette::Entry* Cassette::find(const std::string& fingerprint) const {
  auto it = index_.find(fingerprint);
  return it == index_.end() ? nullptr : &entries_[it->second];
}

void Cassette::put(const CompletionRequest& request,
                   const CompletionResponse& response) {
  const std::string fingerprint = request_fingerprint(request);
  auto it = index_.find(fingerprint);
  if (it != index_.end()) {
    entries_[it->second].response = response;
    return;
  }
  index_[fingerprint] = entries_.size();
  entries_.push_back({fingerprint, request, response});
}

// ---- ReplayBackend ----

CompletionResponse ReplayBackend::complete(const CompletionRequest& request) {
  const std::string fingerprint = request_fingerprint(request);
  {
    std::lock_guard<std::mutex> lock(mutex_);
    accesses_.push_back(fingerprint);
  }
  const Cassette::Entry* entry = cassette_.find(fingerprint);
  if (entry == nullptr)
    throw ReplayMiss("cassette has no entry for fingerprint " + fingerprint,
                     fingerprint);
  CompletionResponse response = entry->response;
  response.source = ResponseSource::cassette;
  if (response.model_id.empty()) response.model_id = request.model_id;
  return response;
}

std::vector<std::string> ReplayBackend::access_log() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return accesses_;
}

// ---- RemoteBackend ----

CompletionResponse RemoteBackend::complete(const CompletionRequest& request) {
  const ParsedUrl url = parse_url(config_.endpoint);
  OrderedJson body = OrderedJson::object();
  body["model"] = request.model_id;
  OrderedJson messages = OrderedJson::array();
  if (!request.system_text.empty()) {
    OrderedJson system = OrderedJson::object();
    system["role"] = "system";
    system["content"] = request.system_text;
    messages.push_back(std::move(system));
  }
  OrderedJson user = OrderedJson::object();
  user["role"] = "user";
  user["content"] = request.user_text;
  messages.push_back(std::move(user));
  body["messages"] = std::move(messages);
  body["temperature"] = request.temperature;
  body["seed"] = request.seed;
  body["max_tokens"] = request.max_output_tokens;
  const std::string payload = body.dump();

  int delay_ms = config_.retry.base_delay_ms;
  std::string last_error = "no attempts made";
  bool saw_timeout = false;
  for (int attempt = 0; attempt < config_.retry.attempts; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms));
      delay_ms *= 2;
    }
    httplib::Client client(url.base);
    client.set_connection_timeout(std::chrono::duration<double>(
        config_.timeout_seconds));
    client.set_read_timeout(std::chrono::duration<double>(
        config_.timeout_seconds));
    httplib::Headers headers;
    if (!config_.api_key.empty())
      headers.emplace("Authorization", "Bearer " + config_.api_key);

    const auto started = std::chrono::steady_clock::now();
    httplib::Result result =
        client.Post(url.path, headers, payload, "application/json");
    const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                             std::chrono::steady_clock::now() - started)
                             .count();
    if (!result) {
      saw_timeout = result.error() == httplib::Error::ConnectionTimeout ||
                    result.error() == httplib::Error::Read;
      last_error = httplib::to_string(result.error());
      continue;  // transport error: retry
    }
    if (result->status == 429 || result->status >= 500) {
      last_error = "HTTP " + std::to_string(result->status);
      continue;
    }
    if (result->status != 200)
      throw RemoteError("backend returned HTTP " + std::to_string(result->status),
                        result->status, result->body);

    OrderedJson parsed;
    try {
      parsed = OrderedJson::parse(result->body);
    } catch (const OrderedJson::parse_error&) {
      throw RemoteError("backend returned unparseable JSON", result->status,
                        result->body);
    }
    CompletionResponse response;
    try {
      response.text = parsed.at("choices").at(0).at("message").at("content")
                          .get<std::string>();
    } catch (const OrderedJson::exception&) {
      throw RemoteError("backend response lacks choices[0].message.content",
                        result->status, result->body);
    }
    response.model_id = request.model_id;
    if (parsed.contains("usage")) {
      response.tokens_in = parsed["usage"].value("prompt_tokens", 0LL);
      response.tokens_out = parsed["usage"].value("completion_tokens", 0LL);
    }
    response.latency_ms = elapsed;
    response.source = ResponseSource::remote;
    return response;
  }
  if (saw_timeout)
    throw Timeout("remote backend timed out after " +
                  std::to_string(config_.retry.attempts) +
                  " attempts: " + last_error);
  throw RemoteError("remote backend failed after " +
                        std::to_string(config_.retry.attempts) +
                        " attempts: " + last_error,
                    0, "");
}

// ---- FileCache ----

FileCache::FileCache(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::filesystem::create_directories(dir_);
}

std::optional<CompletionResponse> FileCache::get(
    const std::string& fingerprint) const {
  const auto path = dir_ / (fingerprint + ".json");
  if (!std::filesystem::exists(path)) return std::nullopt;
  const OrderedJson doc = OrderedJson::parse(read_file(path));
  return response_from_json(doc.at("response"));
}

void FileCache::put(const std::string& fingerprint,
                    const CompletionRequest& request,
                    const CompletionResponse& response) {
  std::lock_guard<std::mutex> lock(write_mutex_);
  OrderedJson doc = OrderedJson::object();
  doc["fingerprint"] = fingerprint;
  doc["request"] = request_to_json(request);
  doc["response"] = response_to_json(response);
  const auto final_path = dir_ / (fingerprint + ".json");
  const auto temp_path = dir_ / (fingerprint + ".json.tmp");
  write_file(temp_path, doc.dump(2) + "\n");
  std::filesystem::rename(temp_path, final_path);
}

size_t FileCache::entry_count() const {
  size_t count = 0;
  for (const auto& entry : std::filesystem::directory_iterator(dir_))
    if (entry.path().extension() == ".json") ++count;
  return count;
}

void FileCache::clear() {
  for (const auto& entry : std::filesystem::directory_iterator(dir_))
    if (entry.path().extension() == ".json")
      std::filesystem::remove(entry.path());
}

// ---- CacheThroughBackend ----

CompletionResponse CacheThroughBackend::complete(
    const CompletionRequest& request) {
  const std::string fingerprint = request_fingerprint(request);
  if (auto hit = cache_->get(fingerprint)) {
    hit->source = ResponseSource::cache;
    if (hit->model_id.empty()) hit->model_id = request.model_id;
    return *hit;
  }
  CompletionResponse response = inner_->complete(request);
  cache_->put(fingerprint, request, response);
  return response;
}

// ---- RecordingBackend ----

RecordingBackend::RecordingBackend(std::unique_ptr<CompletionBackend> inner,
                                   std::filesystem::path cassette_path)
    : inner_(std::move(inner)), path_(std::move(cassette_path)) {
  if (std::filesystem::exists(path_)) cassette_ = Cassette::load(path_);
}

CompletionResponse RecordingBackend::complete(const CompletionRequest& request) {
  CompletionResponse response = inner_->complete(request);
  std::lock_guard<std::mutex> lock(mutex_);
  cassette_.put(request, response);
  cassette_.save(path_);  // persist after every exchange
  return response;
}

// ---- pricing / usage ----

PricingConfig PricingConfig::load(const std::filesystem::path& path) {
  PricingConfig config;
  const OrderedJson doc = OrderedJson::parse(read_file(path));
  for (const auto& [model, rates] : doc.at("models").items()) {
    auto parse_rate = [](const OrderedJson& value) {
      // Accept both "0.15" and 0.15; the dump of a JSON number is its
      // shortest decimal form, which parses exactly.
      return decimal_to_rational(value.is_string() ? value.get<std::string>()
                                                   : value.dump());
    };
    config.models[model] = {parse_rate(rates.at("rate_in")),
                            parse_rate(rates.at("rate_out"))};
  }
  return config;
}

const ModelRate& PricingConfig::rate_for(const std::string& model_id) const {
  auto it = models.find(model_id);
  if (it == models.end())
    throw UnknownModelPrice("no pricing configured for model " + model_id,
                            model_id);
  return it->second;
}

void UsageTotals::add(const UsageTotals& other) {
  calls += other.calls;
  tokens_in += other.tokens_in;
  tokens_out += other.tokens_out;
  cost_usd += other.cost_usd;
}

OrderedJson UsageReport::to_json() const {
  auto totals_json = [](const UsageTotals& totals) {
    OrderedJson j = OrderedJson::object();
    j["calls"] = totals.calls;
    j["tokens_in"] = totals.tokens_in;
    j["tokens_out"] = totals.tokens_out;
    j["cost_usd"] = rational_to_decimal(totals.cost_usd, 6);
    return j;
  };
  OrderedJson out = OrderedJson::object();
  OrderedJson per = OrderedJson::object();
  for (const auto& [name, totals] : per_playbook) per[name] = totals_json(totals);
  out["per_playbook"] = std::move(per);
  out["total"] = totals_json(total);
  return out;
}

UsageReport usage_report(
    const std::vector<std::pair<std::string, std::vector<CompletionResponse>>>&
        playbook_responses,
    const PricingConfig& pricing) {
  UsageReport report;
  for (const auto& [playbook, responses] : playbook_responses) {
    UsageTotals totals;
    for (const auto& response : responses) {
      const ModelRate& rate = pricing.rate_for(response.model_id);
      totals.calls += 1;
      totals.tokens_in += response.tokens_in;
      totals.tokens_out += response.tokens_out;
      totals.cost_usd += (Rational(response.tokens_in) * rate.rate_in +
                          Rational(response.tokens_out) * rate.rate_out) /
                         Rational(1000000);
    }
    report.per_playbook.emplace_back(playbook, totals);
    report.total.add(totals);
  }
  return report;
}

}  // namespace cacaotk
