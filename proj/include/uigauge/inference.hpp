#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "uigauge/config.hpp"
#include "uigauge/raster.hpp"

namespace uigauge {

enum class WireProtocol { OpenAIChat, RawTemplate };

struct BackendConfig {
  std::string name;
  std::string endpoint_url;
  std::string model_id;
  std::string auth_token_env;  // name of the variable holding the bearer token; empty for none
  double temperature = 0.0;
  int max_tokens = 1024;
  double timeout_s = 60.0;
  int max_retries = 3;
  int max_concurrency = 4;
  WireProtocol protocol = WireProtocol::OpenAIChat;
  // RawTemplate only: request body with {{model}}, {{prompt}}, {{image_b64}},
  // {{image_mime}}, {{temperature}}, {{max_tokens}} substituted as JSON values,
  // and a JSON pointer to the text (or vector, for embeddings) in the reply.
  std::string raw_request_template;
  std::string raw_response_pointer = "/response";
  double backoff_initial_s = 1.0;
  double backoff_factor = 2.0;
  double backoff_max_s = 30.0;

  /// Throws ConfigError on temperature < 0, max_concurrency < 1, etc.
  void validate() const;
};

/// Reads a backend table (`[backends.<name>]`). Secret values are rejected:
/// tokens must come from the variable named by `auth_token_env`.
BackendConfig backend_from_json(const std::string& name, const nlohmann::json& table);
nlohmann::json to_json(const BackendConfig& config);

struct CacheKey {
  std::string model_id;
  std::string image_hash;   // sha256 of the encoded image bytes, "" when no image
  std::string prompt_hash;  // sha256 of the prompt text
  std::string params_hash;  // sha256 of the canonical sampling-parameter JSON

  /// Content address: sha256 over the four fields.
  std::string digest() const;
};

/// Content-addressed JSONL response cache. Lines are
/// {"key", "request_digest", "response", "timestamp"}; the file is only ever
/// appended to and the last line for a key wins on load. Without a path the
/// cache lives in memory only.
class ResponseCache {
 public:
  ResponseCache() = default;
  explicit ResponseCache(std::filesystem::path path);

  std::optional<nlohmann::json> lookup(const std::string& key) const;
  void store(const std::string& key, const std::string& request_digest, const nlohmann::json& response);
  std::size_t size() const;
  const std::optional<std::filesystem::path>& path() const { return path_; }

 private:
  std::optional<std::filesystem::path> path_;
  mutable std::mutex mutex_;
  std::unordered_map<std::string, nlohmann::json> entries_;
};

struct HttpRequest {
  std::string url;
  std::string body;
  std::vector<std::pair<std::string, std::string>> headers;
  double timeout_s = 60.0;
};

struct HttpResponse {
  int status = 0;
  std::string body;
};

/// Performs one POST. Implementations throw Error(Timeout) when the deadline
/// passes and Error(BackendError) for connection failures.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual HttpResponse post(const HttpRequest& request) = 0;
};

/// HTTPS/HTTP transport over cpp-httplib.
std::shared_ptr<Transport> make_http_transport();

/// Wraps a callable; used for stubs and fault injection.
class FunctionTransport : public Transport {
 public:
  explicit FunctionTransport(std::function<HttpResponse(const HttpRequest&)> fn) : fn_(std::move(fn)) {}
  HttpResponse post(const HttpRequest& request) override { return fn_(request); }

 private:
  std::function<HttpResponse(const HttpRequest&)> fn_;
};

struct GenerateRequest {
  const EncodedImage* image = nullptr;
  std::string prompt;
  int sample = 0;  // distinguishes deliberate re-asks of the same prompt in the cache key
};

/// Anything that turns (image, prompt) into text.
class TextModel {
 public:
  virtual ~TextModel() = default;
  virtual std::string generate(const GenerateRequest& request) = 0;
  virtual std::string model_id() const = 0;
};

class Embedder {
 public:
  virtual ~Embedder() = default;
  /// One vector per text, input order, constant dimension.
  virtual std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) = 0;
};

struct ClientOptions {
  bool offline = false;  // cache only; the transport is never called
  std::function<void(std::chrono::duration<double>)> sleeper;  // defaults to this_thread::sleep_for
  EnvLookup env = process_env;
};

struct ClientCounters {
  std::size_t network_calls = 0;
  std::size_t cache_hits = 0;
  std::size_t retries = 0;
};

class InferenceClient : public TextModel, public Embedder {
 public:
  InferenceClient(BackendConfig config, std::shared_ptr<Transport> transport, std::shared_ptr<ResponseCache> cache,
                  ClientOptions options = {});
  ~InferenceClient() override;

  std::string generate(const GenerateRequest& request) override;
  std::vector<std::string> generate_batch(const std::vector<GenerateRequest>& requests);
  std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) override;

  std::string model_id() const override { return config_.model_id; }
  const BackendConfig& config() const { return config_; }
  ClientCounters counters() const;
  CacheKey cache_key(const GenerateRequest& request) const;

 private:
  class Gate;
  nlohmann::json request_body(const GenerateRequest& request) const;
  nlohmann::json embed_body(const std::vector<std::string>& texts) const;
  HttpResponse send(const nlohmann::json& body, const std::string& url);
  std::string endpoint(const char* suffix) const;

  BackendConfig config_;
  std::shared_ptr<Transport> transport_;
  std::shared_ptr<ResponseCache> cache_;
  ClientOptions options_;
  std::unique_ptr<Gate> gate_;
  std::atomic<std::size_t> network_calls_{0};
  std::atomic<std::size_t> cache_hits_{0};
  std::atomic<std::size_t> retries_{0};
};

/// Runs `fn(i)` for i in [0, n) on up to `workers` threads; results keep
/// input order. The exception of the lowest failing index is rethrown.
template <typename T>
std::vector<T> ordered_parallel_map(std::size_t n, int workers, const std::function<T(std::size_t)>& fn);

}  // namespace uigauge

#include "uigauge/detail/ordered_map.hpp"
