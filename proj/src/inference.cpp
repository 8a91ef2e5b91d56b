#include "uigauge/inference.hpp"

#include <cmath>
#include <condition_variable>
#include <ctime>
#include <fstream>
#include <thread>

#include "uigauge/digest.hpp"
#include "uigauge/error.hpp"

namespace uigauge {

using nlohmann::json;

void BackendConfig::validate() const {
  auto bad = [&](const std::string& what) {
    throw Error(ErrorCode::ConfigError, "backend '" + name + "': " + what);
  };
  if (model_id.empty()) bad("model_id is required");
  if (!(temperature >= 0)) bad("temperature must be >= 0");
  if (max_tokens < 1) bad("max_tokens must be >= 1");
  if (!(timeout_s > 0)) bad("timeout must be > 0");
  if (max_retries < 0) bad("max_retries must be >= 0");
  if (max_concurrency < 1) bad("max_concurrency must be >= 1");
  if (protocol == WireProtocol::RawTemplate && raw_request_template.empty()) bad("raw protocol needs request_template");
  if (!(backoff_initial_s >= 0) || !(backoff_factor >= 1) || !(backoff_max_s >= 0)) bad("invalid backoff settings");
}

BackendConfig backend_from_json(const std::string& name, const json& table) {
  if (!table.is_object()) throw Error(ErrorCode::ConfigError, "backend '" + name + "' must be a table");
  for (const char* secret : {"token", "api_key", "auth_token", "password", "secret"}) {
    if (table.contains(secret)) {
      throw Error(ErrorCode::ConfigError, "backend '" + name + "': put secrets in the environment and name the " +
                                              "variable with auth_token_env instead of '" + secret + "'");
    }
  }
  BackendConfig c;
  c.name = name;
  try {
    c.endpoint_url = table.value("endpoint_url", std::string());
    c.model_id = table.value("model_id", std::string());
    c.auth_token_env = table.value("auth_token_env", std::string());
    c.temperature = table.value("temperature", c.temperature);
    c.max_tokens = table.value("max_tokens", c.max_tokens);
    c.timeout_s = table.value("timeout", c.timeout_s);
    c.max_retries = table.value("max_retries", c.max_retries);
    c.max_concurrency = table.value("max_concurrency", c.max_concurrency);
    std::string protocol = table.value("protocol", std::string("openai"));
    if (protocol == "openai") {
      c.protocol = WireProtocol::OpenAIChat;
    } else if (protocol == "raw") {
      c.protocol = WireProtocol::RawTemplate;
    } else {
      throw Error(ErrorCode::ConfigError, "backend '" + name + "': unknown protocol '" + protocol + "'");
    }
    c.raw_request_template = table.value("request_template", std::string());
    c.raw_response_pointer = table.value("response_pointer", c.raw_response_pointer);
    c.backoff_initial_s = table.value("backoff_initial", c.backoff_initial_s);
    c.backoff_factor = table.value("backoff_factor", c.backoff_factor);
    c.backoff_max_s = table.value("backoff_max", c.backoff_max_s);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, "backend '" + name + "': " + e.what());
  }
  c.validate();
  return c;
}

json to_json(const BackendConfig& c) {
  return json{{"name", c.name},
              {"endpoint_url", c.endpoint_url},
              {"model_id", c.model_id},
              {"auth_token_env", c.auth_token_env},
              {"temperature", c.temperature},
              {"max_tokens", c.max_tokens},
              {"timeout", c.timeout_s},
              {"max_retries", c.max_retries},
              {"max_concurrency", c.max_concurrency},
              {"protocol", c.protocol == WireProtocol::OpenAIChat ? "openai" : "raw"},
              {"request_template", c.raw_request_template},
              {"response_pointer", c.raw_response_pointer},
              {"backoff_initial", c.backoff_initial_s},
              {"backoff_factor", c.backoff_factor},
              {"backoff_max", c.backoff_max_s}};
}

std::string CacheKey::digest() const {
  return sha256_hex(model_id + '\n' + image_hash + '\n' + prompt_hash + '\n' + params_hash);
}

// ---- cache ----

namespace {

std::string_view as_view(const std::vector<unsigned char>& bytes) {
  return {reinterpret_cast<const char*>(bytes.data()), bytes.size()};
}

std::string utc_timestamp() {
  std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

ResponseCache::ResponseCache(std::filesystem::path path) : path_(std::move(path)) {
  std::ifstream in(*path_);
  if (!in) return;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    // A torn final line from an interrupted run is skipped rather than fatal.
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("key") || !j.contains("response")) continue;
    entries_[j["key"].get<std::string>()] = j["response"];
  }
}

std::optional<json> ResponseCache::lookup(const std::string& key) const {
  std::lock_guard lock(mutex_);
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void ResponseCache::store(const std::string& key, const std::string& request_digest, const json& response) {
  std::lock_guard lock(mutex_);
  entries_[key] = response;
  if (!path_) return;
  if (path_->has_parent_path()) std::filesystem::create_directories(path_->parent_path());
  std::ofstream out(*path_, std::ios::app | std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot append to cache " + path_->string());
  json line{{"key", key}, {"request_digest", request_digest}, {"response", response}, {"timestamp", utc_timestamp()}};
  out << line.dump() << '\n';
  out.flush();
  if (!out) throw Error(ErrorCode::IoError, "write failed for cache " + path_->string());
}

std::size_t ResponseCache::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

// ---- client ----

class InferenceClient::Gate {
 public:
  explicit Gate(int slots) : free_(slots) {}
  void acquire() {
    std::unique_lock lock(mutex_);
    cv_.wait(lock, [&] { return free_ > 0; });
    --free_;
  }
  void release() {
    {
      std::lock_guard lock(mutex_);
      ++free_;
    }
    cv_.notify_one();
  }

 private:
  std::mutex mutex_;
  std::condition_variable cv_;
  int free_;
};

InferenceClient::InferenceClient(BackendConfig config, std::shared_ptr<Transport> transport,
                                 std::shared_ptr<ResponseCache> cache, ClientOptions options)
    : config_(std::move(config)),
      transport_(std::move(transport)),
      cache_(cache ? std::move(cache) : std::make_shared<ResponseCache>()),
      options_(std::move(options)),
      gate_(std::make_unique<Gate>(std::max(1, config_.max_concurrency))) {
  config_.validate();
  if (!options_.sleeper) {
    options_.sleeper = [](std::chrono::duration<double> d) { std::this_thread::sleep_for(d); };
  }
  if (!options_.env) options_.env = process_env;
}

InferenceClient::~InferenceClient() = default;

ClientCounters InferenceClient::counters() const {
  return {network_calls_.load(), cache_hits_.load(), retries_.load()};
}

std::string InferenceClient::endpoint(const char* suffix) const {
  if (config_.protocol == WireProtocol::RawTemplate) return config_.endpoint_url;
  std::string url = config_.endpoint_url;
  while (!url.empty() && url.back() == '/') url.pop_back();
  std::string tail = std::string("/") + suffix;
  if (url.size() >= tail.size() && url.compare(url.size() - tail.size(), tail.size(), tail) == 0) return url;
  return url + tail;
}

CacheKey InferenceClient::cache_key(const GenerateRequest& request) const {
  json params{{"kind", "generate"},
              {"protocol", config_.protocol == WireProtocol::OpenAIChat ? "openai" : "raw"},
              {"temperature", config_.temperature},
              {"max_tokens", config_.max_tokens},
              {"sample", request.sample}};
  return CacheKey{config_.model_id, request.image ? sha256_hex(as_view(request.image->bytes)) : std::string(),
                  sha256_hex(request.prompt), sha256_hex(params.dump())};
}

namespace {

std::string substitute_raw(std::string tmpl, const std::vector<std::pair<std::string, json>>& values) {
  for (const auto& [name, value] : values) {
    std::string needle = "{{" + name + "}}";
    std::string text = value.dump();
    for (std::size_t pos = tmpl.find(needle); pos != std::string::npos; pos = tmpl.find(needle, pos + text.size())) {
      tmpl.replace(pos, needle.size(), text);
    }
  }
  return tmpl;
}

json parse_body(const std::string& body) {
  json j = json::parse(body, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::BackendError, "response is not JSON: " + body.substr(0, 200));
  return j;
}

}  // namespace

json InferenceClient::request_body(const GenerateRequest& request) const {
  std::string image_b64 = request.image ? base64_encode(as_view(request.image->bytes)) : std::string();
  std::string mime = request.image ? request.image->mime : std::string();
  if (config_.protocol == WireProtocol::RawTemplate) {
    std::string text = substitute_raw(config_.raw_request_template, {{"model", config_.model_id},
                                                                     {"prompt", request.prompt},
                                                                     {"image_b64", image_b64},
                                                                     {"image_mime", mime},
                                                                     {"temperature", config_.temperature},
                                                                     {"max_tokens", config_.max_tokens}});
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) throw Error(ErrorCode::ConfigError, "backend '" + config_.name + "': request_template is not JSON");
    return j;
  }
  json content = json::array();
  if (request.image) {
    content.push_back({{"type", "image_url"}, {"image_url", {{"url", "data:" + mime + ";base64," + image_b64}}}});
  }
  content.push_back({{"type", "text"}, {"text", request.prompt}});
  return json{{"model", config_.model_id},
              {"temperature", config_.temperature},
              {"max_tokens", config_.max_tokens},
              {"messages", json::array({{{"role", "user"}, {"content", content}}})}};
}

json InferenceClient::embed_body(const std::vector<std::string>& texts) const {
  if (config_.protocol == WireProtocol::RawTemplate) {
    std::string text = substitute_raw(config_.raw_request_template,
                                      {{"model", config_.model_id}, {"prompt", texts.at(0)}, {"image_b64", ""},
                                       {"image_mime", ""}, {"temperature", config_.temperature},
                                       {"max_tokens", config_.max_tokens}});
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) throw Error(ErrorCode::ConfigError, "backend '" + config_.name + "': request_template is not JSON");
    return j;
  }
  return json{{"model", config_.model_id}, {"input", texts}};
}

HttpResponse InferenceClient::send(const json& body, const std::string& url) {
  if (options_.offline) throw Error(ErrorCode::OfflineCacheMiss, "backend '" + config_.name + "' is offline");
  if (!transport_) throw Error(ErrorCode::BackendError, "backend '" + config_.name + "' has no transport");

  HttpRequest req;
  req.url = url;
  req.body = body.dump();
  req.timeout_s = config_.timeout_s;
  req.headers.emplace_back("Content-Type", "application/json");
  if (!config_.auth_token_env.empty()) {
    auto token = options_.env(config_.auth_token_env);
    if (!token || token->empty()) {
      throw Error(ErrorCode::AuthFailure, "environment variable " + config_.auth_token_env + " is not set");
    }
    req.headers.emplace_back("Authorization", "Bearer " + *token);
  }

  enum class Transient { None, Timeout, RateLimited, Server };
  Transient last = Transient::None;
  std::string last_detail;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) {
      double delay = std::min(config_.backoff_max_s, config_.backoff_initial_s * std::pow(config_.backoff_factor, attempt - 1));
      ++retries_;
      options_.sleeper(std::chrono::duration<double>(delay));
    }
    HttpResponse resp;
    gate_->acquire();
    try {
      ++network_calls_;
      resp = transport_->post(req);
      gate_->release();
    } catch (const Error& e) {
      gate_->release();
      if (e.code() == ErrorCode::Timeout) {
        last = Transient::Timeout;
      } else if (e.code() == ErrorCode::BackendError) {
        last = Transient::Server;
      } else {
        throw;
      }
      last_detail = e.what();
      continue;
    } catch (...) {
      gate_->release();
      throw;
    }
    if (resp.status >= 200 && resp.status < 300) return resp;
    if (resp.status == 401 || resp.status == 403) {
      throw Error(ErrorCode::AuthFailure, "HTTP " + std::to_string(resp.status) + " from " + url);
    }
    last_detail = "HTTP " + std::to_string(resp.status) + ": " + resp.body.substr(0, 500);
    if (resp.status == 429) {
      last = Transient::RateLimited;
    } else if (resp.status >= 500) {
      last = Transient::Server;
    } else {
      throw Error(ErrorCode::BackendError, last_detail);
    }
  }
  std::string attempts = " after " + std::to_string(config_.max_retries + 1) + " attempts";
  switch (last) {
    case Transient::Timeout: throw Error(ErrorCode::Timeout, last_detail + attempts);
    case Transient::RateLimited: throw Error(ErrorCode::RateLimited, last_detail + attempts);
    default: throw Error(ErrorCode::BackendError, last_detail + attempts);
  }
}

std::string InferenceClient::generate(const GenerateRequest& request) {
  CacheKey key = cache_key(request);
  std::string address = key.digest();
  if (auto hit = cache_->lookup(address); hit && hit->is_string()) {
    ++cache_hits_;
    return hit->get<std::string>();
  }
  if (options_.offline) {
    throw Error(ErrorCode::OfflineCacheMiss, "no cached response for key " + address + " (backend '" + config_.name + "')");
  }
  json body = request_body(request);
  HttpResponse resp = send(body, endpoint("chat/completions"));
  json reply = parse_body(resp.body);

  std::string text;
  try {
    if (config_.protocol == WireProtocol::RawTemplate) {
      text = reply.at(json::json_pointer(config_.raw_response_pointer)).get<std::string>();
    } else {
      const json& content = reply.at("choices").at(0).at("message").at("content");
      if (content.is_string()) {
        text = content.get<std::string>();
      } else {
        for (const auto& part : content) {
          if (part.value("type", "") == "text") text += part.value("text", "");
        }
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::BackendError, std::string("unexpected response shape: ") + e.what());
  }
  cache_->store(address, sha256_hex(body.dump()), text);
  return text;
}

std::vector<std::string> InferenceClient::generate_batch(const std::vector<GenerateRequest>& requests) {
  return ordered_parallel_map<std::string>(requests.size(), config_.max_concurrency,
                                           [&](std::size_t i) { return generate(requests[i]); });
}

std::vector<std::vector<double>> InferenceClient::embed(const std::vector<std::string>& texts) {
  if (texts.empty()) throw Error(ErrorCode::EmptyInput, "embed needs at least one text");
  json params{{"kind", "embed"}, {"protocol", config_.protocol == WireProtocol::OpenAIChat ? "openai" : "raw"}};
  std::string params_hash = sha256_hex(params.dump());
  auto key_of = [&](const std::string& t) {
    return CacheKey{config_.model_id, "", sha256_hex(t), params_hash}.digest();
  };
  auto to_vector = [](const json& j) {
    if (!j.is_array() || j.empty()) throw Error(ErrorCode::BackendError, "embedding is not a non-empty array");
    std::vector<double> v;
    v.reserve(j.size());
    for (const auto& x : j) {
      double d = x.get<double>();
      if (!std::isfinite(d)) throw Error(ErrorCode::BackendError, "embedding contains a non-finite value");
      v.push_back(d);
    }
    return v;
  };

  std::vector<std::optional<std::vector<double>>> out(texts.size());
  std::vector<std::size_t> missing;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (auto hit = cache_->lookup(key_of(texts[i])); hit && hit->is_array()) {
      ++cache_hits_;
      out[i] = to_vector(*hit);
    } else {
      missing.push_back(i);
    }
  }
  if (!missing.empty() && options_.offline) {
    throw Error(ErrorCode::OfflineCacheMiss, std::to_string(missing.size()) + " embeddings not cached (backend '" +
                                                 config_.name + "')");
  }

  try {
    if (config_.protocol == WireProtocol::RawTemplate) {
      auto fetched = ordered_parallel_map<std::vector<double>>(
          missing.size(), config_.max_concurrency, [&](std::size_t m) {
            json body = embed_body({texts[missing[m]]});
            json reply = parse_body(send(body, endpoint("embeddings")).body);
            auto v = to_vector(reply.at(json::json_pointer(config_.raw_response_pointer)));
            cache_->store(key_of(texts[missing[m]]), sha256_hex(body.dump()), v);
            return v;
          });
      for (std::size_t m = 0; m < missing.size(); ++m) out[missing[m]] = std::move(fetched[m]);
    } else if (!missing.empty()) {
      std::vector<std::string> batch;
      for (auto i : missing) batch.push_back(texts[i]);
      json body = embed_body(batch);
      json reply = parse_body(send(body, endpoint("embeddings")).body);
      const json& data = reply.at("data");
      if (data.size() != batch.size()) {
        throw Error(ErrorCode::BackendError, "expected " + std::to_string(batch.size()) + " embeddings, got " +
                                                 std::to_string(data.size()));
      }
      std::string digest = sha256_hex(body.dump());
      for (std::size_t m = 0; m < data.size(); ++m) {
        std::size_t slot = data[m].contains("index") ? data[m]["index"].get<std::size_t>() : m;
        if (slot >= batch.size()) throw Error(ErrorCode::BackendError, "embedding index out of range");
        auto v = to_vector(data[m].at("embedding"));
        cache_->store(key_of(batch[slot]), digest, v);
        out[missing[slot]] = std::move(v);
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::BackendError, std::string("unexpected embedding response: ") + e.what());
  }

  std::vector<std::vector<double>> vectors;
  vectors.reserve(texts.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!out[i]) throw Error(ErrorCode::BackendError, "no embedding returned for input " + std::to_string(i));
    if (!vectors.empty() && out[i]->size() != vectors.front().size()) {
      throw Error(ErrorCode::DimensionMismatch, "input " + std::to_string(i) + " has dimension " +
                                                    std::to_string(out[i]->size()) + ", expected " +
                                                    std::to_string(vectors.front().size()));
    }
    vectors.push_back(std::move(*out[i]));
  }
  return vectors;
}

}  // namespace uigauge
