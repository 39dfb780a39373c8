// Copyright 2026 The capeval Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "capeval/backend.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <future>
#include <sstream>
#include <thread>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"

#include "capeval/error.hpp"
#include "capeval/json_extract.hpp"
#include "capeval/text.hpp"

namespace capeval {

namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_atomic(const fs::path& p, const std::string& content) {
  fs::create_directories(p.parent_path());
  std::ostringstream tmp_name;
  tmp_name << p.filename().string() << ".tmp." << std::this_thread::get_id();
  const fs::path tmp = p.parent_path() / tmp_name.str();
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out << content;
  }
  fs::rename(tmp, p);
}

// Signals a retryable failure inside HttpTransport.
struct TransientFailure {
  std::string message;
};

}  // namespace

void BackendSpec::validate() const {
  if (name.empty()) throw ConfigError("backend without a name");
  if (max_parallel < 1) {
    throw ConfigError("backend '" + name + "': max_parallel must be >= 1");
  }
  if (timeout_seconds <= 0) {
    throw ConfigError("backend '" + name + "': timeout must be positive");
  }
  if (kind == BackendKind::kRemoteChat) {
    if (endpoint.empty() || model_id.empty()) {
      throw ConfigError("remote backend '" + name +
                        "' requires endpoint and model_id");
    }
  } else if (fixture_dir.empty()) {
    throw ConfigError("mock backend '" + name + "' requires fixture_dir");
  }
}

BackendKind backend_kind_from_string(const std::string& s) {
  if (s == "remote-chat") return BackendKind::kRemoteChat;
  if (s == "mock-fixture") return BackendKind::kMockFixture;
  throw ConfigError("unknown backend kind: " + s);
}

std::string to_string(BackendKind kind) {
  return kind == BackendKind::kRemoteChat ? "remote-chat" : "mock-fixture";
}

void ChatRequest::validate() const {
  if (sampling.temperature && *sampling.temperature < 0) {
    throw UsageError("temperature must be >= 0");
  }
  if (sampling.top_p && (*sampling.top_p <= 0 || *sampling.top_p > 1)) {
    throw UsageError("top_p must be in (0, 1]");
  }
}

nlohmann::json canonical_request(const BackendSpec& backend,
                                 const ChatRequest& req) {
  // nlohmann::json objects are std::map backed, so dump() sorts keys.
  nlohmann::json j;
  j["backend"] = text::nfc(backend.name);
  j["model_id"] = text::nfc(backend.model_id);
  j["system"] = req.system ? nlohmann::json(text::nfc(*req.system)) : nullptr;
  j["user"] = text::nfc(req.user);
  j["decode"] = req.decode == DecodeMode::kJsonExpected ? "json" : "text";
  if (req.image) {
    j["image"] = {{"media_type", req.image->media_type},
                  {"sha256", text::sha256_hex(std::string_view(
                                 reinterpret_cast<const char*>(
                                     req.image->bytes.data()),
                                 req.image->bytes.size()))}};
  } else {
    j["image"] = nullptr;
  }
  nlohmann::json sampling = nlohmann::json::object();
  if (req.sampling.temperature) sampling["temperature"] = *req.sampling.temperature;
  if (req.sampling.top_p) sampling["top_p"] = *req.sampling.top_p;
  if (req.sampling.seed) sampling["seed"] = *req.sampling.seed;
  j["sampling"] = sampling;
  return j;
}

std::string cache_key(const BackendSpec& backend, const ChatRequest& req) {
  return text::sha256_hex(canonical_request(backend, req).dump());
}

nlohmann::json wire_request(const BackendSpec& backend, const ChatRequest& req) {
  nlohmann::json messages = nlohmann::json::array();
  if (req.system) {
    messages.push_back(
        {{"role", "system"},
         {"content", {{{"type", "text"}, {"text", *req.system}}}}});
  }
  nlohmann::json content = nlohmann::json::array();
  content.push_back({{"type", "text"}, {"text", req.user}});
  if (req.image) {
    content.push_back({{"type", "image"},
                       {"media_type", req.image->media_type},
                       {"data", text::base64_encode(req.image->bytes)}});
  }
  messages.push_back({{"role", "user"}, {"content", content}});
  nlohmann::json body{{"model", backend.model_id}, {"messages", messages}};
  if (req.sampling.temperature) body["temperature"] = *req.sampling.temperature;
  if (req.sampling.top_p) body["top_p"] = *req.sampling.top_p;
  if (req.sampling.seed) body["seed"] = *req.sampling.seed;
  return body;
}

std::string parse_wire_response(const nlohmann::json& body) {
  auto join_parts = [](const nlohmann::json& content) -> std::optional<std::string> {
    if (content.is_string()) return content.get<std::string>();
    if (!content.is_array()) return std::nullopt;
    std::string out;
    for (const auto& part : content) {
      if (part.is_object() && part.value("type", "") == "text" &&
          part.contains("text") && part["text"].is_string()) {
        out += part["text"].get<std::string>();
      }
    }
    return out;
  };
  if (body.contains("choices") && body["choices"].is_array() &&
      !body["choices"].empty()) {
    const auto& choice = body["choices"][0];
    if (choice.contains("message") && choice["message"].contains("content")) {
      if (auto s = join_parts(choice["message"]["content"])) return *s;
    }
  }
  if (body.contains("content")) {
    if (auto s = join_parts(body["content"])) return *s;
  }
  throw NetworkError("unrecognized chat-completion response: " +
                     body.dump().substr(0, 200));
}

std::string FixtureTransport::send(const BackendSpec& backend,
                                   const ChatRequest&, const std::string& key) {
  const fs::path p = backend.fixture_dir / (key + ".txt");
  if (!fs::exists(p)) throw FixtureMissing(backend.name, key);
  return read_file(p);
}

HttpTransport::HttpTransport(RetryPolicy policy, Sleeper sleep)
    : policy_(policy), sleep_(std::move(sleep)) {}

std::string HttpTransport::send(const BackendSpec& backend,
                                const ChatRequest& req, const std::string&) {
  std::string token;
  if (!backend.credentials_env.empty()) {
    const char* value = std::getenv(backend.credentials_env.c_str());
    if (value == nullptr || *value == '\0') {
      throw AuthError("credentials env var " + backend.credentials_env +
                      " is not set for backend '" + backend.name + "'");
    }
    token = value;
  }
  const std::string body = wire_request(backend, req).dump();

  auto once = [&]() -> std::string {
    httplib::Client client(backend.endpoint);
    const auto secs = static_cast<time_t>(backend.timeout_seconds);
    client.set_connection_timeout(secs, 0);
    client.set_read_timeout(secs, 0);
    client.set_write_timeout(secs, 0);
    httplib::Headers headers;
    if (!token.empty()) headers.emplace("Authorization", "Bearer " + token);
    auto res = client.Post(backend.endpoint_path, headers, body,
                           "application/json");
    if (!res) {
      throw TransientFailure{"connection error: " + httplib::to_string(res.error())};
    }
    const int status = res->status;
    if (status == 401 || status == 403) {
      throw AuthError("backend '" + backend.name + "' rejected credentials (" +
                      std::to_string(status) + ")");
    }
    if (status == 408 || status == 429 || status >= 500) {
      throw TransientFailure{"HTTP " + std::to_string(status)};
    }
    if (status != 200) {
      throw NetworkError("backend '" + backend.name + "' returned HTTP " +
                         std::to_string(status) + ": " + res->body.substr(0, 200));
    }
    auto parsed = nlohmann::json::parse(res->body, nullptr, false);
    if (parsed.is_discarded()) {
      throw NetworkError("backend '" + backend.name + "' returned non-JSON body");
    }
    return parse_wire_response(parsed);
  };

  auto delay = policy_.base_delay;
  for (int attempt = 1;; ++attempt) {
    try {
      return once();
    } catch (const TransientFailure& failure) {
      if (attempt >= policy_.max_attempts) {
        throw NetworkError("backend '" + backend.name + "' failed after " +
                           std::to_string(attempt) +
                           " attempts: " + failure.message);
      }
      spdlog::warn("backend '{}' attempt {} failed ({}); retrying in {} ms",
                   backend.name, attempt, failure.message, delay.count());
      sleep_(delay);
      delay = std::chrono::milliseconds(static_cast<std::int64_t>(
          std::llround(static_cast<double>(delay.count()) * policy_.factor)));
    }
  }
}

RuleTransport RuleTransport::from_json(const nlohmann::json& j) {
  std::vector<Rule> rules;
  for (const auto& r : j.at("rules")) {
    Rule rule;
    if (r.contains("backend") && !r["backend"].is_null()) {
      rule.backend = r["backend"].get<std::string>();
    }
    if (r.contains("contains") && !r["contains"].is_null()) {
      rule.contains = r["contains"].get<std::string>();
    }
    if (r.contains("seed") && !r["seed"].is_null()) {
      rule.seed = r["seed"].get<std::int64_t>();
    }
    const auto& reply = r.at("reply");
    rule.reply = reply.is_string() ? reply.get<std::string>() : reply.dump();
    rules.push_back(std::move(rule));
  }
  return RuleTransport(std::move(rules));
}

std::string RuleTransport::send(const BackendSpec& backend,
                                const ChatRequest& req, const std::string& key) {
  for (const auto& rule : rules_) {
    if (rule.backend && *rule.backend != backend.name) continue;
    if (rule.contains && req.user.find(*rule.contains) == std::string::npos) {
      continue;
    }
    if (rule.seed && req.sampling.seed != rule.seed) continue;
    return rule.reply;
  }
  throw FixtureMissing(backend.name, key);
}

FixtureWriter::FixtureWriter(fs::path dir) : dir_(std::move(dir)) {
  std::ifstream in(dir_ / "index.jsonl");
  std::string line;
  while (std::getline(in, line)) {
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (!j.is_discarded() && j.contains("key")) {
      index_[j["key"].get<std::string>()] = line;
    }
  }
}

void FixtureWriter::put(const std::string& key, const BackendSpec& backend,
                        const ChatRequest& req, const std::string& reply) {
  std::lock_guard lock(mu_);
  write_atomic(dir_ / (key + ".txt"), reply);
  std::string preview = req.user.substr(0, 120);
  for (char& c : preview) {
    if (c == '\n') c = ' ';
  }
  nlohmann::ordered_json entry;
  entry["key"] = key;
  entry["backend"] = backend.name;
  entry["seed"] = req.sampling.seed ? nlohmann::ordered_json(*req.sampling.seed)
                                    : nlohmann::ordered_json(nullptr);
  entry["user_tail"] = req.user.size() > 120
                           ? req.user.substr(req.user.size() - 120)
                           : req.user;
  entry["reply_preview"] = reply.substr(0, 80);
  index_[key] = entry.dump();
  std::string all;
  for (const auto& [k, line] : index_) all += line + "\n";
  write_atomic(dir_ / "index.jsonl", all);
}

std::string RecordingTransport::send(const BackendSpec& backend,
                                     const ChatRequest& req,
                                     const std::string& key) {
  std::string reply = inner_->send(backend, req, key);
  FixtureWriter* writer = nullptr;
  {
    std::lock_guard lock(mu_);
    auto& slot = writers_[backend.fixture_dir];
    if (!slot) slot = std::make_unique<FixtureWriter>(backend.fixture_dir);
    writer = slot.get();
  }
  writer->put(key, backend, req, reply);
  return reply;
}

ResponseCache::ResponseCache(fs::path dir) : dir_(std::move(dir)) {}

std::optional<std::string> ResponseCache::get(const std::string& key) {
  std::lock_guard lock(mu_);
  if (auto it = memory_.find(key); it != memory_.end()) return it->second;
  if (dir_.empty()) return std::nullopt;
  const fs::path p = dir_ / (key + ".txt");
  if (!fs::exists(p)) return std::nullopt;
  std::string value = read_file(p);
  memory_[key] = value;
  return value;
}

void ResponseCache::put(const std::string& key, const std::string& value) {
  std::lock_guard lock(mu_);
  memory_[key] = value;
  if (!dir_.empty()) write_atomic(dir_ / (key + ".txt"), value);
}

void ConcurrencyLimiter::acquire() {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [&] { return in_flight_ < limit_; });
  ++in_flight_;
  peak_ = std::max(peak_, in_flight_);
}

void ConcurrencyLimiter::release() {
  {
    std::lock_guard lock(mu_);
    --in_flight_;
  }
  cv_.notify_one();
}

int ConcurrencyLimiter::peak() const {
  std::lock_guard lock(mu_);
  return peak_;
}

Gateway::Gateway(std::vector<BackendSpec> backends, GatewayOptions options)
    : options_(std::move(options)), cache_(options_.cache_dir) {
  if (!options_.sleep) {
    options_.sleep = [](std::chrono::milliseconds d) {
      std::this_thread::sleep_for(d);
    };
  }
  for (auto& spec : backends) {
    spec.validate();
    const std::string name = spec.name;
    auto limiter = std::make_unique<ConcurrencyLimiter>(spec.max_parallel);
    if (!backends_.emplace(name, Entry{std::move(spec), std::move(limiter)})
             .second) {
      throw ConfigError("duplicate backend name: " + name);
    }
  }
  fixture_transport_ = std::make_shared<FixtureTransport>();
  http_transport_ =
      std::make_shared<HttpTransport>(options_.retry, options_.sleep);
}

Gateway::~Gateway() = default;

const BackendSpec& Gateway::backend(const std::string& name) const {
  auto it = backends_.find(name);
  if (it == backends_.end()) throw ConfigError("unknown backend: " + name);
  return it->second.spec;
}

bool Gateway::has_backend(const std::string& name) const {
  return backends_.count(name) != 0;
}

int Gateway::peak_in_flight(const std::string& name) const {
  auto it = backends_.find(name);
  if (it == backends_.end()) throw ConfigError("unknown backend: " + name);
  return it->second.limiter->peak();
}

Transport& Gateway::transport_for(const BackendSpec& spec) {
  if (options_.transport_override) return *options_.transport_override;
  if (spec.kind == BackendKind::kMockFixture) return *fixture_transport_;
  if (options_.offline) {
    throw NetworkError("offline mode: network access to backend '" + spec.name +
                       "' is forbidden and the response is not cached");
  }
  return *http_transport_;
}

std::string Gateway::complete(const std::string& name, const ChatRequest& req) {
  req.validate();
  auto it = backends_.find(name);
  if (it == backends_.end()) throw ConfigError("unknown backend: " + name);
  const BackendSpec& spec = it->second.spec;
  const std::string key = cache_key(spec, req);
  if (auto hit = cache_.get(key)) {
    ++cache_hits_;
    return *hit;
  }
  Transport& transport = transport_for(spec);
  ConcurrencyLimiter& limiter = *it->second.limiter;
  limiter.acquire();
  std::string reply;
  try {
    ++transport_calls_;
    reply = transport.send(spec, req, key);
  } catch (...) {
    limiter.release();
    throw;
  }
  limiter.release();
  cache_.put(key, reply);
  return reply;
}

nlohmann::json Gateway::complete_json(const std::string& name, ChatRequest req) {
  req.decode = DecodeMode::kJsonExpected;
  const std::string first = complete(name, req);
  if (auto parsed = extract_json(first)) return *std::move(parsed);
  spdlog::warn("backend '{}' reply is not JSON; re-prompting once", name);
  req.user += "\n\n";
  req.user += kJsonRepairSuffix;
  const std::string second = complete(name, req);
  if (auto parsed = extract_json(second)) return *std::move(parsed);
  throw JsonParseError("backend '" + name +
                           "' returned no parseable JSON after repair prompt",
                       second);
}

SampleResult Gateway::sample_candidates(const std::string& name,
                                        const ChatRequest& req, int n) {
  if (n < 1) throw UsageError("sample_candidates requires n >= 1");
  const std::int64_t base_seed = req.sampling.seed.value_or(0);
  std::vector<std::future<std::string>> futures;
  futures.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    ChatRequest slot = req;
    slot.sampling.temperature = req.sampling.temperature.value_or(kDefaultTemperature);
    slot.sampling.top_p = req.sampling.top_p.value_or(kDefaultTopP);
    slot.sampling.seed = base_seed + i;
    futures.push_back(std::async(std::launch::async, [this, name, slot] {
      return complete(name, slot);
    }));
  }
  SampleResult result;
  result.texts.resize(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < futures.size(); ++i) {
    try {
      result.texts[i] = futures[i].get();
    } catch (const std::exception& e) {
      result.failures.push_back({i, e.what(), std::current_exception()});
    }
  }
  return result;
}

}  // namespace capeval
