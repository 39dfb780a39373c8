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

#ifndef CAPEVAL_BACKEND_HPP_
#define CAPEVAL_BACKEND_HPP_

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace capeval {

enum class BackendKind { kRemoteChat, kMockFixture };

struct BackendSpec {
  std::string name;
  BackendKind kind = BackendKind::kMockFixture;
  std::string endpoint;  // scheme://host[:port], remote only
  std::string endpoint_path = "/v1/chat/completions";
  std::string model_id;
  std::string credentials_env;
  std::filesystem::path fixture_dir;  // mock only
  int max_parallel = 4;
  double timeout_seconds = 60.0;

  /// Throws ConfigError on a violated invariant.
  void validate() const;
};

BackendKind backend_kind_from_string(const std::string& s);
std::string to_string(BackendKind kind);

struct ImageAttachment {
  std::vector<std::uint8_t> bytes;
  std::string media_type;
};

enum class DecodeMode { kRawText, kJsonExpected };

// Nucleus-sampling defaults used when a caller samples candidates.
inline constexpr double kDefaultTemperature = 1.0;
inline constexpr double kDefaultTopP = 0.7;

struct Sampling {
  std::optional<double> temperature;
  std::optional<double> top_p;
  std::optional<std::int64_t> seed;
};

struct ChatRequest {
  std::optional<std::string> system;
  std::string user;
  std::optional<ImageAttachment> image;
  DecodeMode decode = DecodeMode::kRawText;
  Sampling sampling;

  /// Throws UsageError when temperature < 0 or top_p outside (0, 1].
  void validate() const;
};

/// Canonical request form: sorted keys, NFC text, images by digest.
nlohmann::json canonical_request(const BackendSpec& backend,
                                 const ChatRequest& req);
/// SHA-256 of the canonical form; names cache entries and fixtures.
std::string cache_key(const BackendSpec& backend, const ChatRequest& req);

/// Chat-completion wire body sent to remote backends.
nlohmann::json wire_request(const BackendSpec& backend, const ChatRequest& req);
/// Pulls assistant text out of a chat-completion response body.
std::string parse_wire_response(const nlohmann::json& body);

class Transport {
 public:
  virtual ~Transport() = default;
  virtual std::string send(const BackendSpec& backend, const ChatRequest& req,
                           const std::string& key) = 0;
};

/// Serves replies from `<fixture_dir>/<key>.txt`.
class FixtureTransport final : public Transport {
 public:
  std::string send(const BackendSpec& backend, const ChatRequest& req,
                   const std::string& key) override;
};

struct RetryPolicy {
  int max_attempts = 5;
  std::chrono::milliseconds base_delay{1000};
  double factor = 2.0;
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

/// HTTP chat-completion client. Transient failures (connection errors, 408,
/// 429, 5xx) are retried with exponential backoff; 401/403 raise AuthError.
class HttpTransport final : public Transport {
 public:
  HttpTransport(RetryPolicy policy, Sleeper sleep);
  std::string send(const BackendSpec& backend, const ChatRequest& req,
                   const std::string& key) override;

 private:
  RetryPolicy policy_;
  Sleeper sleep_;
};

/// Calls a function; handy for tests.
class CallbackTransport final : public Transport {
 public:
  using Fn = std::function<std::string(const BackendSpec&, const ChatRequest&)>;
  explicit CallbackTransport(Fn fn) : fn_(std::move(fn)) {}
  std::string send(const BackendSpec& backend, const ChatRequest& req,
                   const std::string&) override {
    return fn_(backend, req);
  }

 private:
  Fn fn_;
};

/// Scripted replies: first rule whose backend, substring and seed all match.
/// Used to author mock fixtures.
class RuleTransport final : public Transport {
 public:
  struct Rule {
    std::optional<std::string> backend;
    std::optional<std::string> contains;
    std::optional<std::int64_t> seed;
    std::string reply;
  };
  explicit RuleTransport(std::vector<Rule> rules) : rules_(std::move(rules)) {}
  /// {"rules": [{"backend", "contains", "seed", "reply"}, ...]}
  static RuleTransport from_json(const nlohmann::json& j);
  std::string send(const BackendSpec& backend, const ChatRequest& req,
                   const std::string& key) override;

 private:
  std::vector<Rule> rules_;
};

/// Writes `<dir>/<key>.txt` plus a sorted, human-readable `index.jsonl`.
class FixtureWriter {
 public:
  explicit FixtureWriter(std::filesystem::path dir);
  void put(const std::string& key, const BackendSpec& backend,
           const ChatRequest& req, const std::string& reply);

 private:
  std::filesystem::path dir_;
  std::mutex mu_;
  std::map<std::string, std::string> index_;
};

/// Decorator that records every exchange into its backend's fixture dir.
class RecordingTransport final : public Transport {
 public:
  explicit RecordingTransport(std::shared_ptr<Transport> inner)
      : inner_(std::move(inner)) {}
  std::string send(const BackendSpec& backend, const ChatRequest& req,
                   const std::string& key) override;

 private:
  std::shared_ptr<Transport> inner_;
  std::mutex mu_;
  std::map<std::filesystem::path, std::unique_ptr<FixtureWriter>> writers_;
};

/// Content-addressed response cache; memory layer over an optional directory.
/// Disk writes go to a temp file renamed into place.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir = {});
  std::optional<std::string> get(const std::string& key);
  void put(const std::string& key, const std::string& value);

 private:
  std::filesystem::path dir_;
  std::mutex mu_;
  std::map<std::string, std::string> memory_;
};

/// Counting gate bounding in-flight calls; tracks the peak.
class ConcurrencyLimiter {
 public:
  explicit ConcurrencyLimiter(int limit) : limit_(limit) {}
  void acquire();
  void release();
  int peak() const;

 private:
  mutable std::mutex mu_;
  std::condition_variable cv_;
  int limit_;
  int in_flight_ = 0;
  int peak_ = 0;
};

struct GatewayOptions {
  std::filesystem::path cache_dir;
  bool offline = false;
  RetryPolicy retry;
  Sleeper sleep;  // defaults to std::this_thread::sleep_for
  /// Replaces every backend's transport (tests, fixture authoring).
  std::shared_ptr<Transport> transport_override;
};

/// Per-slot outcome of sample_candidates.
struct SampleResult {
  std::vector<std::optional<std::string>> texts;
  struct Failure {
    std::size_t slot;
    std::string message;
    std::exception_ptr error;
  };
  std::vector<Failure> failures;

  bool all_ok() const { return failures.empty(); }
};

/// Uniform, thread-safe client over the configured backends.
class Gateway {
 public:
  Gateway(std::vector<BackendSpec> backends, GatewayOptions options = {});
  ~Gateway();
  Gateway(const Gateway&) = delete;
  Gateway& operator=(const Gateway&) = delete;

  const BackendSpec& backend(const std::string& name) const;
  bool has_backend(const std::string& name) const;

  std::string complete(const std::string& backend, const ChatRequest& req);

  /// Parses the first JSON array/object of the reply; on failure re-asks once
  /// with "Return only valid JSON." appended, then throws JsonParseError.
  nlohmann::json complete_json(const std::string& backend, ChatRequest req);

  /// n completions with seed_i = base_seed + i (base 0 when unset); unset
  /// temperature/top_p take the nucleus-sampling defaults.
  SampleResult sample_candidates(const std::string& backend,
                                 const ChatRequest& req, int n);

  std::uint64_t transport_calls() const { return transport_calls_.load(); }
  std::uint64_t cache_hits() const { return cache_hits_.load(); }
  int peak_in_flight(const std::string& backend) const;

 private:
  struct Entry {
    BackendSpec spec;
    std::unique_ptr<ConcurrencyLimiter> limiter;
  };

  Transport& transport_for(const BackendSpec& spec);

  std::map<std::string, Entry> backends_;
  GatewayOptions options_;
  ResponseCache cache_;
  std::shared_ptr<Transport> fixture_transport_;
  std::shared_ptr<Transport> http_transport_;
  std::atomic<std::uint64_t> transport_calls_{0};
  std::atomic<std::uint64_t> cache_hits_{0};
};

inline constexpr const char* kJsonRepairSuffix = "Return only valid JSON.";

}  // namespace capeval

#endif  // CAPEVAL_BACKEND_HPP_
