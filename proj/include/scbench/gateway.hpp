#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "scbench/chat.hpp"
#include "scbench/error.hpp"

namespace scbench {

struct SamplingParams {
    double temperature = 0.6;
    double top_p = 0.9;
    int top_k = 50;
    int max_tokens = 1024;

    void validate() const;
};

struct RetryPolicy {
    int max_attempts = 3;
    std::chrono::milliseconds base_backoff{1000};
    double jitter = 0.2;          // relative, uniform in [-jitter, +jitter]
    std::uint64_t jitter_seed = 0;
};

struct ProviderConfig {
    std::string name;
    std::string endpoint;         // base URL; requests go to {endpoint}/chat/completions
    std::string model;
    std::string auth_env;         // bearer token variable; empty for unauthenticated endpoints
    RetryPolicy retry;
    int in_flight_limit = 4;
    std::chrono::milliseconds timeout{120000};

    void validate() const;
};

struct ChatRequest {
    std::string model;
    std::vector<ChatMessage> messages;
    SamplingParams params;
};

/// OpenAI-style chat-completions body. This is also the canonical request
/// stored in replay files.
nlohmann::json to_json(const ChatRequest &request);

/// Removes every "timestamp" member, recursively. Key order is already
/// canonical because json objects are sorted maps.
nlohmann::json canonical_request(nlohmann::json request);

/// SHA-256 (hex) of the canonical serialization of `request`.
std::string request_digest(const nlohmann::json &request);

std::string sha256_hex(std::string_view data);

enum class GatewayErrorKind {
    auth_missing,
    non_retryable,
    attempts_exhausted,
    bad_response,
    replay_miss,
    replay_collision,
};

std::string_view to_string(GatewayErrorKind kind);

class GatewayError : public Error {
  public:
    GatewayError(GatewayErrorKind kind, const std::string &what, int status = 0)
        : Error(std::string(to_string(kind)) + ": " + what), kind_(kind), status_(status) {}

    GatewayErrorKind kind() const { return kind_; }
    int status() const { return status_; }

  private:
    GatewayErrorKind kind_;
    int status_;
};

class Provider {
  public:
    virtual ~Provider() = default;
    /// Returns the assistant text for `request`. Blocking.
    virtual std::string complete(const ChatRequest &request) = 0;
    /// "live", "record" or "replay".
    virtual std::string_view mode() const = 0;
};

struct HttpReply {
    int status = 0;               // 0 when the transport failed
    std::string body;
    std::string error;
};

class HttpTransport {
  public:
    virtual ~HttpTransport() = default;
    virtual HttpReply post(const std::string &endpoint, const std::string &path, const std::string &body,
                           const std::string &bearer_token, std::chrono::milliseconds timeout) = 0;
};

/// cpp-httplib transport; supports http:// and https:// endpoints.
class HttplibTransport : public HttpTransport {
  public:
    HttpReply post(const std::string &endpoint, const std::string &path, const std::string &body,
                   const std::string &bearer_token, std::chrono::milliseconds timeout) override;
};

struct AttemptRecord {
    int attempt;                  // 1-based
    int status;                   // HTTP status, 0 on transport failure
    std::string error;
    std::chrono::milliseconds backoff{0}; // sleep before the next attempt, 0 if none
};

/// HTTP chat-completions client with retry on 429, 5xx and transport errors.
class LiveProvider : public Provider {
  public:
    using Sleeper = std::function<void(std::chrono::milliseconds)>;
    using AttemptLogger = std::function<void(const AttemptRecord &)>;

    /// Reads the bearer token from `cfg.auth_env` now; throws
    /// GatewayError(auth_missing) when the variable is unset.
    explicit LiveProvider(ProviderConfig cfg, std::shared_ptr<HttpTransport> transport = nullptr,
                          Sleeper sleeper = nullptr);

    std::string complete(const ChatRequest &request) override;
    std::string_view mode() const override { return "live"; }

    void set_attempt_logger(AttemptLogger logger) { logger_ = std::move(logger); }

  private:
    std::chrono::milliseconds backoff(int attempt);

    ProviderConfig cfg_;
    std::string token_;
    std::string path_;
    std::string base_;
    std::shared_ptr<HttpTransport> transport_;
    Sleeper sleeper_;
    AttemptLogger logger_;
    std::mutex rng_mutex_;
    std::mt19937_64 rng_;
};

/// Assistant text extracted from a chat-completions response body.
std::string parse_completion(const std::string &body);

/// Request-digest keyed store of recorded responses, persisted as JSON lines
/// `{digest, request, response}`.
class ReplayStore {
  public:
    ReplayStore() = default;
    /// Loads `path` if it exists; later record() calls append to it.
    explicit ReplayStore(std::filesystem::path path);

    /// Adds the pair and appends it to the file. Re-recording an identical pair
    /// is a no-op. Throws GatewayError(replay_collision) when the digest is
    /// already bound to a different request or response.
    void record(const nlohmann::json &request, const std::string &response);
    std::optional<std::string> lookup(const nlohmann::json &request) const;

    std::size_t size() const;
    const std::filesystem::path &path() const { return path_; }

  private:
    struct Stored {
        nlohmann::json request;
        std::string response;
    };

    std::filesystem::path path_;
    mutable std::mutex mutex_;
    std::map<std::string, Stored> entries_;
};

class ReplayProvider : public Provider {
  public:
    explicit ReplayProvider(std::shared_ptr<const ReplayStore> store) : store_(std::move(store)) {}
    std::string complete(const ChatRequest &request) override;
    std::string_view mode() const override { return "replay"; }

  private:
    std::shared_ptr<const ReplayStore> store_;
};

/// Serves recorded responses and forwards misses to `inner`, recording them.
class RecordingProvider : public Provider {
  public:
    RecordingProvider(std::shared_ptr<Provider> inner, std::shared_ptr<ReplayStore> store)
        : inner_(std::move(inner)), store_(std::move(store)) {}
    std::string complete(const ChatRequest &request) override;
    std::string_view mode() const override { return "record"; }

  private:
    std::shared_ptr<Provider> inner_;
    std::shared_ptr<ReplayStore> store_;
};

/// Shareable front end for one provider: fills in the model name, bounds the
/// number of concurrent requests and counts calls.
class Gateway {
  public:
    Gateway(ProviderConfig cfg, std::shared_ptr<Provider> provider);

    std::string complete(const std::vector<ChatMessage> &messages, const SamplingParams &params);

    const ProviderConfig &config() const { return cfg_; }
    std::string_view mode() const { return provider_->mode(); }
    std::size_t calls() const;
    int peak_in_flight() const;

  private:
    ProviderConfig cfg_;
    std::shared_ptr<Provider> provider_;
    mutable std::mutex mutex_;
    std::condition_variable slot_free_;
    int in_flight_ = 0;
    int peak_ = 0;
    std::size_t calls_ = 0;
};

/// One-shot live completion against `cfg`.
std::string complete(const ProviderConfig &cfg, const std::vector<ChatMessage> &messages,
                     const SamplingParams &params);

} // namespace scbench
