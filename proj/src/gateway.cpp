#include "scbench/gateway.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <thread>

#include <httplib.h>
#include <openssl/evp.h>

namespace scbench {

std::string_view to_string(Role role) {
    switch (role) {
    case Role::system: return "system";
    case Role::user: return "user";
    case Role::assistant: return "assistant";
    }
    return "user";
}

Role parse_role(std::string_view text) {
    if (text == "system") return Role::system;
    if (text == "user") return Role::user;
    if (text == "assistant") return Role::assistant;
    throw InvalidArgument("unknown chat role '" + std::string(text) + "'");
}

std::string_view to_string(GatewayErrorKind kind) {
    switch (kind) {
    case GatewayErrorKind::auth_missing: return "auth_missing";
    case GatewayErrorKind::non_retryable: return "non_retryable";
    case GatewayErrorKind::attempts_exhausted: return "attempts_exhausted";
    case GatewayErrorKind::bad_response: return "bad_response";
    case GatewayErrorKind::replay_miss: return "replay_miss";
    case GatewayErrorKind::replay_collision: return "replay_collision";
    }
    return "unknown";
}

void SamplingParams::validate() const {
    if (!(temperature >= 0.0) || !std::isfinite(temperature)) throw ConfigError("temperature must be >= 0");
    if (!(top_p > 0.0 && top_p <= 1.0)) throw ConfigError("top_p must be in (0, 1]");
    if (top_k < 0) throw ConfigError("top_k must be >= 0");
    if (max_tokens < 1) throw ConfigError("max_tokens must be >= 1");
}

void ProviderConfig::validate() const {
    if (name.empty()) throw ConfigError("provider needs a name");
    if (model.empty()) throw ConfigError("provider '" + name + "' needs a model");
    if (retry.max_attempts < 1) throw ConfigError("provider '" + name + "': max_attempts must be >= 1");
    if (in_flight_limit < 1) throw ConfigError("provider '" + name + "': in_flight_limit must be >= 1");
    if (retry.base_backoff.count() < 0) throw ConfigError("provider '" + name + "': base_backoff must be >= 0");
}

nlohmann::json to_json(const ChatRequest &request) {
    nlohmann::json messages = nlohmann::json::array();
    for (const auto &m : request.messages) messages.push_back({{"role", to_string(m.role)}, {"content", m.content}});
    return {
        {"model", request.model},
        {"messages", std::move(messages)},
        {"temperature", request.params.temperature},
        {"top_p", request.params.top_p},
        {"top_k", request.params.top_k},
        {"max_tokens", request.params.max_tokens},
    };
}

nlohmann::json canonical_request(nlohmann::json request) {
    if (request.is_object()) {
        request.erase("timestamp");
        for (auto &[key, value] : request.items()) value = canonical_request(std::move(value));
    } else if (request.is_array()) {
        for (auto &value : request) value = canonical_request(std::move(value));
    }
    return request;
}

std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int length = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &length, EVP_sha256(), nullptr) != 1)
        throw Error("SHA-256 computation failed");
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * length);
    for (unsigned int i = 0; i < length; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xF]);
    }
    return out;
}

std::string request_digest(const nlohmann::json &request) { return sha256_hex(canonical_request(request).dump()); }

HttpReply HttplibTransport::post(const std::string &endpoint, const std::string &path, const std::string &body,
                                 const std::string &bearer_token, std::chrono::milliseconds timeout) {
    httplib::Client client(endpoint);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    httplib::Headers headers;
    if (!bearer_token.empty()) headers.emplace("Authorization", "Bearer " + bearer_token);
    auto res = client.Post(path, headers, body, "application/json");
    if (!res) return {0, {}, httplib::to_string(res.error())};
    return {res->status, res->body, {}};
}

std::string parse_completion(const std::string &body) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception &e) {
        throw GatewayError(GatewayErrorKind::bad_response, std::string("response is not JSON: ") + e.what());
    }
    try {
        return doc.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception &) {
        throw GatewayError(GatewayErrorKind::bad_response, "response has no choices[0].message.content");
    }
}

LiveProvider::LiveProvider(ProviderConfig cfg, std::shared_ptr<HttpTransport> transport, Sleeper sleeper)
    : cfg_(std::move(cfg)), transport_(std::move(transport)), sleeper_(std::move(sleeper)),
      rng_(cfg_.retry.jitter_seed) {
    cfg_.validate();
    if (!cfg_.auth_env.empty()) {
        const char *token = std::getenv(cfg_.auth_env.c_str());
        if (token == nullptr || *token == '\0')
            throw GatewayError(GatewayErrorKind::auth_missing,
                               "environment variable " + cfg_.auth_env + " is not set for provider " + cfg_.name);
        token_ = token;
    }
    if (!transport_) transport_ = std::make_shared<HttplibTransport>();
    if (!sleeper_) sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };

    auto scheme = cfg_.endpoint.find("://");
    if (scheme == std::string::npos) throw ConfigError("endpoint must be an http(s) URL: " + cfg_.endpoint);
    auto slash = cfg_.endpoint.find('/', scheme + 3);
    base_ = cfg_.endpoint.substr(0, slash);
    path_ = slash == std::string::npos ? std::string{} : cfg_.endpoint.substr(slash);
    while (!path_.empty() && path_.back() == '/') path_.pop_back();
    path_ += "/chat/completions";
}

std::chrono::milliseconds LiveProvider::backoff(int attempt) {
    double factor;
    {
        std::lock_guard lock(rng_mutex_);
        std::uniform_real_distribution<double> jitter(-cfg_.retry.jitter, cfg_.retry.jitter);
        factor = 1.0 + jitter(rng_);
    }
    const double ms = static_cast<double>(cfg_.retry.base_backoff.count()) * std::ldexp(1.0, attempt - 1) * factor;
    return std::chrono::milliseconds(static_cast<std::int64_t>(std::llround(ms)));
}

std::string LiveProvider::complete(const ChatRequest &request) {
    const std::string body = to_json(request).dump();
    std::string last_error;
    for (int attempt = 1; attempt <= cfg_.retry.max_attempts; ++attempt) {
        HttpReply reply = transport_->post(base_, path_, body, token_, cfg_.timeout);
        const bool ok = reply.status >= 200 && reply.status < 300;
        const bool retryable = reply.status == 0 || reply.status == 429 || reply.status >= 500;
        AttemptRecord record{attempt, reply.status, reply.error, {}};
        if (ok) {
            if (logger_) logger_(record);
            return parse_completion(reply.body);
        }
        last_error = reply.status == 0 ? reply.error : "HTTP " + std::to_string(reply.status);
        if (!retryable) {
            if (logger_) logger_(record);
            throw GatewayError(GatewayErrorKind::non_retryable,
                               cfg_.name + " rejected the request (" + last_error + "): " + reply.body.substr(0, 200),
                               reply.status);
        }
        if (attempt < cfg_.retry.max_attempts) record.backoff = backoff(attempt);
        if (logger_) logger_(record);
        if (record.backoff.count() > 0) sleeper_(record.backoff);
    }
    throw GatewayError(GatewayErrorKind::attempts_exhausted,
                       cfg_.name + " failed after " + std::to_string(cfg_.retry.max_attempts) +
                           " attempts, last error: " + last_error);
}

ReplayStore::ReplayStore(std::filesystem::path path) : path_(std::move(path)) {
    std::ifstream in(path_);
    if (!in) return;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json entry;
        try {
            entry = nlohmann::json::parse(line);
            auto request = canonical_request(entry.at("request"));
            auto response = entry.at("response").get<std::string>();
            auto digest = request_digest(request);
            if (entry.at("digest").get<std::string>() != digest)
                throw FormatError(path_.string(), line_no, "stored digest does not match its request");
            auto [it, inserted] = entries_.try_emplace(digest, Stored{request, response});
            if (!inserted && (it->second.request != request || it->second.response != response))
                throw GatewayError(GatewayErrorKind::replay_collision,
                                   "digest " + digest + " bound to two payloads in " + path_.string());
        } catch (const nlohmann::json::exception &e) {
            throw FormatError(path_.string(), line_no, e.what());
        }
    }
}

void ReplayStore::record(const nlohmann::json &request, const std::string &response) {
    auto canonical = canonical_request(request);
    auto digest = request_digest(canonical);
    std::lock_guard lock(mutex_);
    if (auto it = entries_.find(digest); it != entries_.end()) {
        if (it->second.request == canonical && it->second.response == response) return;
        throw GatewayError(GatewayErrorKind::replay_collision, "digest " + digest + " already holds another payload");
    }
    if (!path_.empty()) {
        std::ofstream out(path_, std::ios::app | std::ios::binary);
        if (!out) throw Error("cannot append to replay store " + path_.string());
        out << nlohmann::json{{"digest", digest}, {"request", canonical}, {"response", response}}.dump() << '\n';
    }
    entries_.emplace(std::move(digest), Stored{std::move(canonical), response});
}

std::optional<std::string> ReplayStore::lookup(const nlohmann::json &request) const {
    auto canonical = canonical_request(request);
    auto digest = request_digest(canonical);
    std::lock_guard lock(mutex_);
    auto it = entries_.find(digest);
    if (it == entries_.end()) return std::nullopt;
    if (it->second.request != canonical)
        throw GatewayError(GatewayErrorKind::replay_collision, "digest " + digest + " matches a different request");
    return it->second.response;
}

std::size_t ReplayStore::size() const {
    std::lock_guard lock(mutex_);
    return entries_.size();
}

std::string ReplayProvider::complete(const ChatRequest &request) {
    auto json = to_json(request);
    if (auto hit = store_->lookup(json)) return *hit;
    throw GatewayError(GatewayErrorKind::replay_miss, "no recorded response for request " + request_digest(json));
}

std::string RecordingProvider::complete(const ChatRequest &request) {
    auto json = to_json(request);
    if (auto hit = store_->lookup(json)) return *hit;
    auto response = inner_->complete(request);
    store_->record(json, response);
    return response;
}

Gateway::Gateway(ProviderConfig cfg, std::shared_ptr<Provider> provider)
    : cfg_(std::move(cfg)), provider_(std::move(provider)) {
    cfg_.validate();
    if (!provider_) throw ConfigError("gateway for '" + cfg_.name + "' has no provider");
}

std::string Gateway::complete(const std::vector<ChatMessage> &messages, const SamplingParams &params) {
    params.validate();
    {
        std::unique_lock lock(mutex_);
        slot_free_.wait(lock, [&] { return in_flight_ < cfg_.in_flight_limit; });
        ++in_flight_;
        peak_ = std::max(peak_, in_flight_);
        ++calls_;
    }
    struct Release {
        Gateway *self;
        ~Release() {
            {
                std::lock_guard lock(self->mutex_);
                --self->in_flight_;
            }
            self->slot_free_.notify_one();
        }
    } release{this};
    return provider_->complete(ChatRequest{cfg_.model, messages, params});
}

std::size_t Gateway::calls() const {
    std::lock_guard lock(mutex_);
    return calls_;
}

int Gateway::peak_in_flight() const {
    std::lock_guard lock(mutex_);
    return peak_;
}

std::string complete(const ProviderConfig &cfg, const std::vector<ChatMessage> &messages,
                     const SamplingParams &params) {
    Gateway gateway(cfg, std::make_shared<LiveProvider>(cfg));
    return gateway.complete(messages, params);
}

} // namespace scbench
