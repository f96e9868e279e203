#include "scbench/prompting.hpp"

#include <chrono>
#include <ctime>

namespace scbench {
namespace {

std::string utc_now() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::vector<ChatMessage> with_system(const PromptOptions &options, ChatMessage user) {
    std::vector<ChatMessage> messages;
    if (options.system_message) messages.push_back({Role::system, std::string(kSystemMessage)});
    messages.push_back(std::move(user));
    return messages;
}

class TranscriptBuilder {
  public:
    TranscriptBuilder(const CellQuery &query, Strategy strategy, Gateway &gateway, const ExchangeSink &sink)
        : gateway_(gateway), sink_(sink) {
        transcript_.sample_id = query.sample_id;
        transcript_.strategy = strategy;
    }

    const std::string &call(int round, std::vector<ChatMessage> request, const SamplingParams &params) {
        std::string response;
        try {
            response = gateway_.complete(request, params);
        } catch (const Error &e) {
            throw PromptError("sample " + transcript_.sample_id + ", round " + std::to_string(round) + ": " + e.what(),
                              transcript_);
        }
        Exchange exchange{transcript_.sample_id,
                          round,
                          std::move(request),
                          params,
                          std::move(response),
                          gateway_.config().name,
                          gateway_.config().model,
                          gateway_.mode() == "replay" ? std::nullopt : std::optional(utc_now())};
        if (sink_) sink_(exchange);
        transcript_.rounds.push_back(std::move(exchange));
        return transcript_.rounds.back().response;
    }

    PromptTranscript finish() {
        transcript_.final_response = transcript_.rounds.back().response;
        return std::move(transcript_);
    }

  private:
    Gateway &gateway_;
    const ExchangeSink &sink_;
    PromptTranscript transcript_;
};

} // namespace

void CellQuery::validate() const {
    if (markers.empty()) throw InvalidArgument("query " + sample_id + " has no markers");
    if (context.empty()) throw InvalidArgument("query " + sample_id + " has no context");
}

std::string_view to_string(Strategy strategy) { return strategy == Strategy::cot ? "cot" : "zero_shot"; }

Strategy parse_strategy(std::string_view text) {
    if (text == "zero_shot") return Strategy::zero_shot;
    if (text == "cot") return Strategy::cot;
    throw ConfigError("unknown strategy '" + std::string(text) + "' (expected zero_shot or cot)");
}

PromptVariant parse_prompt_variant(std::string_view text) {
    if (text == "standard") return PromptVariant::standard;
    if (text == "appendix") return PromptVariant::appendix;
    throw ConfigError("unknown prompt variant '" + std::string(text) + "' (expected standard or appendix)");
}

std::string_view trigger(TriggerKind kind, PromptVariant variant) {
    switch (kind) {
    case TriggerKind::zero_shot: return "The most likely cell type (directly return one cell type name) is";
    case TriggerKind::cot: return "Let's think step by step.";
    case TriggerKind::cot_summary:
        return variant == PromptVariant::appendix
                   ? "In summary, the most likely cell type (directly return one cell type name) is"
                   : "In summary, the most likely cell type (please return one cell type name) is";
    }
    return {};
}

std::string format_markers(const std::vector<std::string> &markers) {
    std::string out = "[";
    for (std::size_t i = 0; i < markers.size(); ++i) {
        if (i > 0) out += ", ";
        out += markers[i];
    }
    out += "]";
    return out;
}

std::string build_question(const CellQuery &query, PromptVariant variant) {
    query.validate();
    const std::string_view what = variant == PromptVariant::appendix ? "the cell type" : "the specific cell type";
    return "Given the following markers " + format_markers(query.markers) + ", what is " + std::string(what) + " in " +
           query.context + " corresponding to these markers?";
}

std::vector<ChatMessage> build_zero_shot(const CellQuery &query, const PromptOptions &options) {
    return with_system(options, {Role::user, build_question(query, options.question) + " " +
                                                 std::string(trigger(TriggerKind::zero_shot))});
}

std::vector<ChatMessage> build_cot_reasoning(const CellQuery &query, const PromptOptions &options) {
    return with_system(options,
                       {Role::user, build_question(query, options.question) + " " + std::string(trigger(TriggerKind::cot))});
}

std::vector<ChatMessage> build_cot_summary(const CellQuery &query, const std::string &reasoning,
                                           const PromptOptions &options) {
    auto messages = build_cot_reasoning(query, options);
    messages.push_back({Role::assistant, reasoning});
    messages.push_back({Role::user, std::string(trigger(TriggerKind::cot_summary, options.summary_trigger))});
    return messages;
}

nlohmann::json to_json(const Exchange &exchange) {
    nlohmann::json out{
        {"sample_id", exchange.sample_id},
        {"round", exchange.round},
        {"request", to_json(ChatRequest{exchange.model, exchange.request, exchange.params})},
        {"response", exchange.response},
        {"provider", exchange.provider},
        {"model", exchange.model},
    };
    out["timestamp"] = exchange.timestamp ? nlohmann::json(*exchange.timestamp) : nlohmann::json(nullptr);
    return out;
}

Exchange exchange_from_json(const nlohmann::json &json) {
    Exchange e;
    e.sample_id = json.at("sample_id").get<std::string>();
    e.round = json.at("round").get<int>();
    const auto &request = json.at("request");
    for (const auto &m : request.at("messages"))
        e.request.push_back({parse_role(m.at("role").get<std::string>()), m.at("content").get<std::string>()});
    e.params.temperature = request.at("temperature").get<double>();
    e.params.top_p = request.at("top_p").get<double>();
    e.params.top_k = request.at("top_k").get<int>();
    e.params.max_tokens = request.at("max_tokens").get<int>();
    e.response = json.at("response").get<std::string>();
    e.provider = json.at("provider").get<std::string>();
    e.model = json.at("model").get<std::string>();
    if (json.contains("timestamp") && json.at("timestamp").is_string()) e.timestamp = json.at("timestamp").get<std::string>();
    return e;
}

PromptTranscript run_zero_shot(const CellQuery &query, Gateway &gateway, const SamplingParams &params,
                               const PromptOptions &options, const ExchangeSink &sink) {
    TranscriptBuilder builder(query, Strategy::zero_shot, gateway, sink);
    builder.call(1, build_zero_shot(query, options), params);
    return builder.finish();
}

PromptTranscript run_cot(const CellQuery &query, Gateway &gateway, const SamplingParams &params,
                         const PromptOptions &options, const ExchangeSink &sink) {
    TranscriptBuilder builder(query, Strategy::cot, gateway, sink);
    const std::string reasoning = builder.call(1, build_cot_reasoning(query, options), params);
    builder.call(2, build_cot_summary(query, reasoning, options), params);
    return builder.finish();
}

PromptTranscript run_strategy(Strategy strategy, const CellQuery &query, Gateway &gateway,
                              const SamplingParams &params, const PromptOptions &options, const ExchangeSink &sink) {
    return strategy == Strategy::cot ? run_cot(query, gateway, params, options, sink)
                                     : run_zero_shot(query, gateway, params, options, sink);
}

} // namespace scbench
