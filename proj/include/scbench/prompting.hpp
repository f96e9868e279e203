#pragma once

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "scbench/chat.hpp"
#include "scbench/dataset.hpp"
#include "scbench/gateway.hpp"

namespace scbench {

/// One benchmark sample: markers X, context C and the reference labels.
struct CellQuery {
    std::vector<std::string> markers;
    std::string context;
    SynonymSet references;
    std::string sample_id;
    std::string cell_type;
    std::string tissue;
    std::string dataset_id;

    void validate() const;
};

enum class TriggerKind { zero_shot, cot, cot_summary };

enum class Strategy { zero_shot, cot };

std::string_view to_string(Strategy strategy);
Strategy parse_strategy(std::string_view text);

/// Wording variants. `standard` follows the method description; `appendix`
/// reproduces the worked annotation transcripts (question without "specific",
/// summary trigger with "directly return").
enum class PromptVariant { standard, appendix };

PromptVariant parse_prompt_variant(std::string_view text);

struct PromptOptions {
    PromptVariant question = PromptVariant::standard;
    PromptVariant summary_trigger = PromptVariant::standard;
    bool system_message = true;
};

inline constexpr std::string_view kSystemMessage =
    "You are a biology expert who always responds the cell type annotation result by carefully considering the "
    "markers provided by the user.";

std::string_view trigger(TriggerKind kind, PromptVariant variant = PromptVariant::standard);

/// `[m1, m2, ...]`
std::string format_markers(const std::vector<std::string> &markers);

std::string build_question(const CellQuery &query, PromptVariant variant = PromptVariant::standard);

/// [system, user(question + " " + zero-shot trigger)]; the system message is
/// omitted when options.system_message is false.
std::vector<ChatMessage> build_zero_shot(const CellQuery &query, const PromptOptions &options = {});

/// First CoT round: [system, user(question + " " + CoT trigger)].
std::vector<ChatMessage> build_cot_reasoning(const CellQuery &query, const PromptOptions &options = {});

/// Second CoT round: the first round's messages, the reasoning verbatim as an
/// assistant turn, then the summary trigger as a user turn.
std::vector<ChatMessage> build_cot_summary(const CellQuery &query, const std::string &reasoning,
                                           const PromptOptions &options = {});

struct Exchange {
    std::string sample_id;
    int round = 1;
    std::vector<ChatMessage> request;
    SamplingParams params;
    std::string response;
    std::string provider;
    std::string model;
    std::optional<std::string> timestamp;  // UTC ISO-8601; absent for replayed calls
};

nlohmann::json to_json(const Exchange &exchange);
Exchange exchange_from_json(const nlohmann::json &json);

struct PromptTranscript {
    std::string sample_id;
    Strategy strategy = Strategy::zero_shot;
    std::vector<Exchange> rounds;
    std::string final_response;
};

/// Called after every completed provider call, before the next one starts.
using ExchangeSink = std::function<void(const Exchange &)>;

/// Thrown when a provider call fails; carries the rounds completed so far.
class PromptError : public Error {
  public:
    PromptError(const std::string &what, PromptTranscript partial)
        : Error(what), partial_(std::move(partial)) {}
    const PromptTranscript &partial() const { return partial_; }

  private:
    PromptTranscript partial_;
};

/// One provider call with the zero-shot prompt.
PromptTranscript run_zero_shot(const CellQuery &query, Gateway &gateway, const SamplingParams &params,
                               const PromptOptions &options = {}, const ExchangeSink &sink = {});

/// Two sequential provider calls: reasoning, then summary.
PromptTranscript run_cot(const CellQuery &query, Gateway &gateway, const SamplingParams &params,
                         const PromptOptions &options = {}, const ExchangeSink &sink = {});

PromptTranscript run_strategy(Strategy strategy, const CellQuery &query, Gateway &gateway,
                              const SamplingParams &params, const PromptOptions &options = {},
                              const ExchangeSink &sink = {});

} // namespace scbench
