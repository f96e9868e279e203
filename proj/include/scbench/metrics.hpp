#pragma once

#include <array>
#include <map>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "scbench/dataset.hpp"

namespace scbench {

using Tokens = std::vector<std::string>;

struct BleuScores {
    double bleu1 = 0.0;
    double bleu2 = 0.0;
    double bleu_avg = 0.0;  // geometric mean of bleu1 and bleu2
};

/// Sentence-level multi-reference BLEU-1/2.
///
/// Clipped n-gram precision uses, per n-gram, the largest count found in any
/// single reference. A precision whose match count is zero is smoothed to
/// 1 / (total + 1). The brevity penalty uses the reference length closest to
/// the candidate length (ties go to the shorter one). An empty candidate
/// scores zero. Throws InvalidArgument for an empty reference set.
BleuScores bleu(const Tokens &candidate, const std::vector<Tokens> &references);

/// 1 when the normalized candidate equals any normalized reference. An empty
/// candidate never matches.
int exact_match(std::string_view candidate, const std::vector<std::string> &references);

/// SQuAD-style token F1 (multiset overlap), maximized over references. Both
/// sides empty scores 1, one side empty scores 0.
double token_f1(std::string_view candidate, const std::vector<std::string> &references);

inline constexpr std::array<std::string_view, 5> kMetricNames = {"bleu1", "bleu2", "bleu_avg", "em", "f1"};

struct ScoreRow {
    std::string sample_id;
    std::string model;
    std::string strategy;
    std::string tissue;
    std::string dataset_id;
    std::string prediction;  // normalized
    double bleu1 = 0.0;
    double bleu2 = 0.0;
    double bleu_avg = 0.0;
    double em = 0.0;
    double f1 = 0.0;

    double metric(std::size_t index) const;
};

/// Normalizes a cleansed prediction and the references, then fills in every
/// metric of the row. Empty predictions score zero everywhere.
void score_prediction(std::string_view cleansed, const SynonymSet &references, ScoreRow &row);

nlohmann::json to_json(const ScoreRow &row);
ScoreRow score_row_from_json(const nlohmann::json &json);

struct GroupStats {
    std::array<double, kMetricNames.size()> mean{};
    std::size_t n = 0;
};

struct EvalReport {
    std::vector<std::string> group_by;
    std::vector<ScoreRow> rows;
    std::map<std::string, GroupStats> groups;
};

/// Fields accepted by aggregate(): model, strategy, tissue, dataset_id.
/// The group key is "all" for an empty field list, otherwise
/// "field=value" pairs joined by '|'.
EvalReport aggregate(std::vector<ScoreRow> rows, const std::vector<std::string> &group_by);

/// `group,metric,mean,n` with means scaled by 100 and printed with two
/// decimals. Preceded by a `# config_digest=...` line when a digest is given.
void write_summary_csv(const std::vector<EvalReport> &reports, std::ostream &out,
                       std::string_view config_digest = {});

/// Two-decimal percentage, the presentation used by every exported table.
std::string format_percent(double score);

} // namespace scbench
