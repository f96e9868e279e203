#include "scbench/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>

#include "scbench/error.hpp"
#include "scbench/labels.hpp"

namespace scbench {
namespace {

using NgramCounts = std::map<Tokens, int>;

NgramCounts count_ngrams(const Tokens &tokens, std::size_t n) {
    NgramCounts counts;
    if (tokens.size() < n) return counts;
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) ++counts[Tokens(tokens.begin() + i, tokens.begin() + i + n)];
    return counts;
}

double clipped_precision(const Tokens &candidate, const std::vector<Tokens> &references, std::size_t n) {
    const auto cand = count_ngrams(candidate, n);
    NgramCounts max_ref;
    for (const auto &ref : references) {
        for (const auto &[gram, count] : count_ngrams(ref, n)) {
            auto &slot = max_ref[gram];
            slot = std::max(slot, count);
        }
    }
    int matches = 0;
    int total = 0;
    for (const auto &[gram, count] : cand) {
        total += count;
        if (auto it = max_ref.find(gram); it != max_ref.end()) matches += std::min(count, it->second);
    }
    if (matches == 0) return 1.0 / (static_cast<double>(total) + 1.0);
    return static_cast<double>(matches) / static_cast<double>(total);
}

std::map<std::string, int> bag(const Tokens &tokens) {
    std::map<std::string, int> counts;
    for (const auto &t : tokens) ++counts[t];
    return counts;
}

std::string csv_field(std::string_view s) {
    if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

const std::string &field_value(const ScoreRow &row, std::string_view field) {
    if (field == "model") return row.model;
    if (field == "strategy") return row.strategy;
    if (field == "tissue") return row.tissue;
    if (field == "dataset_id") return row.dataset_id;
    throw InvalidArgument("unknown group field '" + std::string(field) + "'");
}

} // namespace

BleuScores bleu(const Tokens &candidate, const std::vector<Tokens> &references) {
    if (references.empty()) throw InvalidArgument("bleu needs at least one reference");
    BleuScores s;
    if (candidate.empty()) return s;
    const double c = static_cast<double>(candidate.size());
    double closest = static_cast<double>(references.front().size());
    for (const auto &ref : references) {
        const double r = static_cast<double>(ref.size());
        const double d = std::fabs(r - c);
        const double best = std::fabs(closest - c);
        if (d < best || (d == best && r < closest)) closest = r;
    }
    const double bp = c >= closest ? 1.0 : std::exp(1.0 - closest / c);
    const double p1 = clipped_precision(candidate, references, 1);
    const double p2 = clipped_precision(candidate, references, 2);
    s.bleu1 = bp * p1;
    s.bleu2 = bp * std::sqrt(p1 * p2);
    s.bleu_avg = std::sqrt(s.bleu1 * s.bleu2);
    return s;
}

int exact_match(std::string_view candidate, const std::vector<std::string> &references) {
    if (candidate.empty()) return 0;
    return std::any_of(references.begin(), references.end(), [&](const std::string &r) { return r == candidate; })
               ? 1
               : 0;
}

double token_f1(std::string_view candidate, const std::vector<std::string> &references) {
    const auto cand = tokenize(candidate);
    const auto cand_bag = bag(cand);
    double best = 0.0;
    for (const auto &reference : references) {
        const auto ref = tokenize(reference);
        if (cand.empty() || ref.empty()) {
            best = std::max(best, cand.empty() && ref.empty() ? 1.0 : 0.0);
            continue;
        }
        int overlap = 0;
        for (const auto &[token, count] : bag(ref)) {
            if (auto it = cand_bag.find(token); it != cand_bag.end()) overlap += std::min(count, it->second);
        }
        if (overlap == 0) continue;
        const double precision = static_cast<double>(overlap) / static_cast<double>(cand.size());
        const double recall = static_cast<double>(overlap) / static_cast<double>(ref.size());
        best = std::max(best, 2.0 * precision * recall / (precision + recall));
    }
    return best;
}

double ScoreRow::metric(std::size_t index) const {
    switch (index) {
    case 0: return bleu1;
    case 1: return bleu2;
    case 2: return bleu_avg;
    case 3: return em;
    case 4: return f1;
    }
    throw InvalidArgument("metric index out of range");
}

void score_prediction(std::string_view cleansed, const SynonymSet &references, ScoreRow &row) {
    row.prediction = normalize_label(cleansed);
    row.bleu1 = row.bleu2 = row.bleu_avg = row.em = row.f1 = 0.0;
    if (row.prediction.empty()) return;
    std::vector<std::string> refs;
    std::vector<Tokens> ref_tokens;
    for (const auto &synonym : references.synonyms) {
        refs.push_back(normalize_label(synonym));
        ref_tokens.push_back(tokenize(refs.back()));
    }
    if (refs.empty()) throw InvalidArgument("sample " + row.sample_id + " has no reference labels");
    const auto b = bleu(tokenize(row.prediction), ref_tokens);
    row.bleu1 = b.bleu1;
    row.bleu2 = b.bleu2;
    row.bleu_avg = b.bleu_avg;
    row.em = exact_match(row.prediction, refs);
    row.f1 = token_f1(row.prediction, refs);
}

nlohmann::json to_json(const ScoreRow &row) {
    return {
        {"sample_id", row.sample_id}, {"model", row.model},     {"strategy", row.strategy},
        {"tissue", row.tissue},       {"dataset_id", row.dataset_id}, {"prediction", row.prediction},
        {"bleu1", row.bleu1},         {"bleu2", row.bleu2},     {"bleu_avg", row.bleu_avg},
        {"em", row.em},               {"f1", row.f1},
    };
}

ScoreRow score_row_from_json(const nlohmann::json &json) {
    ScoreRow row;
    row.sample_id = json.at("sample_id").get<std::string>();
    row.model = json.at("model").get<std::string>();
    row.strategy = json.at("strategy").get<std::string>();
    row.tissue = json.at("tissue").get<std::string>();
    row.dataset_id = json.at("dataset_id").get<std::string>();
    row.prediction = json.value("prediction", std::string{});
    row.bleu1 = json.at("bleu1").get<double>();
    row.bleu2 = json.at("bleu2").get<double>();
    row.bleu_avg = json.at("bleu_avg").get<double>();
    row.em = json.at("em").get<double>();
    row.f1 = json.at("f1").get<double>();
    return row;
}

EvalReport aggregate(std::vector<ScoreRow> rows, const std::vector<std::string> &group_by) {
    if (rows.empty()) throw InvalidArgument("cannot aggregate an empty set of score rows");
    EvalReport report;
    report.group_by = group_by;
    std::map<std::string, std::array<double, kMetricNames.size()>> sums;
    for (const auto &row : rows) {
        std::string key;
        for (const auto &field : group_by) {
            if (!key.empty()) key += '|';
            key += field + "=" + field_value(row, field);
        }
        if (key.empty()) key = "all";
        auto &sum = sums[key];
        for (std::size_t m = 0; m < kMetricNames.size(); ++m) sum[m] += row.metric(m);
        ++report.groups[key].n;
    }
    for (auto &[key, stats] : report.groups) {
        for (std::size_t m = 0; m < kMetricNames.size(); ++m)
            stats.mean[m] = sums[key][m] / static_cast<double>(stats.n);
    }
    report.rows = std::move(rows);
    return report;
}

std::string format_percent(double score) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", score * 100.0);
    return buf;
}

void write_summary_csv(const std::vector<EvalReport> &reports, std::ostream &out, std::string_view config_digest) {
    if (!config_digest.empty()) out << "# config_digest=" << config_digest << '\n';
    out << "group,metric,mean,n\n";
    for (const auto &report : reports) {
        for (const auto &[key, stats] : report.groups) {
            for (std::size_t m = 0; m < kMetricNames.size(); ++m)
                out << csv_field(key) << ',' << kMetricNames[m] << ',' << format_percent(stats.mean[m]) << ','
                    << stats.n << '\n';
        }
    }
}

} // namespace scbench
