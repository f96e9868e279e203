#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "scbench/metrics.hpp"

namespace scbench {

/// Per-model means for one strategy, or absent when the model has no rows for it.
struct LeaderboardCell {
    bool present = false;
    GroupStats stats;
};

struct LeaderboardRow {
    std::string model;
    LeaderboardCell zero_shot;
    LeaderboardCell cot;
};

/// Groups rows by (model, strategy). Models keep first-appearance order.
std::vector<LeaderboardRow> build_leaderboard(const std::vector<ScoreRow> &rows);

/// Plain-text tables: BLEU-1 / BLEU-2 / Average for zero-shot then CoT, and a
/// second table with EM / F1. Scores are x100 with two decimals; missing
/// strategies print "-".
void render_leaderboard(const std::vector<LeaderboardRow> &rows, std::ostream &out);

} // namespace scbench
