#include "scbench/report.hpp"

#include <algorithm>
#include <iomanip>
#include <map>

#include "scbench/error.hpp"

namespace scbench {
namespace {

constexpr std::size_t kBleu1 = 0, kBleu2 = 1, kBleuAvg = 2, kEm = 3, kF1 = 4;

void cells(std::ostream &out, const LeaderboardCell &cell, std::initializer_list<std::size_t> metrics) {
    for (auto m : metrics) out << "  " << std::setw(7) << (cell.present ? format_percent(cell.stats.mean[m]) : "-");
}

} // namespace

std::vector<LeaderboardRow> build_leaderboard(const std::vector<ScoreRow> &rows) {
    if (rows.empty()) throw InvalidArgument("no score rows to report");
    std::vector<std::string> order;
    for (const auto &row : rows) {
        if (std::find(order.begin(), order.end(), row.model) == order.end()) order.push_back(row.model);
    }
    const auto report = aggregate(rows, {"model", "strategy"});
    std::vector<LeaderboardRow> board;
    for (const auto &model : order) {
        LeaderboardRow entry{model, {}, {}};
        for (auto [strategy, cell] : {std::pair{"zero_shot", &entry.zero_shot}, std::pair{"cot", &entry.cot}}) {
            auto it = report.groups.find("model=" + model + "|strategy=" + strategy);
            if (it != report.groups.end()) *cell = {true, it->second};
        }
        board.push_back(std::move(entry));
    }
    return board;
}

void render_leaderboard(const std::vector<LeaderboardRow> &rows, std::ostream &out) {
    std::size_t width = 5;
    for (const auto &r : rows) width = std::max(width, r.model.size());

    const auto header = [&](std::initializer_list<const char *> names) {
        out << std::left << std::setw(static_cast<int>(width)) << "Model" << std::right;
        for (const char *strategy : {"ZS", "CoT"}) {
            for (const char *n : names) out << "  " << std::setw(7) << (std::string(strategy) + ":" + n);
        }
        out << '\n';
    };
    const auto body = [&](std::initializer_list<std::size_t> metrics) {
        for (const auto &r : rows) {
            out << std::left << std::setw(static_cast<int>(width)) << r.model << std::right;
            cells(out, r.zero_shot, metrics);
            cells(out, r.cot, metrics);
            out << '\n';
        }
    };

    header({"B1", "B2", "Avg"});
    body({kBleu1, kBleu2, kBleuAvg});
    out << '\n';
    header({"EM", "F1"});
    body({kEm, kF1});
}

} // namespace scbench
