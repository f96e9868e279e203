#include <doctest.h>

#include <chrono>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "oracles.hpp"
#include "scbench/deg.hpp"
#include "scbench/error.hpp"
#include "synthetic.hpp"

using namespace scbench;

TEST_CASE("planted markers are recovered in the top ten") {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const auto data = synth::planted_bundle(seed);
        const auto start = std::chrono::steady_clock::now();
        const auto result = rank_degs(data.bundle, 10);
        CHECK(std::chrono::steady_clock::now() - start < std::chrono::seconds(5));
        CHECK(result.skipped.empty());
        for (const auto &[type, genes] : data.planted) {
            const auto &top = result.markers.at(type);
            REQUIRE(top.size() == 10);
            for (const auto &g : genes) CHECK_MESSAGE(std::find(top.begin(), top.end(), g) != top.end(), type, " ", g);
        }
    }
}

TEST_CASE("statistics match a dense per-gene oracle") {
    const auto data = synth::planted_bundle(9, 3, 12, 8, 2, 1.5);
    const auto &m = data.bundle.matrix;
    const auto result = rank_degs(data.bundle, 0);
    for (const auto &[type, ranking] : result.rankings) {
        REQUIRE(ranking.ranked.size() == m.n_genes());
        for (const auto &r : ranking.ranked) {
            std::vector<double> in, out;
            for (std::size_t c = 0; c < m.n_cells(); ++c) {
                double v = 0;
                for (const auto &e : m.row(c))
                    if (e.gene == r.gene_index) v = e.value;
                (data.bundle.cells[c].cell_type == type ? in : out).push_back(v);
            }
            const auto o = oracle::welch(in, out);
            CHECK(std::fabs(r.test.t_stat - o.t) < 1e-10);
            CHECK(std::fabs(r.test.dof - o.dof) < 1e-9);
            CHECK(std::fabs(r.test.p_value - 2 * oracle::t_sf(o.t, o.dof)) < 1e-9);
        }
    }
}

TEST_CASE("rankings are ordered and invariant to cell order") {
    const auto data = synth::planted_bundle(4, 3, 20, 30, 3, 2.0);
    const auto base = rank_degs(data.bundle, 5);
    for (const auto &[type, ranking] : base.rankings) {
        for (std::size_t i = 1; i < ranking.ranked.size(); ++i) {
            const auto &a = ranking.ranked[i - 1].test, &b = ranking.ranked[i].test;
            CHECK((a.p_value < b.p_value || (a.p_value == b.p_value && a.t_stat >= b.t_stat)));
        }
    }
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 5; ++trial) {
        std::vector<std::size_t> order(data.bundle.cells.size());
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);
        const auto shuffled = rank_degs(select_cells(data.bundle, order), 5);
        CHECK(shuffled.markers == base.markers);
        for (const auto &[type, ranking] : base.rankings) {
            const auto &other = shuffled.rankings.at(type).ranked;
            for (std::size_t i = 0; i < other.size(); ++i) {
                CHECK(other[i].gene == ranking.ranked[i].gene);
                CHECK(other[i].test.t_stat == ranking.ranked[i].test.t_stat);
                CHECK(other[i].test.p_value == ranking.ranked[i].test.p_value);
            }
        }
    }
}

TEST_CASE("k bounds the marker list and small groups are skipped") {
    auto data = synth::planted_bundle(5, 2, 5, 6, 1, 3.0);
    CHECK(rank_degs(data.bundle, 0).markers.at("TypeA").empty());
    CHECK(rank_degs(data.bundle, 100).markers.at("TypeA").size() == 6);

    // A singleton type is skipped; so is a type whose rest group is too small.
    std::vector<std::size_t> pick{0, 1, 2, 5};
    const auto sub = rank_degs(select_cells(data.bundle, pick), 3);
    REQUIRE(sub.skipped.size() == 2);
    CHECK(sub.skipped[0].cell_type == "TypeA");
    CHECK(sub.skipped[0].message == "fewer than two cells outside this type");
    CHECK(sub.skipped[1].cell_type == "TypeB");
    CHECK(sub.skipped[1].message == "fewer than two cells of this type");
    CHECK(sub.rankings.empty());

    auto raw = data.bundle;
    raw.matrix = ExpressionMatrix(raw.matrix.n_cells(), raw.matrix.n_genes(), Layout::raw_counts, {});
    CHECK_THROWS_AS(rank_degs(raw, 3), InvalidArgument);
}

TEST_CASE("rankings TSV lists the first k genes per type") {
    const auto data = synth::planted_bundle(6, 2, 4, 3, 1, 3.0);
    const auto result = rank_degs(data.bundle, 2);
    std::ostringstream out;
    write_rankings_tsv(result, 2, out);
    std::istringstream in(out.str());
    std::string line;
    std::getline(in, line);
    CHECK(line == "cell_type\trank\tgene\tt_stat\tp_value");
    int rows = 0;
    while (std::getline(in, line)) {
        ++rows;
        CHECK(std::count(line.begin(), line.end(), '\t') == 4);
    }
    CHECK(rows == 4);
    std::ostringstream all;
    write_rankings_tsv(result, 0, all);
    const auto text = all.str();
    CHECK(std::count(text.begin(), text.end(), '\n') == 7);
}
