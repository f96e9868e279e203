#include <doctest.h>

#include <random>
#include <sstream>

#include "oracles.hpp"
#include "scbench/error.hpp"
#include "scbench/labels.hpp"
#include "scbench/metrics.hpp"
#include "scbench/report.hpp"

using namespace scbench;

namespace {

std::string random_phrase(std::mt19937_64 &rng, int max_words) {
    static const std::vector<std::string> vocab{"t", "b", "cell", "dendritic", "myeloid", "progenitor", "stem", "cd4+"};
    const int n = static_cast<int>(rng() % (max_words + 1));
    std::string out;
    for (int i = 0; i < n; ++i) out += (i ? " " : "") + vocab[rng() % vocab.size()];
    return out;
}

ScoreRow row(std::string model, std::string strategy, std::string tissue, double value) {
    ScoreRow r;
    r.sample_id = model + strategy + tissue;
    r.model = std::move(model);
    r.strategy = std::move(strategy);
    r.tissue = std::move(tissue);
    r.dataset_id = "ds";
    r.bleu1 = r.bleu2 = r.bleu_avg = r.em = r.f1 = value;
    return r;
}

} // namespace

TEST_CASE("documented metric examples") {
    const auto b = bleu(oracle::split("hematopoietic progenitor cell"), {oracle::split("plasmablast")});
    CHECK(b.bleu1 == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(b.bleu2 == doctest::Approx(0.288675134594813).epsilon(1e-12));
    CHECK(b.bleu_avg == doctest::Approx(0.268642).epsilon(1e-6));
    CHECK(token_f1("dendritic cell", {"myeloid dendritic cell"}) == doctest::Approx(0.8).epsilon(1e-15));
    CHECK(exact_match("dendritic cell", {"myeloid dendritic cell"}) == 0);
    CHECK(exact_match("b cell", {"b lymphocyte", "b cell"}) == 1);
    CHECK(exact_match("", {""}) == 0);
    CHECK(token_f1("", {""}) == 1.0);
    CHECK(token_f1("a", {""}) == 0.0);

    const auto perfect = bleu(oracle::split("b cell"), {oracle::split("b cell")});
    CHECK(perfect.bleu1 == 1.0);
    CHECK(perfect.bleu2 == 1.0);
    CHECK(bleu({}, {oracle::split("x")}).bleu_avg == 0.0);
    CHECK_THROWS_AS(bleu(oracle::split("x"), {}), InvalidArgument);
}

TEST_CASE("metrics agree with the reference implementations on random pairs") {
    std::mt19937_64 rng(2024);
    for (int i = 0; i < 200; ++i) {
        const auto cand = random_phrase(rng, 5);
        std::vector<std::string> refs;
        const int n_refs = 1 + static_cast<int>(rng() % 3);
        for (int r = 0; r < n_refs; ++r) refs.push_back(random_phrase(rng, 5));
        std::vector<Tokens> ref_tokens;
        for (const auto &r : refs) ref_tokens.push_back(oracle::split(r));

        const auto got = bleu(oracle::split(cand), ref_tokens);
        const auto want = oracle::bleu(oracle::split(cand), ref_tokens);
        CHECK(std::fabs(got.bleu1 - want.b1) < 1e-12);
        CHECK(std::fabs(got.bleu2 - want.b2) < 1e-12);
        CHECK(std::fabs(got.bleu_avg - want.avg) < 1e-12);
        CHECK(token_f1(cand, refs) == doctest::Approx(oracle::f1(cand, refs)).epsilon(1e-12));
        CHECK(exact_match(cand, refs) == oracle::em(cand, refs));
    }
}

TEST_CASE("adding a reference never lowers EM, F1 or clipped precision") {
    std::mt19937_64 rng(31);
    for (int i = 0; i < 200; ++i) {
        const auto cand = random_phrase(rng, 4);
        std::vector<std::string> refs{random_phrase(rng, 4)};
        const auto extra = random_phrase(rng, 4);
        auto more = refs;
        more.push_back(extra);
        CHECK(exact_match(cand, more) >= exact_match(cand, refs));
        CHECK(token_f1(cand, more) >= token_f1(cand, refs));
        std::vector<Tokens> a{oracle::split(refs[0])}, b{oracle::split(refs[0]), oracle::split(extra)};
        for (std::size_t n : {1u, 2u})
            CHECK(oracle::precision(oracle::split(cand), b, n) >= oracle::precision(oracle::split(cand), a, n));
    }
}

TEST_CASE("score_prediction normalizes both sides") {
    ScoreRow r;
    score_prediction("B cells", {"B cell", {"B cell", "B lymphocyte"}}, r);
    CHECK(r.prediction == "b cell");
    CHECK(r.em == 1.0);
    CHECK(r.f1 == 1.0);
    CHECK(r.bleu_avg == 1.0);
    score_prediction("", {"B cell", {"B cell"}}, r);
    CHECK(r.em == 0.0);
    CHECK(r.bleu1 == 0.0);
    const auto back = score_row_from_json(to_json(r));
    CHECK(back.prediction == r.prediction);
    CHECK(back.f1 == r.f1);
}

TEST_CASE("aggregate means match regrouping by hand") {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<ScoreRow> rows;
    for (int i = 0; i < 60; ++i)
        rows.push_back(row(i % 3 ? "m1" : "m2", i % 2 ? "cot" : "zero_shot", i % 5 ? "Liver" : "Lung", u(rng)));
    const auto report = aggregate(rows, {"model", "tissue"});
    std::map<std::string, std::pair<double, std::size_t>> hand;
    for (const auto &r : rows) {
        auto &[sum, n] = hand["model=" + r.model + "|tissue=" + r.tissue];
        sum += r.f1;
        ++n;
    }
    REQUIRE(report.groups.size() == hand.size());
    for (const auto &[key, sn] : hand) {
        CHECK(report.groups.at(key).n == sn.second);
        CHECK(report.groups.at(key).mean[4] == doctest::Approx(sn.first / sn.second).epsilon(1e-12));
    }
    CHECK(aggregate(rows, {}).groups.at("all").n == 60);
    CHECK_THROWS_AS(aggregate(rows, {"colour"}), InvalidArgument);
    CHECK_THROWS_AS(aggregate({}, {}), InvalidArgument);
}

TEST_CASE("summary CSV layout") {
    std::vector<ScoreRow> rows{row("a", "cot", "Lung, left", 0.5), row("a", "cot", "Liver", 0.12345)};
    std::ostringstream out;
    write_summary_csv({aggregate(rows, {}), aggregate(rows, {"tissue"})}, out, "abc");
    const auto text = out.str();
    CHECK(text.rfind("# config_digest=abc\ngroup,metric,mean,n\nall,bleu1,31.17,2\n", 0) == 0);
    CHECK(text.find("tissue=Liver,em,12.35,1\n") != std::string::npos);
    CHECK(text.find("\"tissue=Lung, left\",f1,50.00,1\n") != std::string::npos);
    CHECK(format_percent(0.4096) == "40.96");
    CHECK(format_percent(0.0) == "0.00");
}

TEST_CASE("leaderboard layout") {
    std::vector<ScoreRow> rows{row("big", "zero_shot", "x", 0.5), row("big", "cot", "x", 0.25),
                               row("small", "cot", "x", 1.0)};
    const auto board = build_leaderboard(rows);
    REQUIRE(board.size() == 2);
    CHECK(board[0].model == "big");
    CHECK_FALSE(board[1].zero_shot.present);
    std::ostringstream out;
    render_leaderboard(board, out);
    const auto text = out.str();
    CHECK(text.find("ZS:B1") != std::string::npos);
    CHECK(text.find("CoT:F1") != std::string::npos);
    CHECK(text.find("50.00") != std::string::npos);
    CHECK(text.find("100.00") != std::string::npos);
    CHECK(text.find('-') != std::string::npos);
    CHECK_THROWS_AS(build_leaderboard({}), InvalidArgument);
}
