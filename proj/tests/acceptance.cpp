// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

#include "e2e_fixture.hpp"
#include "mock_provider.hpp"
#include "oracles.hpp"
#include "scbench/deg.hpp"
#include "scbench/labels.hpp"
#include "scbench/metrics.hpp"
#include "scbench/pipeline.hpp"
#include "scbench/report.hpp"
#include "scbench/stats.hpp"
#include "synthetic.hpp"

using namespace scbench;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string &what) {
        if (!ok) {
            pass = false;
            if (!detail.empty()) detail += "; ";
            detail += what;
        }
    }
};

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

// Annotation fixtures: markers, context, a reasoning turn, the final answer
// and the ground-truth synonym set.
struct ChatFixture {
    std::string name;
    std::vector<std::string> markers;
    std::string context;
    std::string reasoning;
    std::string answer;
    SynonymSet truth;
    int em;
    double f1;
};

std::vector<ChatFixture> chat_fixtures() {
    return {
        {"chat1",
         {"MS4A1", "TNFRSF13B", "IGHM", "IGHD", "AIM2", "CD79A", "LINC01857", "RALGPS2", "BANK1", "CD79B"},
         "PBMC",
         "MS4A1, CD79A and CD79B encode B cell receptor components; IGHM and IGHD point to naive B cells.",
         "B cells",
         {"B cell", {"B cell", "B lymphocyte"}},
         1,
         1.0},
        {"chat2",
         {"CLEC9A", "PPY", "AL118508.1", "LINC02206", "LINC01724", "MIR1273H", "CEACAM3", "CLCN1", "AC092809.2",
          "CYP2E1"},
         "Thymus",
         "CLEC9A marks cross-presenting conventional dendritic cells; the remaining genes are weakly informative.",
         "Dendritic cells, specifically the CD141+ (BDCA-3+) subset",
         {"Myeloid dendritic cell", {"Myeloid dendritic cell"}},
         0,
         0.8},
        {"chat3",
         {"Cftr", "Epcam", "Onecut1", "Tm4sf4"},
         "Liver",
         "Cftr and Epcam together suggest biliary epithelium.",
         "Cholangiocytes",
         {"Cholangiocyte", {"Cholangiocyte"}},
         1,
         1.0},
        {"chat4",
         {"Lrp2", "Pdzk1", "Slco3a1"},
         "Kidney",
         "Lrp2 (megalin) and Pdzk1 are apical transport genes of the nephron's first segment.",
         "Proximal tubule cell.\nThese transporters are characteristic.",
         {"Proximal tubule cell", {"Proximal tubule cell"}},
         1,
         1.0},
        {"chat5",
         {"RF00322-9", "MIR624", "FO624990.1", "RNU7-134P", "RF00019-186", "ZNF587P1", "MAL2", "PINX1", "YWHAQP7",
          "AC112907.2"},
         "Bone Marrow",
         "Mostly non-coding transcripts; an immature population is a reasonable guess in marrow.",
         "Hematopoietic progenitor cell",
         {"Plasmablast", {"Plasmablast"}},
         0,
         0.0},
    };
}

CellQuery to_query(const ChatFixture &f) {
    CellQuery q;
    q.markers = f.markers;
    q.context = f.context;
    q.references = f.truth;
    q.sample_id = f.name;
    return q;
}

PromptOptions appendix_prompts() {
    PromptOptions o;
    o.question = PromptVariant::appendix;
    o.summary_trigger = PromptVariant::appendix;
    return o;
}

ProviderConfig fixture_provider() {
    ProviderConfig cfg;
    cfg.name = "fixture";
    cfg.model = "fixture-model";
    return cfg;
}

Outcome criterion1() {
    Outcome o;
    const auto start = Clock::now();
    auto store = std::make_shared<ReplayStore>();
    const SamplingParams params;
    const auto opts = appendix_prompts();
    for (const auto &f : chat_fixtures()) {
        const auto q = to_query(f);
        const auto first = build_cot_reasoning(q, opts);
        store->record(to_json(ChatRequest{"fixture-model", first, params}), f.reasoning);
        store->record(to_json(ChatRequest{"fixture-model", build_cot_summary(q, f.reasoning, opts), params}), f.answer);
    }
    Gateway gateway(fixture_provider(), std::make_shared<ReplayProvider>(store));
    for (const auto &f : chat_fixtures()) {
        const auto t = run_cot(to_query(f), gateway, params, opts);
        ScoreRow row;
        score_prediction(cleanse(t.final_response), f.truth, row);
        o.require(row.em == f.em, f.name + " EM " + std::to_string(row.em));
        o.require(std::fabs(row.f1 - f.f1) < 1e-12, f.name + " F1 " + std::to_string(row.f1));
    }
    const double s = seconds_since(start);
    o.require(s < 1.0, "took " + std::to_string(s) + " s");
    return o;
}

Outcome criterion2() {
    Outcome o;
    std::mt19937_64 rng(20240601);
    const std::vector<std::string> vocab{"b", "t", "cell", "dendritic", "myeloid", "stem", "progenitor", "cd8+"};
    auto phrase = [&] {
        const int n = 1 + static_cast<int>(rng() % 6);
        Tokens t;
        for (int i = 0; i < n; ++i) t.push_back(vocab[rng() % vocab.size()]);
        return t;
    };
    auto join = [](const Tokens &t) {
        std::string s;
        for (const auto &w : t) s += (s.empty() ? "" : " ") + w;
        return s;
    };
    double worst = 0;
    int mismatches = 0;
    for (int i = 0; i < 200; ++i) {
        const auto cand = phrase();
        std::vector<Tokens> refs(1 + rng() % 3);
        std::vector<std::string> ref_text;
        for (auto &r : refs) r = phrase(), ref_text.push_back(join(r));
        const auto got = bleu(cand, refs);
        const auto want = oracle::bleu(cand, refs);
        worst = std::max({worst, std::fabs(got.bleu1 - want.b1), std::fabs(got.bleu2 - want.b2),
                          std::fabs(got.bleu_avg - want.avg)});
        if (exact_match(join(cand), ref_text) != oracle::em(join(cand), ref_text)) ++mismatches;
        if (token_f1(join(cand), ref_text) != oracle::f1(join(cand), ref_text)) ++mismatches;
    }
    o.require(worst <= 1e-12, "BLEU deviation " + std::to_string(worst));
    o.require(mismatches == 0, std::to_string(mismatches) + " EM/F1 mismatches");
    return o;
}

Outcome criterion3() {
    Outcome o;
    std::mt19937_64 rng(303);
    std::uniform_int_distribution<int> size(2, 30);
    std::normal_distribution<double> n(0.0, 1.0);
    double dt = 0, dp = 0;
    for (int i = 0; i < 50; ++i) {
        std::vector<double> a(static_cast<std::size_t>(size(rng))), b(static_cast<std::size_t>(size(rng)));
        const double shift = n(rng), scale = std::exp(n(rng));
        for (auto &v : a) v = n(rng);
        for (auto &v : b) v = shift + scale * n(rng);
        const auto r = welch_t(a, b);
        const auto h = oracle::welch(a, b);
        dt = std::max({dt, std::fabs(r.t_stat - h.t), std::fabs(r.dof - h.dof)});
        dp = std::max(dp, std::fabs(r.p_value - 2 * oracle::t_sf(h.t, h.dof)));
    }
    o.require(dt < 1e-10, "t/dof deviation " + std::to_string(dt));
    o.require(dp < 1e-9, "p deviation " + std::to_string(dp));
    const auto w = welch_t(std::vector<double>{1, 2, 3, 4}, std::vector<double>{2, 3, 4, 5});
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", w.t_stat);
    o.require(std::string(buf) == "-1.095445" && w.dof == 6.0, std::string("worked example t=") + buf);
    return o;
}

Outcome criterion4() {
    Outcome o;
    const auto start = Clock::now();
    const auto data = synth::planted_bundle(4);
    const auto a = rank_degs(data.bundle, 10), b = rank_degs(data.bundle, 10);
    std::size_t found = 0, total = 0;
    for (const auto &[type, genes] : data.planted) {
        const auto &top = a.markers.at(type);
        for (const auto &g : genes) {
            ++total;
            found += std::find(top.begin(), top.end(), g) != top.end();
        }
    }
    o.require(found == total, std::to_string(found) + "/" + std::to_string(total) + " planted markers");
    o.require(a.markers == b.markers, "rankings differ between runs");
    const double s = seconds_since(start);
    o.require(s < 5.0, "took " + std::to_string(s) + " s");
    return o;
}

Outcome criterion5() {
    Outcome o;
    const auto start = Clock::now();
    const auto model = init_model({12, 8, 4, 16, 2}, 1.0, 5);
    const auto batches = synth::batches_by_class(synth::linear_paired(5, 10, 2, 12, 8, 3, 0.0).train, 2);
    const double err = grad_check(model, batches, 1e-5);
    o.require(err < 1e-4, "max relative error " + std::to_string(err));
    const double s = seconds_since(start);
    o.require(s < 30.0, "took " + std::to_string(s) + " s");
    if (o.pass) o.detail = "max relative error " + std::to_string(err);
    return o;
}

Outcome criterion6() {
    Outcome o;
    const auto start = Clock::now();
    const auto data = synth::linear_paired(1);
    TrainConfig cfg;
    cfg.steps = 2000;
    cfg.step_size = 3e-4;
    cfg.batch_size = 32;
    cfg.disc_steps = 2;
    cfg.seed = 1;
    const auto result = train(init_model({40, 20, 8, 32, 3}, cfg.gamma, cfg.seed), data.train, cfg);
    MatrixXd x(40, static_cast<Eigen::Index>(data.test.size()));
    MatrixXd obs(static_cast<Eigen::Index>(data.test.size()), 20);
    std::vector<std::size_t> labels;
    for (std::size_t i = 0; i < data.test.size(); ++i) {
        x.col(static_cast<Eigen::Index>(i)) = data.test[i].atac;
        obs.row(static_cast<Eigen::Index>(i)) = data.test[i].rna.transpose();
        labels.push_back(data.test[i].label);
    }
    const MatrixXd pred = translate(result.model, x).transpose();
    std::vector<std::size_t> markers(20);
    for (std::size_t g = 0; g < 20; ++g) markers[g] = g;
    const double r2 = marker_r2(pred, obs, labels, markers).mean;
    o.require(r2 >= 0.8, "held-out marker R2 " + std::to_string(r2));
    const double s = seconds_since(start);
    o.require(s < 120.0, "took " + std::to_string(s) + " s");
    if (o.pass) o.detail = "held-out marker R2 " + std::to_string(r2);
    return o;
}

Outcome criterion7() {
    Outcome o;
    testutil::TempDir dir("accept");
    testutil::write_e2e_bundle(dir.path());
    std::ostringstream log;

    auto cfg = parse_run_config(testutil::e2e_config());
    cfg.workdir = dir.path();
    cfg.replay_store = "replay.jsonl";
    cfg.replay_mode = ReplayMode::record;
    cfg.output_dir = "recorded";
    auto mock = std::make_shared<testutil::ScriptedProvider>(testutil::echo_script);
    auto store = std::make_shared<ReplayStore>(cfg.resolve(cfg.replay_store));
    const auto recorded =
        cmd_annotate(cfg, [&](const ProviderConfig &) { return std::make_shared<RecordingProvider>(mock, store); }, log);
    o.require(recorded.calls == 30, "record run made " + std::to_string(recorded.calls) + " calls");

    // Every CoT request pair: the second request carries the first response verbatim.
    const auto requests = mock->requests();
    std::size_t cot_pairs = 0;
    for (const auto &r : requests) {
        if (r.messages.size() != 4) continue;
        ++cot_pairs;
        const auto &reasoning = r.messages[2].content;
        bool matched = false;
        for (const auto &first : requests)
            if (first.messages.size() == 2 && first.messages == std::vector(r.messages.begin(), r.messages.begin() + 2))
                matched = matched || testutil::echo_script(first) == reasoning;
        o.require(matched, "summary request without its reasoning turn");
    }
    o.require(cot_pairs == 10, std::to_string(cot_pairs) + " CoT summary requests");

    cfg.replay_mode = ReplayMode::replay;
    std::vector<std::map<std::string, std::string>> trees;
    for (const char *out : {"replay_a", "replay_b"}) {
        cfg.output_dir = out;
        const auto s = cmd_annotate(cfg, default_provider_factory(cfg), log);
        o.require(s.failed == 0 && s.completed == 20, std::string(out) + " incomplete");
        o.require(s.calls == 30, std::string(out) + " made " + std::to_string(s.calls) + " calls");
        cmd_evaluate(cfg, log);
        trees.push_back(testutil::snapshot(cfg.resolve(cfg.output_dir)));
    }
    o.require(!trees[0].empty() && trees[0] == trees[1], "replayed output trees differ");
    return o;
}

Outcome criterion8() {
    Outcome o;
    const auto fixtures = chat_fixtures();
    const std::map<std::string, std::string> expected{
        {"chat1", "Given the following markers [MS4A1, TNFRSF13B, IGHM, IGHD, AIM2, CD79A, LINC01857, RALGPS2, BANK1, "
                  "CD79B], what is the cell type in PBMC corresponding to these markers? Let's think step by step."},
        {"chat4", "Given the following markers [Lrp2, Pdzk1, Slco3a1], what is the cell type in Kidney corresponding to "
                  "these markers? Let's think step by step."},
    };
    const auto opts = appendix_prompts();
    for (const auto &f : fixtures) {
        auto it = expected.find(f.name);
        if (it == expected.end()) continue;
        const auto msgs = build_cot_summary(to_query(f), f.reasoning, opts);
        o.require(msgs[1].content == it->second, f.name + " question differs");
        o.require(msgs[3].content == "In summary, the most likely cell type (directly return one cell type name) is",
                  f.name + " summary trigger differs");
    }
    return o;
}

Outcome criterion9() {
    Outcome o;
    // Zero-shot and CoT BLEU-1 / BLEU-2 / average per model.
    const std::vector<std::pair<std::string, std::array<double, 6>>> table{
        {"Mixtral-8x7B", {16.94, 6.17, 10.23, 31.57, 13.83, 20.90}},
        {"Mixtral-8x22B", {26.42, 10.49, 16.65, 40.96, 19.40, 28.19}},
    };
    std::vector<ScoreRow> rows;
    for (const auto &[model, v] : table) {
        for (int s = 0; s < 2; ++s) {
            ScoreRow r;
            r.sample_id = model + std::to_string(s);
            r.model = model;
            r.strategy = s == 0 ? "zero_shot" : "cot";
            r.bleu1 = v[3 * s] / 100;
            r.bleu2 = v[3 * s + 1] / 100;
            r.bleu_avg = v[3 * s + 2] / 100;
            rows.push_back(r);
        }
    }
    testutil::TempDir dir("accept");
    for (std::size_t i = 0; i < rows.size(); ++i)
        testutil::spit(dir / ("run" + std::to_string(i) + "/scores.jsonl"), to_json(rows[i]).dump() + "\n");
    std::ostringstream out;
    cmd_report(dir.path(), out);
    std::istringstream lines(out.str());
    bool found = false;
    for (std::string line; std::getline(lines, line);) {
        if (line.rfind("Mixtral-8x22B", 0) != 0 || line.find("40.96") == std::string::npos) continue;
        found = line.find("19.40") != std::string::npos && line.find("28.19") != std::string::npos &&
                line.find("26.42") != std::string::npos;
    }
    o.require(found, "Mixtral-8x22B row not rendered as 40.96 / 19.40 / 28.19");
    return o;
}

} // namespace

int main() {
    const std::vector<std::pair<int, std::function<Outcome()>>> criteria{
        {1, criterion1}, {2, criterion2}, {3, criterion3}, {4, criterion4}, {5, criterion5},
        {6, criterion6}, {7, criterion7}, {8, criterion8}, {9, criterion9},
    };
    int failed = 0;
    for (const auto &[n, run] : criteria) {
        Outcome o;
        try {
            o = run();
        } catch (const std::exception &e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        failed += !o.pass;
        std::cout << "criterion " << n << ": " << (o.pass ? "PASS" : "FAIL");
        if (!o.detail.empty()) std::cout << " (" << o.detail << ")";
        std::cout << std::endl;
    }
    return failed == 0 ? 0 : 1;
}
