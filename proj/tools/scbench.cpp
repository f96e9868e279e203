// Command-line front end: deg, annotate, evaluate, report, align train,
// align translate.

#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "scbench/error.hpp"
#include "scbench/pipeline.hpp"

namespace fs = std::filesystem;
using namespace scbench;

namespace {

struct Overrides {
    std::string bundle, queries, output_dir, replay_mode, replay_store, question, summary_trigger;
    std::vector<std::string> strategies;
    std::optional<std::size_t> k_markers;
    std::optional<double> temperature, top_p;
    std::optional<int> top_k, max_tokens;
    bool fail_fast = false;
    bool no_system_message = false;
};

void add_run_flags(CLI::App *cmd, Overrides &o) {
    cmd->add_option("--bundle", o.bundle, "Dataset bundle directory");
    cmd->add_option("--queries", o.queries, "JSON-lines sample list used instead of DEG-derived samples");
    cmd->add_option("--output-dir", o.output_dir, "Output directory");
    cmd->add_option("--strategy", o.strategies, "zero_shot and/or cot (repeatable)");
    cmd->add_option("--replay-mode", o.replay_mode, "live, record or replay");
    cmd->add_option("--replay-store", o.replay_store, "Replay store (JSON lines)");
    cmd->add_option("--question", o.question, "Question wording: standard or appendix");
    cmd->add_option("--summary-trigger", o.summary_trigger, "Summary trigger wording: standard or appendix");
    cmd->add_option("-k,--k-markers", o.k_markers, "Markers per cell type");
    cmd->add_option("--temperature", o.temperature);
    cmd->add_option("--top-p", o.top_p);
    cmd->add_option("--top-k", o.top_k);
    cmd->add_option("--max-tokens", o.max_tokens);
    cmd->add_flag("--no-system-message", o.no_system_message, "Omit the system turn");
}

RunConfig run_config(const fs::path &workdir, const std::string &config, const Overrides &o) {
    RunConfig cfg;
    if (!config.empty()) {
        const fs::path file = fs::path(config).is_absolute() ? fs::path(config) : workdir / config;
        cfg = load_run_config(file);
    }
    cfg.workdir = workdir;
    if (!o.bundle.empty()) cfg.bundle = o.bundle;
    if (!o.queries.empty()) cfg.queries = o.queries;
    if (!o.output_dir.empty()) cfg.output_dir = o.output_dir;
    if (!o.strategies.empty()) {
        cfg.strategies.clear();
        for (const auto &s : o.strategies) cfg.strategies.push_back(parse_strategy(s));
    }
    if (!o.replay_mode.empty()) cfg.replay_mode = parse_replay_mode(o.replay_mode);
    if (!o.replay_store.empty()) cfg.replay_store = o.replay_store;
    if (!o.question.empty()) cfg.prompts.question = parse_prompt_variant(o.question);
    if (!o.summary_trigger.empty()) cfg.prompts.summary_trigger = parse_prompt_variant(o.summary_trigger);
    if (o.no_system_message) cfg.prompts.system_message = false;
    if (o.k_markers) cfg.k_markers = *o.k_markers;
    if (o.temperature) cfg.sampling.temperature = *o.temperature;
    if (o.top_p) cfg.sampling.top_p = *o.top_p;
    if (o.top_k) cfg.sampling.top_k = *o.top_k;
    if (o.max_tokens) cfg.sampling.max_tokens = *o.max_tokens;
    if (o.fail_fast) cfg.fail_fast = true;
    cfg.validate();
    return cfg;
}

fs::path under(const fs::path &workdir, const fs::path &p) { return p.is_absolute() ? p : workdir / p; }

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Single-cell annotation benchmark"};
    app.require_subcommand(1);
    std::string workdir = ".";
    std::string config;
    app.add_option("--workdir", workdir, "Base directory for relative paths");
    app.add_option("--config", config, "TOML run configuration");

    Overrides overrides;

    auto *deg = app.add_subcommand("deg", "Rank differentially expressed genes per cell type");
    std::string deg_bundle, deg_out;
    std::size_t deg_k = 10;
    deg->add_option("--bundle", deg_bundle, "Dataset bundle directory")->required();
    deg->add_option("-k", deg_k, "Genes per cell type (0 = all)");
    deg->add_option("--out", deg_out, "Output TSV (default stdout)");

    auto *annotate = app.add_subcommand("annotate", "Query the configured providers for every sample");
    add_run_flags(annotate, overrides);
    annotate->add_flag("--fail-fast", overrides.fail_fast, "Stop at the first failed sample");

    auto *evaluate = app.add_subcommand("evaluate", "Score predictions and write summaries");
    add_run_flags(evaluate, overrides);

    auto *report = app.add_subcommand("report", "Render the leaderboard from scores");
    std::string report_dir;
    report->add_option("--dir", report_dir, "Directory searched for scores.jsonl (default: output_dir)");

    auto *align = app.add_subcommand("align", "Cross-modality translator");
    align->require_subcommand(1);
    auto *align_train = align->add_subcommand("train", "Train on paired cells");
    AlignTrainInputs train_in;
    std::optional<std::size_t> steps, batch_size, disc_steps, d_h, d_h_in, n_peaks;
    std::optional<double> step_size, gamma;
    std::optional<std::uint64_t> seed;
    align_train->add_option("--rna", train_in.rna_bundle, "Expression bundle")->required();
    align_train->add_option("--atac", train_in.atac_bundle, "Binary accessibility bundle")->required();
    align_train->add_option("--pairs", train_in.pairs, "pairs.tsv")->required();
    align_train->add_option("--checkpoint", train_in.checkpoint, "Output checkpoint")->required();
    align_train->add_option("--steps", steps);
    align_train->add_option("--batch-size", batch_size);
    align_train->add_option("--disc-steps", disc_steps);
    align_train->add_option("--step-size", step_size);
    align_train->add_option("--gamma", gamma);
    align_train->add_option("--seed", seed);
    align_train->add_option("--d-h", d_h);
    align_train->add_option("--d-h-in", d_h_in);
    align_train->add_option("--n-peaks", n_peaks, "Keep the top peaks by TF-IDF (0 = all)");

    auto *align_translate = align->add_subcommand("translate", "Write a pseudo-expression bundle");
    std::string tr_checkpoint, tr_atac, tr_out;
    align_translate->add_option("--checkpoint", tr_checkpoint)->required();
    align_translate->add_option("--atac", tr_atac, "Binary accessibility bundle")->required();
    align_translate->add_option("--out", tr_out, "Output bundle directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp &e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp &e) {
        return app.exit(e);
    } catch (const CLI::ParseError &e) {
        app.exit(e);
        return 2;
    }

    const fs::path wd = workdir;
    try {
        if (deg->parsed()) {
            if (deg_out.empty()) {
                cmd_deg(under(wd, deg_bundle), deg_k, std::cout, &std::cerr);
            } else {
                std::ofstream out(under(wd, deg_out), std::ios::binary);
                if (!out) throw Error("cannot write " + deg_out);
                cmd_deg(under(wd, deg_bundle), deg_k, out, &std::cerr);
            }
        } else if (annotate->parsed()) {
            const auto cfg = run_config(wd, config, overrides);
            const auto summary = cmd_annotate(cfg, default_provider_factory(cfg), std::cerr);
            std::cerr << "annotated " << summary.completed << ", skipped " << summary.skipped << ", failed "
                      << summary.failed << ", gateway calls " << summary.calls << '\n';
            if (summary.aborted) return 1;
        } else if (evaluate->parsed()) {
            const auto cfg = run_config(wd, config, overrides);
            const auto summary = cmd_evaluate(cfg, std::cerr);
            std::cerr << "scored " << summary.rows << " predictions\n";
        } else if (report->parsed()) {
            fs::path dir;
            if (!report_dir.empty()) {
                dir = under(wd, report_dir);
            } else {
                RunConfig cfg;
                if (!config.empty()) cfg = load_run_config(under(wd, config));
                cfg.workdir = wd;
                dir = cfg.resolve(cfg.output_dir);
            }
            cmd_report(dir, std::cout);
        } else if (align_train->parsed()) {
            AlignSettings settings;
            if (!config.empty()) settings = load_run_config(under(wd, config)).align;
            if (steps) settings.train.steps = *steps;
            if (batch_size) settings.train.batch_size = *batch_size;
            if (disc_steps) settings.train.disc_steps = *disc_steps;
            if (step_size) settings.train.step_size = *step_size;
            if (gamma) settings.train.gamma = *gamma;
            if (seed) settings.train.seed = *seed;
            if (d_h) settings.d_h = *d_h;
            if (d_h_in) settings.d_h_in = *d_h_in;
            if (n_peaks) settings.n_peaks = *n_peaks;
            settings.train.validate();
            AlignTrainInputs in{under(wd, train_in.rna_bundle), under(wd, train_in.atac_bundle),
                                under(wd, train_in.pairs), under(wd, train_in.checkpoint)};
            cmd_align_train(in, settings, std::cerr);
        } else if (align_translate->parsed()) {
            cmd_align_translate(under(wd, tr_checkpoint), under(wd, tr_atac), under(wd, tr_out));
        }
    } catch (const ConfigError &e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
