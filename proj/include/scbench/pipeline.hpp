#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "scbench/alignment.hpp"
#include "scbench/dataset.hpp"
#include "scbench/gateway.hpp"
#include "scbench/prompting.hpp"

namespace scbench {

enum class ReplayMode { live, record, replay };

std::string_view to_string(ReplayMode mode);
ReplayMode parse_replay_mode(std::string_view text);

struct AlignSettings {
    TrainConfig train;
    std::size_t d_h = 8;
    std::size_t d_h_in = 32;
    std::size_t n_peaks = 0; // 0 keeps every peak
};

/// Experiment grid. Relative paths are resolved against `workdir`.
struct RunConfig {
    std::filesystem::path workdir = ".";
    std::filesystem::path bundle;
    std::filesystem::path queries;   // optional JSON-lines sample list replacing DEG-derived samples
    std::filesystem::path output_dir = "out";
    std::vector<ProviderConfig> providers;
    std::vector<Strategy> strategies;
    std::size_t k_markers = 10;
    SamplingParams sampling;
    ReplayMode replay_mode = ReplayMode::live;
    std::filesystem::path replay_store;
    PromptOptions prompts;
    bool fail_fast = false;
    AlignSettings align;

    std::filesystem::path resolve(const std::filesystem::path &p) const;

    /// Throws ConfigError on the first problem found.
    void validate() const;

    /// Everything that influences results. Run-location settings (workdir,
    /// output_dir, fail_fast) are left out so relocated runs share a digest.
    nlohmann::json provenance() const;
    std::string digest() const;
};

/// Parses TOML text; throws ConfigError with the offending key or position.
RunConfig parse_run_config(std::string_view toml_text, const std::string &source = "config");
RunConfig load_run_config(const std::filesystem::path &file);

/// Samples for the benchmark: one per cell type within each (dataset, tissue)
/// partition of the bundle, or the lines of `cfg.queries` when set. Sorted by
/// sample_id. Cell types skipped by the DEG step are reported on `log`.
std::vector<CellQuery> build_queries(const RunConfig &cfg, std::ostream *log = nullptr);

/// `{dataset}/{tissue}/{cell type}`
std::string sample_id_for(const CellMeta &cell);

/// Queries file line: {sample_id, markers, context, cell_type, tissue,
/// dataset_id, references?}. Missing references are looked up in `labels`.
std::vector<CellQuery> read_queries(const std::filesystem::path &file, const std::map<std::string, SynonymSet> &labels);

using ProviderFactory = std::function<std::shared_ptr<Provider>(const ProviderConfig &)>;

/// Provider per the replay mode: LiveProvider, RecordingProvider around one,
/// or ReplayProvider. The store is shared between providers.
ProviderFactory default_provider_factory(const RunConfig &cfg);

struct AnnotateSummary {
    std::size_t completed = 0; // samples answered in this run
    std::size_t skipped = 0;   // already present in the output
    std::size_t failed = 0;
    std::size_t calls = 0;     // gateway calls, all providers
    bool aborted = false;      // fail-fast stop
};

/// Output for (provider, strategy): {output_dir}/{provider name}/{strategy}.
std::filesystem::path run_dir(const RunConfig &cfg, const ProviderConfig &provider, Strategy strategy);

/// Runs every (sample x provider x strategy) and appends transcripts.jsonl and
/// predictions.jsonl rows. Samples with an ok prediction row are skipped.
AnnotateSummary cmd_annotate(const RunConfig &cfg, const ProviderFactory &factory, std::ostream &log);

struct EvaluateSummary {
    std::size_t rows = 0;
    std::vector<std::filesystem::path> files;
};

/// Scores every predictions.jsonl of the grid into scores.jsonl and
/// summary.csv next to it, plus a combined {output_dir}/summary.csv.
EvaluateSummary cmd_evaluate(const RunConfig &cfg, std::ostream &log);

/// Leaderboard over every scores.jsonl below `dir`, written to `out` and to
/// {dir}/leaderboard.txt.
void cmd_report(const std::filesystem::path &dir, std::ostream &out);

/// DEG rankings of a bundle (raw counts are normalized first), TSV to `out`.
/// Skipped cell types are reported on `log` when given.
void cmd_deg(const std::filesystem::path &bundle, std::size_t k, std::ostream &out, std::ostream *log = nullptr);

struct AlignTrainInputs {
    std::filesystem::path rna_bundle;
    std::filesystem::path atac_bundle;
    std::filesystem::path pairs;      // rna_cell_id, atac_cell_id, class
    std::filesystem::path checkpoint; // output
};

/// Trains the translator on paired cells and writes a checkpoint. Returns the
/// loss history.
std::vector<StepLoss> cmd_align_train(const AlignTrainInputs &inputs, const AlignSettings &settings, std::ostream &log);

/// Translates every cell of an accessibility bundle into a log-normalized
/// pseudo-expression bundle. Negative outputs are clamped to zero.
void cmd_align_translate(const std::filesystem::path &checkpoint, const std::filesystem::path &atac_bundle,
                         const std::filesystem::path &out_bundle);

} // namespace scbench
