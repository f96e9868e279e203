#include "scbench/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include <toml.hpp>

#include "scbench/deg.hpp"
#include "scbench/error.hpp"
#include "scbench/labels.hpp"
#include "scbench/metrics.hpp"
#include "scbench/report.hpp"

namespace scbench {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Typed access to one TOML table that rejects unknown keys on finish().
class TableReader {
  public:
    TableReader(const toml::table &table, std::string prefix) : table_(table), prefix_(std::move(prefix)) {}

    template <class T> std::optional<T> get(std::string_view key) {
        const toml::node *node = table_.get(key);
        if (!node) return std::nullopt;
        seen_.insert(std::string(key));
        if constexpr (std::is_same_v<T, std::string>) {
            if (auto v = node->value_exact<std::string>()) return *v;
            fail(key, "a string");
        } else if constexpr (std::is_same_v<T, bool>) {
            if (auto v = node->value_exact<bool>()) return *v;
            fail(key, "a boolean");
        } else if constexpr (std::is_same_v<T, double>) {
            if (node->is_integer()) return static_cast<double>(*node->value_exact<std::int64_t>());
            if (auto v = node->value_exact<double>()) return *v;
            fail(key, "a number");
        } else {
            if (auto v = node->value_exact<std::int64_t>()) {
                if (*v < 0) fail(key, "a non-negative integer");
                return static_cast<T>(*v);
            }
            fail(key, "an integer");
        }
        return std::nullopt;
    }

    template <class T> void read(std::string_view key, T &target) {
        if (auto v = get<T>(key)) target = *v;
    }

    const toml::table *table(std::string_view key) {
        const toml::node *node = table_.get(key);
        if (!node) return nullptr;
        seen_.insert(std::string(key));
        if (!node->is_table()) fail(key, "a table");
        return node->as_table();
    }

    const toml::array *array(std::string_view key) {
        const toml::node *node = table_.get(key);
        if (!node) return nullptr;
        seen_.insert(std::string(key));
        if (!node->is_array()) fail(key, "an array");
        return node->as_array();
    }

    std::string path(std::string_view key) const { return prefix_.empty() ? std::string(key) : prefix_ + "." + std::string(key); }

    void finish() const {
        for (const auto &[key, node] : table_) {
            if (!seen_.contains(std::string(key.str()))) throw ConfigError("unknown config key '" + path(key.str()) + "'");
        }
    }

  private:
    [[noreturn]] void fail(std::string_view key, const char *what) const {
        throw ConfigError("config key '" + path(key) + "' must be " + what);
    }

    const toml::table &table_;
    std::string prefix_;
    std::set<std::string> seen_;
};

ProviderConfig parse_provider(const toml::table &table, const std::string &prefix) {
    TableReader r(table, prefix);
    ProviderConfig p;
    r.read("name", p.name);
    r.read("endpoint", p.endpoint);
    r.read("model", p.model);
    r.read("auth_env", p.auth_env);
    r.read("in_flight_limit", p.in_flight_limit);
    if (auto ms = r.get<std::int64_t>("timeout_ms")) p.timeout = std::chrono::milliseconds(*ms);
    if (const auto *retry = r.table("retry")) {
        TableReader rr(*retry, prefix + ".retry");
        rr.read("max_attempts", p.retry.max_attempts);
        if (auto ms = rr.get<std::int64_t>("base_backoff_ms")) p.retry.base_backoff = std::chrono::milliseconds(*ms);
        rr.read("jitter", p.retry.jitter);
        rr.read("jitter_seed", p.retry.jitter_seed);
        rr.finish();
    }
    r.finish();
    return p;
}

std::vector<std::string> read_lines(const fs::path &file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw Error("cannot read " + file.string());
    std::vector<std::string> lines;
    for (std::string line; std::getline(in, line);) lines.push_back(std::move(line));
    return lines;
}

std::vector<json> read_jsonl(const fs::path &file) {
    std::vector<json> rows;
    const auto lines = read_lines(file);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        try {
            rows.push_back(json::parse(lines[i]));
        } catch (const json::exception &e) {
            throw FormatError(file.string(), i + 1, e.what());
        }
    }
    return rows;
}

void write_file(const fs::path &file, const std::string &content) {
    if (file.has_parent_path()) fs::create_directories(file.parent_path());
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + file.string());
    out << content;
    if (!out) throw Error("failed writing " + file.string());
}

DatasetBundle load_expression_bundle(const fs::path &dir) {
    auto bundle = load_bundle(dir);
    if (bundle.matrix.layout() == Layout::binary)
        throw InvalidArgument(dir.string() + " holds a binary matrix, expected expression values");
    if (bundle.matrix.layout() == Layout::raw_counts) bundle.matrix = normalize_counts(bundle.matrix);
    return bundle;
}

json query_references(const CellQuery &q) { return q.references.synonyms; }

struct SampleOutput {
    std::vector<json> transcript;
    json prediction;
    bool ok = false;
};

class StrategyRun {
  public:
    StrategyRun(const RunConfig &cfg, Gateway &gateway, Strategy strategy, const std::string &digest, std::ostream &log)
        : cfg_(cfg), gateway_(gateway), strategy_(strategy), digest_(digest), log_(log) {}

    void run(const std::vector<const CellQuery *> &pending, const fs::path &dir, AnnotateSummary &summary) {
        fs::create_directories(dir);
        transcripts_.open(dir / "transcripts.jsonl", std::ios::binary | std::ios::app);
        predictions_.open(dir / "predictions.jsonl", std::ios::binary | std::ios::app);
        if (!transcripts_ || !predictions_) throw Error("cannot open output files in " + dir.string());

        pending_ = &pending;
        slots_.assign(pending.size(), std::nullopt);
        next_write_ = 0;
        next_task_ = 0;
        const std::size_t n_threads =
            std::min<std::size_t>(static_cast<std::size_t>(gateway_.config().in_flight_limit), pending.size());
        std::vector<std::thread> workers;
        for (std::size_t t = 0; t < n_threads; ++t) workers.emplace_back([this, &summary] { work(summary); });
        for (auto &w : workers) w.join();

        // After a fail-fast stop some slots stay empty; write what finished.
        for (auto &slot : slots_) {
            if (slot) write(*slot);
        }
        transcripts_.close();
        predictions_.close();
        if (!transcripts_ || !predictions_) throw Error("failed writing output files in " + dir.string());
    }

    bool stopped() const { return stop_; }

  private:
    void work(AnnotateSummary &summary) {
        while (!stop_) {
            const std::size_t i = next_task_++;
            if (i >= pending_->size()) return;
            SampleOutput out = process(*(*pending_)[i]);
            std::lock_guard lock(mutex_);
            if (out.ok) {
                ++summary.completed;
            } else {
                ++summary.failed;
                log_ << "warning: " << out.prediction.at("error").get<std::string>() << '\n';
                if (cfg_.fail_fast) {
                    stop_ = true;
                    summary.aborted = true;
                }
            }
            slots_[i] = std::move(out);
            while (next_write_ < slots_.size() && slots_[next_write_]) {
                write(*slots_[next_write_]);
                slots_[next_write_].reset();
                ++next_write_;
            }
        }
    }

    SampleOutput process(const CellQuery &q) {
        SampleOutput out;
        std::vector<Exchange> rounds;
        std::string response;
        std::optional<std::string> error;
        try {
            auto transcript = run_strategy(strategy_, q, gateway_, cfg_.sampling, cfg_.prompts);
            rounds = std::move(transcript.rounds);
            response = std::move(transcript.final_response);
        } catch (const PromptError &e) {
            rounds = e.partial().rounds;
            error = e.what();
        } catch (const Error &e) {
            error = "sample " + q.sample_id + ": " + e.what();
        }
        for (const auto &exchange : rounds) {
            json row = to_json(exchange);
            row["strategy"] = to_string(strategy_);
            row["config_digest"] = digest_;
            out.transcript.push_back(std::move(row));
        }
        const auto &provider = gateway_.config();
        out.ok = !error.has_value();
        out.prediction = json{
            {"sample_id", q.sample_id},
            {"model", provider.name},
            {"provider_model", provider.model},
            {"strategy", to_string(strategy_)},
            {"cell_type", q.cell_type},
            {"tissue", q.tissue},
            {"dataset_id", q.dataset_id},
            {"references", query_references(q)},
            {"response", response},
            {"prediction", out.ok ? cleanse(response) : std::string{}},
            {"status", out.ok ? "ok" : "error"},
            {"error", error ? json(*error) : json(nullptr)},
            {"config_digest", digest_},
        };
        return out;
    }

    void write(const SampleOutput &out) {
        for (const auto &row : out.transcript) transcripts_ << row.dump() << '\n';
        predictions_ << out.prediction.dump() << '\n';
        transcripts_.flush();
        predictions_.flush();
    }

    const RunConfig &cfg_;
    Gateway &gateway_;
    Strategy strategy_;
    const std::string &digest_;
    std::ostream &log_;

    std::ofstream transcripts_;
    std::ofstream predictions_;
    const std::vector<const CellQuery *> *pending_ = nullptr;
    std::mutex mutex_;
    std::vector<std::optional<SampleOutput>> slots_;
    std::size_t next_write_ = 0;
    std::atomic<std::size_t> next_task_{0};
    std::atomic<bool> stop_{false};
};

std::set<std::string> completed_samples(const fs::path &file) {
    std::set<std::string> done;
    if (!fs::exists(file)) return done;
    for (const auto &row : read_jsonl(file)) {
        if (row.value("status", std::string{}) == "ok") done.insert(row.at("sample_id").get<std::string>());
    }
    return done;
}

void write_scores(const std::vector<ScoreRow> &rows, const fs::path &file, const std::string &digest) {
    std::string text;
    for (const auto &row : rows) {
        json j = to_json(row);
        j["config_digest"] = digest;
        text += j.dump() + "\n";
    }
    write_file(file, text);
}

void write_summary(const std::vector<ScoreRow> &rows, const std::vector<std::vector<std::string>> &groupings,
                   const fs::path &file, const std::string &digest) {
    std::vector<EvalReport> reports;
    for (const auto &g : groupings) reports.push_back(aggregate(rows, g));
    std::ostringstream csv;
    write_summary_csv(reports, csv, digest);
    write_file(file, csv.str());
}

} // namespace

std::string_view to_string(ReplayMode mode) {
    switch (mode) {
    case ReplayMode::live: return "live";
    case ReplayMode::record: return "record";
    case ReplayMode::replay: return "replay";
    }
    return {};
}

ReplayMode parse_replay_mode(std::string_view text) {
    if (text == "live") return ReplayMode::live;
    if (text == "record") return ReplayMode::record;
    if (text == "replay") return ReplayMode::replay;
    throw ConfigError("unknown replay mode '" + std::string(text) + "' (expected live, record or replay)");
}

fs::path RunConfig::resolve(const fs::path &p) const {
    if (p.empty() || p.is_absolute()) return p;
    return workdir / p;
}

void RunConfig::validate() const {
    if (providers.empty()) throw ConfigError("at least one provider is required");
    if (strategies.empty()) throw ConfigError("at least one strategy is required");
    std::set<std::string> names;
    for (const auto &p : providers) {
        p.validate();
        if (!names.insert(p.name).second) throw ConfigError("duplicate provider name '" + p.name + "'");
        if (p.name.find('/') != std::string::npos || p.name == "." || p.name == "..")
            throw ConfigError("provider name '" + p.name + "' cannot be used as a directory name");
        if (replay_mode != ReplayMode::replay && p.endpoint.empty())
            throw ConfigError("provider '" + p.name + "' needs an endpoint outside replay mode");
    }
    std::set<Strategy> seen;
    for (auto s : strategies) {
        if (!seen.insert(s).second) throw ConfigError("strategy " + std::string(to_string(s)) + " listed twice");
    }
    if (k_markers == 0) throw ConfigError("k_markers must be positive");
    sampling.validate();
    if (bundle.empty() && queries.empty()) throw ConfigError("either bundle or queries must be set");
    if (replay_mode != ReplayMode::live && replay_store.empty())
        throw ConfigError("replay.store is required in " + std::string(to_string(replay_mode)) + " mode");
    align.train.validate();
}

json RunConfig::provenance() const {
    json providers_json = json::array();
    for (const auto &p : providers) providers_json.push_back({{"name", p.name}, {"endpoint", p.endpoint}, {"model", p.model}});
    json strategies_json = json::array();
    for (auto s : strategies) strategies_json.push_back(to_string(s));
    const auto variant = [](PromptVariant v) { return v == PromptVariant::appendix ? "appendix" : "standard"; };
    return {
        {"bundle", bundle.generic_string()},
        {"queries", queries.generic_string()},
        {"providers", providers_json},
        {"strategies", strategies_json},
        {"k_markers", k_markers},
        {"sampling",
         {{"temperature", sampling.temperature},
          {"top_p", sampling.top_p},
          {"top_k", sampling.top_k},
          {"max_tokens", sampling.max_tokens}}},
        {"prompts",
         {{"question", variant(prompts.question)},
          {"summary_trigger", variant(prompts.summary_trigger)},
          {"system_message", prompts.system_message}}},
    };
}

std::string RunConfig::digest() const { return sha256_hex(provenance().dump()).substr(0, 16); }

RunConfig parse_run_config(std::string_view toml_text, const std::string &source) {
    toml::table root;
    try {
        root = toml::parse(toml_text, source);
    } catch (const toml::parse_error &e) {
        throw ConfigError(source + ":" + std::to_string(e.source().begin.line) + ": " + std::string(e.description()));
    }
    RunConfig cfg;
    TableReader r(root, "");
    if (auto v = r.get<std::string>("bundle")) cfg.bundle = *v;
    if (auto v = r.get<std::string>("queries")) cfg.queries = *v;
    if (auto v = r.get<std::string>("output_dir")) cfg.output_dir = *v;
    r.read("k_markers", cfg.k_markers);
    r.read("fail_fast", cfg.fail_fast);
    if (const auto *list = r.array("strategies")) {
        for (const auto &node : *list) {
            auto s = node.value_exact<std::string>();
            if (!s) throw ConfigError("config key 'strategies' must list strings");
            cfg.strategies.push_back(parse_strategy(*s));
        }
    }
    if (const auto *list = r.array("providers")) {
        for (std::size_t i = 0; i < list->size(); ++i) {
            const auto *t = list->get(i)->as_table();
            if (!t) throw ConfigError("config key 'providers' must be an array of tables");
            cfg.providers.push_back(parse_provider(*t, "providers[" + std::to_string(i) + "]"));
        }
    }
    if (const auto *t = r.table("sampling")) {
        TableReader s(*t, "sampling");
        s.read("temperature", cfg.sampling.temperature);
        s.read("top_p", cfg.sampling.top_p);
        s.read("top_k", cfg.sampling.top_k);
        s.read("max_tokens", cfg.sampling.max_tokens);
        s.finish();
    }
    if (const auto *t = r.table("replay")) {
        TableReader s(*t, "replay");
        if (auto v = s.get<std::string>("mode")) cfg.replay_mode = parse_replay_mode(*v);
        if (auto v = s.get<std::string>("store")) cfg.replay_store = *v;
        s.finish();
    }
    if (const auto *t = r.table("prompts")) {
        TableReader s(*t, "prompts");
        if (auto v = s.get<std::string>("question")) cfg.prompts.question = parse_prompt_variant(*v);
        if (auto v = s.get<std::string>("summary_trigger")) cfg.prompts.summary_trigger = parse_prompt_variant(*v);
        s.read("system_message", cfg.prompts.system_message);
        s.finish();
    }
    if (const auto *t = r.table("align")) {
        TableReader s(*t, "align");
        auto &a = cfg.align;
        s.read("step_size", a.train.step_size);
        s.read("steps", a.train.steps);
        s.read("batch_size", a.train.batch_size);
        s.read("gamma", a.train.gamma);
        s.read("seed", a.train.seed);
        s.read("disc_steps", a.train.disc_steps);
        s.read("d_h", a.d_h);
        s.read("d_h_in", a.d_h_in);
        s.read("n_peaks", a.n_peaks);
        s.finish();
    }
    r.finish();
    return cfg;
}

RunConfig load_run_config(const fs::path &file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw ConfigError("cannot read config " + file.string());
    std::stringstream text;
    text << in.rdbuf();
    return parse_run_config(text.str(), file.string());
}

std::string sample_id_for(const CellMeta &cell) { return cell.dataset_id + "/" + cell.tissue + "/" + cell.cell_type; }

std::vector<CellQuery> read_queries(const fs::path &file, const std::map<std::string, SynonymSet> &labels) {
    std::vector<CellQuery> out;
    std::set<std::string> ids;
    const auto rows = read_jsonl(file);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto &row = rows[i];
        try {
            CellQuery q;
            q.sample_id = row.at("sample_id").get<std::string>();
            q.markers = row.at("markers").get<std::vector<std::string>>();
            q.context = row.at("context").get<std::string>();
            q.cell_type = row.at("cell_type").get<std::string>();
            q.tissue = row.value("tissue", q.context);
            q.dataset_id = row.value("dataset_id", std::string{});
            if (row.contains("references")) {
                const auto refs = row.at("references").get<std::vector<std::string>>();
                if (refs.empty()) throw InvalidArgument("empty references");
                q.references = dedup_synonyms({refs.front(), refs});
            } else {
                q.references = reference_candidates(q.cell_type, labels);
            }
            q.validate();
            if (!ids.insert(q.sample_id).second) throw InvalidArgument("duplicate sample_id " + q.sample_id);
            out.push_back(std::move(q));
        } catch (const json::exception &e) {
            throw FormatError(file.string(), i + 1, e.what());
        } catch (const InvalidArgument &e) {
            throw FormatError(file.string(), i + 1, e.what());
        }
    }
    std::sort(out.begin(), out.end(), [](const CellQuery &a, const CellQuery &b) { return a.sample_id < b.sample_id; });
    return out;
}

std::vector<CellQuery> build_queries(const RunConfig &cfg, std::ostream *log) {
    if (!cfg.queries.empty()) {
        std::map<std::string, SynonymSet> labels;
        if (!cfg.bundle.empty()) labels = load_bundle(cfg.resolve(cfg.bundle)).labels;
        return read_queries(cfg.resolve(cfg.queries), labels);
    }
    const auto bundle = load_expression_bundle(cfg.resolve(cfg.bundle));
    std::map<std::pair<std::string, std::string>, std::vector<std::size_t>> partitions;
    for (std::size_t i = 0; i < bundle.cells.size(); ++i)
        partitions[{bundle.cells[i].dataset_id, bundle.cells[i].tissue}].push_back(i);

    std::vector<CellQuery> out;
    for (const auto &[key, members] : partitions) {
        const auto part = select_cells(bundle, members);
        const auto degs = rank_degs(part, cfg.k_markers);
        if (log) {
            for (const auto &w : degs.skipped)
                *log << "warning: " << key.first << "/" << key.second << ": " << w.cell_type << ": " << w.message << '\n';
        }
        for (const auto &[cell_type, markers] : degs.markers) {
            CellQuery q;
            q.markers = markers;
            q.context = key.second;
            q.cell_type = cell_type;
            q.tissue = key.second;
            q.dataset_id = key.first;
            q.sample_id = sample_id_for({"", cell_type, key.second, key.first, ""});
            q.references = reference_candidates(cell_type, bundle.labels);
            out.push_back(std::move(q));
        }
    }
    std::sort(out.begin(), out.end(), [](const CellQuery &a, const CellQuery &b) { return a.sample_id < b.sample_id; });
    return out;
}

ProviderFactory default_provider_factory(const RunConfig &cfg) {
    std::shared_ptr<ReplayStore> store;
    if (cfg.replay_mode != ReplayMode::live) {
        const auto path = cfg.resolve(cfg.replay_store);
        if (cfg.replay_mode == ReplayMode::replay && !fs::exists(path))
            throw ConfigError("replay store " + path.string() + " does not exist");
        store = std::make_shared<ReplayStore>(path);
    }
    const ReplayMode mode = cfg.replay_mode;
    return [store, mode](const ProviderConfig &p) -> std::shared_ptr<Provider> {
        switch (mode) {
        case ReplayMode::live: return std::make_shared<LiveProvider>(p);
        case ReplayMode::record: return std::make_shared<RecordingProvider>(std::make_shared<LiveProvider>(p), store);
        case ReplayMode::replay: return std::make_shared<ReplayProvider>(store);
        }
        return nullptr;
    };
}

fs::path run_dir(const RunConfig &cfg, const ProviderConfig &provider, Strategy strategy) {
    return cfg.resolve(cfg.output_dir) / provider.name / std::string(to_string(strategy));
}

AnnotateSummary cmd_annotate(const RunConfig &cfg, const ProviderFactory &factory, std::ostream &log) {
    cfg.validate();
    const auto queries = build_queries(cfg, &log);
    if (queries.empty()) throw InvalidArgument("no samples to annotate");
    const std::string digest = cfg.digest();

    AnnotateSummary summary;
    for (const auto &provider : cfg.providers) {
        Gateway gateway(provider, factory(provider));
        for (auto strategy : cfg.strategies) {
            const auto dir = run_dir(cfg, provider, strategy);
            const auto done = completed_samples(dir / "predictions.jsonl");
            std::vector<const CellQuery *> pending;
            for (const auto &q : queries) {
                if (done.contains(q.sample_id))
                    ++summary.skipped;
                else
                    pending.push_back(&q);
            }
            if (!pending.empty()) {
                StrategyRun run(cfg, gateway, strategy, digest, log);
                run.run(pending, dir, summary);
            }
            if (summary.aborted) break;
        }
        summary.calls += gateway.calls();
        if (summary.aborted) break;
    }
    return summary;
}

EvaluateSummary cmd_evaluate(const RunConfig &cfg, std::ostream &log) {
    cfg.validate();
    std::map<std::string, CellQuery> by_id;
    for (auto &q : build_queries(cfg)) by_id.emplace(q.sample_id, std::move(q));
    const std::string digest = cfg.digest();

    EvaluateSummary summary;
    std::vector<ScoreRow> all;
    for (const auto &provider : cfg.providers) {
        for (auto strategy : cfg.strategies) {
            const auto dir = run_dir(cfg, provider, strategy);
            const auto file = dir / "predictions.jsonl";
            if (!fs::exists(file)) {
                log << "warning: no predictions in " << dir.string() << '\n';
                continue;
            }
            // A sample may have been retried after a failure; its last row wins.
            std::map<std::string, json> latest;
            for (auto &row : read_jsonl(file)) {
                const auto id = row.at("sample_id").get<std::string>();
                latest[id] = std::move(row);
            }

            std::vector<ScoreRow> rows;
            for (const auto &[id, row] : latest) {
                auto it = by_id.find(id);
                if (it == by_id.end()) throw InvalidArgument(file.string() + ": prediction for unknown sample " + id);
                const auto &q = it->second;
                ScoreRow score;
                score.sample_id = id;
                score.model = provider.name;
                score.strategy = to_string(strategy);
                score.tissue = q.tissue;
                score.dataset_id = q.dataset_id;
                const bool ok = row.value("status", std::string{}) == "ok";
                score_prediction(ok ? row.at("prediction").get<std::string>() : std::string{}, q.references, score);
                rows.push_back(std::move(score));
            }
            if (rows.empty()) continue;
            write_scores(rows, dir / "scores.jsonl", digest);
            write_summary(rows, {{}, {"tissue"}, {"dataset_id"}}, dir / "summary.csv", digest);
            summary.files.push_back(dir / "scores.jsonl");
            summary.files.push_back(dir / "summary.csv");
            summary.rows += rows.size();
            all.insert(all.end(), rows.begin(), rows.end());
        }
    }
    if (all.empty()) throw InvalidArgument("no prediction rows to evaluate");
    const auto top = cfg.resolve(cfg.output_dir) / "summary.csv";
    write_summary(all, {{}, {"model"}, {"strategy"}, {"model", "strategy"}, {"tissue"}, {"dataset_id"}}, top, digest);
    summary.files.push_back(top);
    return summary;
}

void cmd_report(const fs::path &dir, std::ostream &out) {
    if (!fs::is_directory(dir)) throw InvalidArgument(dir.string() + " is not a directory");
    std::vector<fs::path> files;
    for (const auto &entry : fs::recursive_directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().filename() == "scores.jsonl") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    std::vector<ScoreRow> rows;
    for (const auto &file : files) {
        const auto json_rows = read_jsonl(file);
        for (std::size_t i = 0; i < json_rows.size(); ++i) {
            try {
                rows.push_back(score_row_from_json(json_rows[i]));
            } catch (const json::exception &e) {
                throw FormatError(file.string(), i + 1, e.what());
            }
        }
    }
    if (rows.empty()) throw InvalidArgument("no scores.jsonl rows below " + dir.string());
    std::ostringstream text;
    render_leaderboard(build_leaderboard(rows), text);
    write_file(dir / "leaderboard.txt", text.str());
    out << text.str();
}

void cmd_deg(const fs::path &bundle_dir, std::size_t k, std::ostream &out, std::ostream *log) {
    const auto bundle = load_expression_bundle(bundle_dir);
    const auto result = rank_degs(bundle, k);
    if (log)
        for (const auto &w : result.skipped) *log << "warning: skipped " << w.cell_type << ": " << w.message << '\n';
    write_rankings_tsv(result, k, out);
}

std::vector<StepLoss> cmd_align_train(const AlignTrainInputs &inputs, const AlignSettings &settings, std::ostream &log) {
    const auto rna = load_expression_bundle(inputs.rna_bundle);
    const auto atac = load_bundle(inputs.atac_bundle);
    if (atac.matrix.layout() != Layout::binary)
        throw InvalidArgument(inputs.atac_bundle.string() + " must hold a binary accessibility matrix");

    const auto index_of = [](const DatasetBundle &b) {
        std::map<std::string, std::size_t> idx;
        for (std::size_t i = 0; i < b.cells.size(); ++i) idx.emplace(b.cells[i].cell_id, i);
        return idx;
    };
    const auto rna_idx = index_of(rna);
    const auto atac_idx = index_of(atac);

    const auto lines = read_lines(inputs.pairs);
    const std::string pairs_name = inputs.pairs.string();
    if (lines.empty() || lines[0] != "rna_cell_id\tatac_cell_id\tclass")
        throw FormatError(pairs_name, 1, "expected header 'rna_cell_id<TAB>atac_cell_id<TAB>class'");
    struct Pair {
        std::size_t rna, atac;
        std::string cls;
    };
    std::vector<Pair> pairs;
    std::set<std::string> classes;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        std::vector<std::string> cols;
        std::stringstream ss(lines[i]);
        for (std::string col; std::getline(ss, col, '\t');) cols.push_back(col);
        if (cols.size() != 3) throw FormatError(pairs_name, i + 1, "expected 3 tab-separated columns");
        auto r = rna_idx.find(cols[0]);
        auto a = atac_idx.find(cols[1]);
        if (r == rna_idx.end()) throw FormatError(pairs_name, i + 1, "unknown expression cell " + cols[0]);
        if (a == atac_idx.end()) throw FormatError(pairs_name, i + 1, "unknown accessibility cell " + cols[1]);
        pairs.push_back({r->second, a->second, cols[2]});
        classes.insert(cols[2]);
    }
    if (pairs.empty()) throw FormatError(pairs_name, 1, "no pairs");
    const std::vector<std::string> class_names(classes.begin(), classes.end());

    std::vector<std::size_t> peaks;
    if (settings.n_peaks > 0) {
        peaks = tfidf_select(atac.matrix, std::min(settings.n_peaks, atac.genes.size()));
    } else {
        for (std::size_t j = 0; j < atac.genes.size(); ++j) peaks.push_back(j);
    }
    const MatrixXd x_all = dense_columns(atac.matrix);
    const MatrixXd y_all = dense_columns(rna.matrix);

    std::vector<PairedCell> data;
    for (const auto &p : pairs) {
        PairedCell c;
        c.atac.resize(static_cast<Eigen::Index>(peaks.size()));
        for (std::size_t j = 0; j < peaks.size(); ++j)
            c.atac(static_cast<Eigen::Index>(j)) = x_all(static_cast<Eigen::Index>(peaks[j]), static_cast<Eigen::Index>(p.atac));
        c.rna = y_all.col(static_cast<Eigen::Index>(p.rna));
        c.label = static_cast<std::size_t>(
            std::lower_bound(class_names.begin(), class_names.end(), p.cls) - class_names.begin());
        data.push_back(std::move(c));
    }

    AlignmentDims dims{peaks.size(), rna.genes.size(), settings.d_h, settings.d_h_in, class_names.size()};
    const std::size_t every = std::max<std::size_t>(1, settings.train.steps / 10);
    auto result = train(init_model(dims, settings.train.gamma, settings.train.seed), data, settings.train,
                        [&](std::size_t step, const StepLoss &l) {
                            if (step % every == 0)
                                log << "step " << step << " rec " << l.reconstruction << " gen " << l.generator
                                    << " dis " << l.discriminator << '\n';
                        });

    AlignmentCheckpoint ck{std::move(result.model), {}, rna.genes.names()};
    for (auto j : peaks) ck.atac_features.push_back(atac.genes[j]);
    save_checkpoint(ck, inputs.checkpoint);
    return result.history;
}

void cmd_align_translate(const fs::path &checkpoint, const fs::path &atac_bundle, const fs::path &out_bundle) {
    const auto ck = load_checkpoint(checkpoint);
    const auto atac = load_bundle(atac_bundle);
    if (atac.matrix.layout() != Layout::binary)
        throw InvalidArgument(atac_bundle.string() + " must hold a binary accessibility matrix");

    const MatrixXd x_all = dense_columns(atac.matrix);
    MatrixXd x(static_cast<Eigen::Index>(ck.atac_features.size()), x_all.cols());
    for (std::size_t j = 0; j < ck.atac_features.size(); ++j) {
        const std::size_t src = atac.genes.find(ck.atac_features[j]);
        if (src == atac.genes.size())
            throw InvalidArgument("peak " + ck.atac_features[j] + " of the checkpoint is missing from " +
                                  atac_bundle.string());
        x.row(static_cast<Eigen::Index>(j)) = x_all.row(static_cast<Eigen::Index>(src));
    }
    const MatrixXd pseudo = translate(ck.model, x);

    std::vector<Entry> entries;
    for (Eigen::Index c = 0; c < pseudo.cols(); ++c) {
        for (Eigen::Index g = 0; g < pseudo.rows(); ++g) {
            const double v = pseudo(g, c);
            if (!std::isfinite(v)) throw NumericalError("translation produced a non-finite value");
            if (v > 0.0) entries.push_back({static_cast<std::uint32_t>(c), static_cast<std::uint32_t>(g), v});
        }
    }
    DatasetBundle out;
    out.genes = GeneList(ck.rna_features);
    out.matrix = ExpressionMatrix(atac.cells.size(), ck.rna_features.size(), Layout::lognorm, std::move(entries));
    out.cells = atac.cells;
    out.labels = atac.labels;
    validate_bundle(out);
    save_bundle(out, out_bundle);
}

} // namespace scbench
