#pragma once

// A small on-disk benchmark: a bundle with ten cell types in one tissue and a
// TOML config that points at it.

#include <filesystem>
#include <string>

#include "scbench/dataset.hpp"
#include "synthetic.hpp"
#include "test_util.hpp"

namespace testutil {

inline std::filesystem::path write_e2e_bundle(const std::filesystem::path &root) {
    auto data = synth::planted_bundle(42, 10, 4, 30, 2, 4.0);
    data.bundle.labels["TypeA"].synonyms.push_back("B cell");
    const auto dir = root / "bundle";
    scbench::save_bundle(data.bundle, dir);
    return dir;
}

inline std::string e2e_config(const std::string &extra = {}) {
    return R"(bundle = "bundle"
output_dir = "out"
k_markers = 5
strategies = ["zero_shot", "cot"]

[[providers]]
name = "mock"
endpoint = "http://127.0.0.1:9"
model = "mock-1"
in_flight_limit = 3

[sampling]
temperature = 0.0
)" + extra;
}

// Paired expression / accessibility bundles plus pairs.tsv under `root`.
// Expression values are shifted to stay non-negative.
inline void write_paired_bundles(const std::filesystem::path &root, std::uint64_t seed, std::size_t n_cells) {
    const auto data = synth::linear_paired(seed, n_cells, 2, 16, 6, 3, 0.0);
    scbench::DatasetBundle rna, atac;
    std::vector<std::string> genes, peaks;
    for (int g = 0; g < 6; ++g) genes.push_back("GENE" + std::to_string(g));
    for (int p = 0; p < 16; ++p) peaks.push_back("chr1:" + std::to_string(1000 * p) + "-" + std::to_string(1000 * p + 500));
    rna.genes = scbench::GeneList(genes);
    atac.genes = scbench::GeneList(peaks);
    std::vector<scbench::Entry> re, ae;
    std::string pairs = "rna_cell_id\tatac_cell_id\tclass\n";
    for (std::uint32_t c = 0; c < data.train.size(); ++c) {
        const auto &cell = data.train[c];
        const std::string type = cell.label == 0 ? "Alpha cell" : "Beta cell";
        rna.cells.push_back({"r" + std::to_string(c), type, "Islet", "paired", "human"});
        atac.cells.push_back({"a" + std::to_string(c), type, "Islet", "paired", "human"});
        for (std::uint32_t g = 0; g < 6; ++g) re.push_back({c, g, std::max(0.0, cell.rna(g) + 8.0)});
        for (std::uint32_t p = 0; p < 16; ++p)
            if (cell.atac(p) > 0) ae.push_back({c, p, 1.0});
        pairs += "r" + std::to_string(c) + "\ta" + std::to_string(c) + "\t" + type + "\n";
    }
    rna.matrix = scbench::ExpressionMatrix(data.train.size(), 6, scbench::Layout::lognorm, re);
    atac.matrix = scbench::ExpressionMatrix(data.train.size(), 16, scbench::Layout::binary, ae);
    for (auto *b : {&rna, &atac}) {
        b->labels["Alpha cell"] = {"Alpha cell", {"Alpha cell"}};
        b->labels["Beta cell"] = {"Beta cell", {"Beta cell"}};
    }
    scbench::save_bundle(rna, root / "rna");
    scbench::save_bundle(atac, root / "atac");
    spit(root / "pairs.tsv", pairs);
}

} // namespace testutil
