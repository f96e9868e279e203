#pragma once

#include <cstddef>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "scbench/dataset.hpp"
#include "scbench/stats.hpp"

namespace scbench {

struct RankedGene {
    std::size_t gene_index;
    std::string gene;
    TestResult test;
};

/// Genes of one cell type, most significant first: ascending p-value, then
/// descending t statistic, then ascending gene-list index.
struct DegRanking {
    std::string cell_type;
    std::vector<RankedGene> ranked;
};

using MarkerList = std::vector<std::string>;

struct DegWarning {
    std::string cell_type;
    std::string message;
};

struct DegResult {
    std::map<std::string, DegRanking> rankings;
    std::map<std::string, MarkerList> markers;
    std::vector<DegWarning> skipped;
};

inline constexpr std::size_t kDefaultMarkers = 10;

/// One-vs-rest Welch's t-test for every (cell type, gene) of a log-normalized
/// bundle. Cell types with fewer than two cells, or whose rest group has fewer
/// than two cells, are skipped with a warning.
///
/// Group sums are accumulated over sorted values, so the result does not
/// depend on the order of the cells in the bundle.
DegResult rank_degs(const DatasetBundle &bundle, std::size_t k = kDefaultMarkers);

/// Writes `cell_type  rank  gene  t_stat  p_value` rows (tab-separated, rank
/// 1-based) for the first `k` genes of every ranking, or all genes when k = 0.
void write_rankings_tsv(const DegResult &result, std::size_t k, std::ostream &out);

} // namespace scbench
