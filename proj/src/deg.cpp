#include "scbench/deg.hpp"

#include <algorithm>
#include <charconv>

#include "scbench/error.hpp"

namespace scbench {
namespace {

// Moments of a group made of `values` (sorted, non-zero) plus implicit zeros up
// to `n` members.
Moments sparse_moments(std::span<const double> values, std::size_t n) {
    Moments m;
    m.n = n;
    if (n == 0) return m;
    double sum = 0.0;
    for (double v : values) sum += v;
    m.mean = sum / static_cast<double>(n);
    if (n < 2) return m;
    double ss = 0.0;
    for (double v : values) ss += (v - m.mean) * (v - m.mean);
    ss += static_cast<double>(n - values.size()) * m.mean * m.mean;
    m.variance = ss / static_cast<double>(n - 1);
    return m;
}

bool ranks_before(const RankedGene &a, const RankedGene &b) {
    if (a.test.p_value != b.test.p_value) return a.test.p_value < b.test.p_value;
    if (a.test.t_stat != b.test.t_stat) return a.test.t_stat > b.test.t_stat;
    return a.gene_index < b.gene_index;
}

std::string format_double(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    (void)ec;
    return std::string(buf, end);
}

} // namespace

DegResult rank_degs(const DatasetBundle &bundle, std::size_t k) {
    if (bundle.matrix.layout() != Layout::lognorm)
        throw InvalidArgument("rank_degs needs a log-normalized bundle, layout is " +
                              std::string(to_string(bundle.matrix.layout())));

    std::vector<std::string> types;
    for (const auto &cell : bundle.cells) types.push_back(cell.cell_type);
    std::sort(types.begin(), types.end());
    types.erase(std::unique(types.begin(), types.end()), types.end());

    std::vector<std::size_t> type_of(bundle.cells.size());
    std::vector<std::size_t> type_size(types.size(), 0);
    for (std::size_t c = 0; c < bundle.cells.size(); ++c) {
        auto it = std::lower_bound(types.begin(), types.end(), bundle.cells[c].cell_type);
        type_of[c] = static_cast<std::size_t>(it - types.begin());
        ++type_size[type_of[c]];
    }

    DegResult result;
    const std::size_t n_cells = bundle.cells.size();
    std::vector<bool> active(types.size(), false);
    for (std::size_t t = 0; t < types.size(); ++t) {
        if (type_size[t] < 2) {
            result.skipped.push_back({types[t], "fewer than two cells of this type"});
        } else if (n_cells - type_size[t] < 2) {
            result.skipped.push_back({types[t], "fewer than two cells outside this type"});
        } else {
            active[t] = true;
            result.rankings[types[t]].cell_type = types[t];
        }
    }

    // Column-wise view of the non-zero values, split by cell type.
    const std::size_t n_genes = bundle.genes.size();
    std::vector<std::vector<std::vector<double>>> by_gene(n_genes, std::vector<std::vector<double>>(types.size()));
    for (const auto &e : bundle.matrix.entries()) by_gene[e.gene][type_of[e.cell]].push_back(e.value);

    std::vector<double> rest;
    for (std::size_t g = 0; g < n_genes; ++g) {
        auto &groups = by_gene[g];
        for (auto &values : groups) std::sort(values.begin(), values.end());
        for (std::size_t t = 0; t < types.size(); ++t) {
            if (!active[t]) continue;
            rest.clear();
            for (std::size_t u = 0; u < types.size(); ++u) {
                if (u != t) rest.insert(rest.end(), groups[u].begin(), groups[u].end());
            }
            std::sort(rest.begin(), rest.end());
            const auto in = sparse_moments(groups[t], type_size[t]);
            const auto out = sparse_moments(rest, n_cells - type_size[t]);
            result.rankings[types[t]].ranked.push_back({g, bundle.genes[g], welch_from_moments(in, out)});
        }
        groups = {};
    }

    for (auto &[type, ranking] : result.rankings) {
        std::sort(ranking.ranked.begin(), ranking.ranked.end(), ranks_before);
        auto &markers = result.markers[type];
        for (std::size_t i = 0; i < std::min(k, ranking.ranked.size()); ++i) markers.push_back(ranking.ranked[i].gene);
    }
    return result;
}

void write_rankings_tsv(const DegResult &result, std::size_t k, std::ostream &out) {
    out << "cell_type\trank\tgene\tt_stat\tp_value\n";
    for (const auto &[type, ranking] : result.rankings) {
        const std::size_t n = k == 0 ? ranking.ranked.size() : std::min(k, ranking.ranked.size());
        for (std::size_t i = 0; i < n; ++i) {
            const auto &r = ranking.ranked[i];
            out << type << '\t' << i + 1 << '\t' << r.gene << '\t' << format_double(r.test.t_stat) << '\t'
                << format_double(r.test.p_value) << '\n';
        }
    }
}

} // namespace scbench
