#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace scbench {

enum class Layout { raw_counts, lognorm, binary };

std::string_view to_string(Layout layout);
Layout parse_layout(std::string_view text);

/// Ordered, duplicate-free gene symbols. Symbols are compared case-sensitively.
class GeneList {
  public:
    GeneList() = default;
    explicit GeneList(std::vector<std::string> names);

    std::size_t size() const { return names_.size(); }
    const std::string &operator[](std::size_t i) const { return names_[i]; }
    const std::vector<std::string> &names() const { return names_; }

    /// Index of `symbol`, or size() when absent.
    std::size_t find(std::string_view symbol) const;

    bool operator==(const GeneList &) const = default;

  private:
    std::vector<std::string> names_;
};

struct Entry {
    std::uint32_t cell;
    std::uint32_t gene;
    double value;

    bool operator==(const Entry &) const = default;
};

/// Sparse cell x gene matrix in canonical (cell, gene) order. Zero values are
/// never stored.
class ExpressionMatrix {
  public:
    ExpressionMatrix() = default;

    /// Validates and canonicalizes the triplets: indices in range, values
    /// finite and non-negative, no duplicate coordinates. Explicit zeros are
    /// dropped. Binary layout additionally requires every value to be 1.
    ExpressionMatrix(std::size_t n_cells, std::size_t n_genes, Layout layout, std::vector<Entry> entries);

    std::size_t n_cells() const { return n_cells_; }
    std::size_t n_genes() const { return n_genes_; }
    Layout layout() const { return layout_; }
    const std::vector<Entry> &entries() const { return entries_; }

    /// Entries of one cell, ordered by gene.
    std::span<const Entry> row(std::size_t cell) const;

    std::vector<double> row_sums() const;

    bool operator==(const ExpressionMatrix &) const = default;

  private:
    std::size_t n_cells_ = 0;
    std::size_t n_genes_ = 0;
    Layout layout_ = Layout::raw_counts;
    std::vector<Entry> entries_;
    std::vector<std::size_t> row_offsets_{0};
};

struct CellMeta {
    std::string cell_id;
    std::string cell_type;
    std::string tissue;
    std::string dataset_id;
    std::string species;

    bool operator==(const CellMeta &) const = default;
};

struct SynonymSet {
    std::string canonical;
    // Canonical name first, then the remaining synonyms in table order.
    std::vector<std::string> synonyms;

    bool operator==(const SynonymSet &) const = default;
};

struct DatasetBundle {
    GeneList genes;
    ExpressionMatrix matrix;
    std::vector<CellMeta> cells;
    std::map<std::string, SynonymSet> labels;

    bool operator==(const DatasetBundle &) const = default;
};

/// Throws InvalidArgument describing the first violated bundle invariant.
void validate_bundle(const DatasetBundle &bundle);

/// Reads genes.txt, matrix.mtx, cells.tsv and synonyms.tsv from `dir`.
DatasetBundle load_bundle(const std::filesystem::path &dir);

/// Writes the four bundle files in canonical order, creating `dir` if needed.
void save_bundle(const DatasetBundle &bundle, const std::filesystem::path &dir);

/// Synonym table parsing and writing, shared with the ontology cache.
std::map<std::string, SynonymSet> read_synonyms(const std::filesystem::path &file);
void write_synonyms(const std::map<std::string, SynonymSet> &labels, const std::filesystem::path &file);

/// Keeps cells whose total raw count is at least `min_reads`, preserving order.
DatasetBundle filter_cells(const DatasetBundle &bundle, double min_reads);

/// Scales every cell to the largest per-cell total, then applies log1p.
ExpressionMatrix normalize_counts(const ExpressionMatrix &matrix);

/// Sub-bundle with the given cells (in the given order) and the labels they use.
DatasetBundle select_cells(const DatasetBundle &bundle, std::span<const std::size_t> cells);

} // namespace scbench
