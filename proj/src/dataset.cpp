#include "scbench/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <unordered_set>

#include "scbench/error.hpp"
#include "scbench/labels.hpp"

namespace scbench {
namespace fs = std::filesystem;

namespace {

constexpr std::string_view kCellsHeader = "cell_id\tcell_type\ttissue\tdataset_id\tspecies";

std::vector<std::string> split_tabs(std::string_view line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        auto tab = line.find('\t', start);
        fields.emplace_back(line.substr(start, tab - start));
        if (tab == std::string_view::npos) break;
        start = tab + 1;
    }
    return fields;
}

std::ifstream open_input(const fs::path &file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw Error("missing bundle file: " + file.string());
    return in;
}

std::ofstream open_output(const fs::path &file) {
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + file.string());
    return out;
}

// Reads one LF-terminated line, rejecting CR so files stay LF-only.
bool read_line(std::istream &in, std::string &line, const fs::path &file, std::size_t &line_no) {
    if (!std::getline(in, line)) return false;
    ++line_no;
    if (!line.empty() && line.back() == '\r') throw FormatError(file.string(), line_no, "CRLF line ending");
    return true;
}

std::string format_value(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    (void)ec;
    return std::string(buf, end);
}

template <class T> T parse_number(std::string_view text, const fs::path &file, std::size_t line_no) {
    T value{};
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size())
        throw FormatError(file.string(), line_no, "bad number '" + std::string(text) + "'");
    return value;
}

std::vector<std::string_view> split_spaces(std::string_view line) {
    std::vector<std::string_view> parts;
    std::size_t i = 0;
    while (i < line.size()) {
        auto start = line.find_first_not_of(" \t", i);
        if (start == std::string_view::npos) break;
        auto end = line.find_first_of(" \t", start);
        if (end == std::string_view::npos) end = line.size();
        parts.push_back(line.substr(start, end - start));
        i = end;
    }
    return parts;
}

bool has_control(std::string_view s) {
    return std::any_of(s.begin(), s.end(), [](char c) { return c == '\t' || c == '\n' || c == '\r'; });
}

} // namespace

std::string_view to_string(Layout layout) {
    switch (layout) {
    case Layout::raw_counts: return "raw_counts";
    case Layout::lognorm: return "lognorm";
    case Layout::binary: return "binary";
    }
    return "raw_counts";
}

Layout parse_layout(std::string_view text) {
    if (text == "raw_counts") return Layout::raw_counts;
    if (text == "lognorm") return Layout::lognorm;
    if (text == "binary") return Layout::binary;
    throw InvalidArgument("unknown matrix layout '" + std::string(text) + "'");
}

GeneList::GeneList(std::vector<std::string> names) : names_(std::move(names)) {
    std::unordered_set<std::string_view> seen;
    for (const auto &name : names_) {
        if (name.empty()) throw InvalidArgument("empty gene symbol");
        if (has_control(name)) throw InvalidArgument("gene symbol contains tab or newline: " + name);
        if (!seen.insert(name).second) throw InvalidArgument("duplicate gene symbol: " + name);
    }
}

std::size_t GeneList::find(std::string_view symbol) const {
    auto it = std::find(names_.begin(), names_.end(), symbol);
    return static_cast<std::size_t>(it - names_.begin());
}

ExpressionMatrix::ExpressionMatrix(std::size_t n_cells, std::size_t n_genes, Layout layout, std::vector<Entry> entries)
    : n_cells_(n_cells), n_genes_(n_genes), layout_(layout) {
    std::erase_if(entries, [](const Entry &e) { return e.value == 0.0; });
    for (const auto &e : entries) {
        if (e.cell >= n_cells || e.gene >= n_genes)
            throw InvalidArgument("matrix entry (" + std::to_string(e.cell) + ", " + std::to_string(e.gene) +
                                  ") out of range");
        if (!std::isfinite(e.value) || e.value < 0.0)
            throw InvalidArgument("matrix values must be finite and non-negative");
        if (layout == Layout::binary && e.value != 1.0) throw InvalidArgument("binary matrix holds a value other than 1");
    }
    std::sort(entries.begin(), entries.end(),
              [](const Entry &a, const Entry &b) { return std::tie(a.cell, a.gene) < std::tie(b.cell, b.gene); });
    for (std::size_t i = 1; i < entries.size(); ++i) {
        if (entries[i].cell == entries[i - 1].cell && entries[i].gene == entries[i - 1].gene)
            throw InvalidArgument("duplicate matrix entry for cell " + std::to_string(entries[i].cell) + ", gene " +
                                  std::to_string(entries[i].gene));
    }
    entries_ = std::move(entries);
    row_offsets_.assign(n_cells_ + 1, 0);
    for (const auto &e : entries_) ++row_offsets_[e.cell + 1];
    for (std::size_t c = 0; c < n_cells_; ++c) row_offsets_[c + 1] += row_offsets_[c];
}

std::span<const Entry> ExpressionMatrix::row(std::size_t cell) const {
    return std::span<const Entry>(entries_).subspan(row_offsets_[cell], row_offsets_[cell + 1] - row_offsets_[cell]);
}

std::vector<double> ExpressionMatrix::row_sums() const {
    std::vector<double> sums(n_cells_, 0.0);
    for (const auto &e : entries_) sums[e.cell] += e.value;
    return sums;
}

void validate_bundle(const DatasetBundle &bundle) {
    if (bundle.matrix.n_genes() != bundle.genes.size())
        throw InvalidArgument("matrix has " + std::to_string(bundle.matrix.n_genes()) + " genes but gene list has " +
                              std::to_string(bundle.genes.size()));
    if (bundle.matrix.n_cells() != bundle.cells.size())
        throw InvalidArgument("matrix has " + std::to_string(bundle.matrix.n_cells()) + " cells but metadata has " +
                              std::to_string(bundle.cells.size()));
    std::unordered_set<std::string_view> ids;
    for (const auto &cell : bundle.cells) {
        if (cell.cell_id.empty()) throw InvalidArgument("empty cell_id");
        if (!ids.insert(cell.cell_id).second) throw InvalidArgument("duplicate cell_id: " + cell.cell_id);
        if (cell.tissue.empty()) throw InvalidArgument("empty tissue for cell " + cell.cell_id);
        for (const auto *field : {&cell.cell_id, &cell.cell_type, &cell.tissue, &cell.dataset_id, &cell.species}) {
            if (has_control(*field)) throw InvalidArgument("metadata field contains tab or newline: " + cell.cell_id);
        }
        if (!bundle.labels.contains(cell.cell_type))
            throw InvalidArgument("cell type '" + cell.cell_type + "' has no synonym set");
    }
    for (const auto &[key, set] : bundle.labels) {
        if (key != set.canonical) throw InvalidArgument("synonym map key differs from canonical: " + key);
        if (set.synonyms.empty() || set.synonyms.front() != set.canonical)
            throw InvalidArgument("synonym set must list its canonical name first: " + key);
        std::set<std::string> forms;
        for (const auto &s : set.synonyms) {
            if (s.empty() || has_control(s)) throw InvalidArgument("bad synonym in set " + key);
            if (!forms.insert(normalize_label(s)).second)
                throw InvalidArgument("synonyms of '" + key + "' collide after normalization: " + s);
        }
    }
}

std::map<std::string, SynonymSet> read_synonyms(const fs::path &file) {
    auto in = open_input(file);
    std::map<std::string, SynonymSet> labels;
    std::string line;
    std::size_t line_no = 0;
    while (read_line(in, line, file, line_no)) {
        if (line.empty()) continue;
        auto fields = split_tabs(line);
        if (fields.size() != 2 || fields[0].empty() || fields[1].empty())
            throw FormatError(file.string(), line_no, "expected 'canonical<TAB>synonym'");
        if (line_no == 1 && fields[0] == "canonical" && fields[1] == "synonym") continue;
        auto &set = labels[fields[0]];
        if (set.canonical.empty()) {
            set.canonical = fields[0];
            set.synonyms.push_back(fields[0]);
        }
        if (fields[1] != fields[0]) set.synonyms.push_back(fields[1]);
    }
    for (auto &[key, set] : labels) set = dedup_synonyms(std::move(set));
    return labels;
}

void write_synonyms(const std::map<std::string, SynonymSet> &labels, const fs::path &file) {
    auto out = open_output(file);
    for (const auto &[key, set] : labels) {
        for (const auto &synonym : set.synonyms) out << set.canonical << '\t' << synonym << '\n';
    }
}

DatasetBundle load_bundle(const fs::path &dir) {
    DatasetBundle bundle;
    std::string line;

    {
        const auto file = dir / "genes.txt";
        auto in = open_input(file);
        std::vector<std::string> names;
        std::size_t line_no = 0;
        while (read_line(in, line, file, line_no)) {
            if (line.empty()) throw FormatError(file.string(), line_no, "empty gene symbol");
            names.push_back(line);
        }
        try {
            bundle.genes = GeneList(std::move(names));
        } catch (const InvalidArgument &e) {
            throw FormatError(file.string(), line_no, e.what());
        }
    }

    {
        const auto file = dir / "matrix.mtx";
        auto in = open_input(file);
        std::size_t line_no = 0;
        if (!read_line(in, line, file, line_no) || !line.starts_with("%%MatrixMarket"))
            throw FormatError(file.string(), 1, "missing %%MatrixMarket banner");
        auto banner = split_spaces(line);
        if (banner.size() != 5 || banner[1] != "matrix" || banner[2] != "coordinate")
            throw FormatError(file.string(), 1, "only 'matrix coordinate' files are supported");
        const bool pattern = banner[3] == "pattern";
        if (!pattern && banner[3] != "real" && banner[3] != "integer")
            throw FormatError(file.string(), 1, "unsupported field type '" + std::string(banner[3]) + "'");
        std::optional<Layout> layout;
        std::size_t rows = 0, cols = 0, nnz = 0;
        while (read_line(in, line, file, line_no)) {
            if (line.starts_with("%")) {
                if (line.starts_with("%layout:")) {
                    auto value = split_spaces(std::string_view(line).substr(8));
                    try {
                        layout = parse_layout(value.empty() ? std::string_view{} : value[0]);
                    } catch (const InvalidArgument &e) {
                        throw FormatError(file.string(), line_no, e.what());
                    }
                }
                continue;
            }
            auto parts = split_spaces(line);
            if (parts.size() != 3) throw FormatError(file.string(), line_no, "expected 'rows cols nnz'");
            rows = parse_number<std::size_t>(parts[0], file, line_no);
            cols = parse_number<std::size_t>(parts[1], file, line_no);
            nnz = parse_number<std::size_t>(parts[2], file, line_no);
            break;
        }
        if (!layout) throw FormatError(file.string(), line_no, "missing '%layout:' header comment");
        std::vector<Entry> entries;
        entries.reserve(nnz);
        while (read_line(in, line, file, line_no)) {
            if (line.empty() || line.starts_with("%")) continue;
            auto parts = split_spaces(line);
            if (parts.size() != (pattern ? 2u : 3u)) throw FormatError(file.string(), line_no, "malformed entry");
            auto i = parse_number<std::size_t>(parts[0], file, line_no);
            auto j = parse_number<std::size_t>(parts[1], file, line_no);
            double v = pattern ? 1.0 : parse_number<double>(parts[2], file, line_no);
            if (i < 1 || i > rows || j < 1 || j > cols)
                throw FormatError(file.string(), line_no, "index out of declared range");
            entries.push_back({static_cast<std::uint32_t>(i - 1), static_cast<std::uint32_t>(j - 1), v});
        }
        if (entries.size() != nnz)
            throw FormatError(file.string(), line_no,
                              "declared " + std::to_string(nnz) + " entries, found " + std::to_string(entries.size()));
        try {
            bundle.matrix = ExpressionMatrix(rows, cols, *layout, std::move(entries));
        } catch (const InvalidArgument &e) {
            throw FormatError(file.string(), line_no, e.what());
        }
    }

    {
        const auto file = dir / "cells.tsv";
        auto in = open_input(file);
        std::size_t line_no = 0;
        if (!read_line(in, line, file, line_no) || line != kCellsHeader)
            throw FormatError(file.string(), 1, "expected header '" + std::string(kCellsHeader) + "'");
        while (read_line(in, line, file, line_no)) {
            if (line.empty()) continue;
            auto fields = split_tabs(line);
            if (fields.size() != 5) throw FormatError(file.string(), line_no, "expected 5 tab-separated fields");
            bundle.cells.push_back({fields[0], fields[1], fields[2], fields[3], fields[4]});
        }
    }

    bundle.labels = read_synonyms(dir / "synonyms.tsv");

    if (bundle.matrix.n_cells() != bundle.cells.size() || bundle.matrix.n_genes() != bundle.genes.size())
        throw InvalidArgument("dimension mismatch in " + dir.string() + ": matrix is " +
                              std::to_string(bundle.matrix.n_cells()) + "x" + std::to_string(bundle.matrix.n_genes()) +
                              ", metadata has " + std::to_string(bundle.cells.size()) + " cells and " +
                              std::to_string(bundle.genes.size()) + " genes");
    validate_bundle(bundle);
    return bundle;
}

void save_bundle(const DatasetBundle &bundle, const fs::path &dir) {
    validate_bundle(bundle);
    fs::create_directories(dir);
    {
        auto out = open_output(dir / "genes.txt");
        for (const auto &g : bundle.genes.names()) out << g << '\n';
    }
    {
        auto out = open_output(dir / "matrix.mtx");
        const auto &m = bundle.matrix;
        out << "%%MatrixMarket matrix coordinate real general\n";
        out << "%layout: " << to_string(m.layout()) << '\n';
        out << m.n_cells() << ' ' << m.n_genes() << ' ' << m.entries().size() << '\n';
        for (const auto &e : m.entries()) out << e.cell + 1 << ' ' << e.gene + 1 << ' ' << format_value(e.value) << '\n';
    }
    {
        auto out = open_output(dir / "cells.tsv");
        out << kCellsHeader << '\n';
        for (const auto &c : bundle.cells)
            out << c.cell_id << '\t' << c.cell_type << '\t' << c.tissue << '\t' << c.dataset_id << '\t' << c.species
                << '\n';
    }
    write_synonyms(bundle.labels, dir / "synonyms.tsv");
}

DatasetBundle select_cells(const DatasetBundle &bundle, std::span<const std::size_t> cells) {
    DatasetBundle out;
    out.genes = bundle.genes;
    std::vector<Entry> entries;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        const auto c = cells[i];
        if (c >= bundle.cells.size()) throw InvalidArgument("cell index out of range");
        for (const auto &e : bundle.matrix.row(c)) entries.push_back({static_cast<std::uint32_t>(i), e.gene, e.value});
        out.cells.push_back(bundle.cells[c]);
        const auto &type = bundle.cells[c].cell_type;
        out.labels.try_emplace(type, bundle.labels.at(type));
    }
    out.matrix = ExpressionMatrix(cells.size(), bundle.genes.size(), bundle.matrix.layout(), std::move(entries));
    return out;
}

DatasetBundle filter_cells(const DatasetBundle &bundle, double min_reads) {
    if (bundle.matrix.layout() != Layout::raw_counts)
        throw InvalidArgument("filter_cells needs raw counts, matrix layout is " +
                              std::string(to_string(bundle.matrix.layout())));
    const auto totals = bundle.matrix.row_sums();
    std::vector<std::size_t> keep;
    for (std::size_t c = 0; c < totals.size(); ++c) {
        if (totals[c] >= min_reads) keep.push_back(c);
    }
    return select_cells(bundle, keep);
}

ExpressionMatrix normalize_counts(const ExpressionMatrix &matrix) {
    if (matrix.layout() != Layout::raw_counts)
        throw InvalidArgument("normalize_counts needs raw counts, matrix layout is " +
                              std::string(to_string(matrix.layout())));
    const auto totals = matrix.row_sums();
    double target = 0.0;
    for (std::size_t c = 0; c < totals.size(); ++c) {
        if (totals[c] <= 0.0)
            throw InvalidArgument("cell " + std::to_string(c) + " has zero total count; filter it before normalizing");
        target = std::max(target, totals[c]);
    }
    std::vector<Entry> entries = matrix.entries();
    for (auto &e : entries) e.value = std::log1p(e.value * (target / totals[e.cell]));
    return ExpressionMatrix(matrix.n_cells(), matrix.n_genes(), Layout::lognorm, std::move(entries));
}

} // namespace scbench
