#include "scbench/labels.hpp"

#include <array>
#include <cctype>
#include <fstream>
#include <set>

#include "scbench/error.hpp"

namespace scbench {
namespace {

constexpr std::string_view kWhitespace = " \t\r\v\f";

bool is_lower_alpha(std::string_view s) {
    for (char c : s) {
        if (c < 'a' || c > 'z') return false;
    }
    return true;
}

bool ends_with(std::string_view s, std::string_view suffix) {
    return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

bool is_article(std::string_view token) { return token == "a" || token == "an" || token == "the"; }

bool is_alnum(char c) { return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9'); }
bool is_digit(char c) { return c >= '0' && c <= '9'; }

// Greek letters by their second UTF-8 byte, for the 0xCE and 0xCF lead bytes.
std::string_view greek_name(unsigned char lead, unsigned char cont) {
    static constexpr std::array<std::string_view, 24> names = {
        "alpha", "beta", "gamma", "delta", "epsilon", "zeta", "eta", "theta",
        "iota", "kappa", "lambda", "mu", "nu", "xi", "omicron", "pi",
        "rho", "sigma", "tau", "upsilon", "phi", "chi", "psi", "omega"};
    int index = -1;
    if (lead == 0xCE && cont >= 0x91 && cont <= 0xA9) {
        index = cont - 0x91; // uppercase, with a hole at U+03A2
        if (cont == 0xA2) return {};
        if (cont > 0xA2) --index;
    } else if (lead == 0xCE && cont >= 0xB1 && cont <= 0xBF) {
        index = cont - 0xB1;
    } else if (lead == 0xCF && cont >= 0x80 && cont <= 0x89) {
        index = 15 + (cont - 0x80);
        if (cont == 0x82) return "sigma"; // final sigma
        if (cont > 0x82) --index;
    }
    if (index < 0 || index >= static_cast<int>(names.size())) return {};
    return names[static_cast<std::size_t>(index)];
}

std::size_t utf8_length(unsigned char lead) {
    if (lead >= 0xF0) return 4;
    if (lead >= 0xE0) return 3;
    if (lead >= 0xC0) return 2;
    return 1;
}

// Lowercases ASCII, spells out Greek letters and turns other non-ASCII
// sequences into a space.
std::string fold_case(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    for (std::size_t i = 0; i < text.size();) {
        auto c = static_cast<unsigned char>(text[i]);
        if (c < 0x80) {
            out.push_back(static_cast<char>(std::tolower(c)));
            ++i;
            continue;
        }
        std::size_t len = utf8_length(c);
        if (len == 2 && i + 1 < text.size()) {
            auto name = greek_name(c, static_cast<unsigned char>(text[i + 1]));
            if (!name.empty()) {
                out.append(name);
                i += 2;
                continue;
            }
        }
        out.push_back(' ');
        i += len;
    }
    return out;
}

std::string strip_punctuation(const std::string &text) {
    std::string out(text.size(), ' ');
    auto at = [&](std::size_t i) -> char { return i < text.size() ? text[i] : ' '; };
    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        char prev = i > 0 ? text[i - 1] : ' ';
        char next = at(i + 1);
        if (is_alnum(c)) {
            out[i] = c;
        } else if (c == '+') {
            if (is_alnum(prev) || is_alnum(next) || prev == '+' || next == '+') out[i] = c;
        } else if (c == '-') {
            if (is_digit(prev) || is_digit(next)) out[i] = c;
        }
    }
    return out;
}

} // namespace

std::string cleanse(std::string_view response) {
    auto stop = response.find_first_of("\n,.");
    auto prefix = response.substr(0, stop);
    auto first = prefix.find_first_not_of(kWhitespace);
    if (first == std::string_view::npos) return {};
    auto last = prefix.find_last_not_of(kWhitespace);
    return std::string(prefix.substr(first, last - first + 1));
}

Singularizer::Singularizer() {
    for (std::string_view invariant :
         {"species", "series", "mucosa", "pancreas", "diabetes", "lens", "news", "plasma", "corpus", "has", "was",
          "this", "its", "gas", "bus", "plus", "always", "various", "vas"}) {
        exceptions_.emplace(std::string(invariant), std::string(invariant));
    }
    static constexpr std::array<std::pair<std::string_view, std::string_view>, 17> irregular = {{
        {"testes", "testis"},
        {"mice", "mouse"},
        {"teeth", "tooth"},
        {"feet", "foot"},
        {"nuclei", "nucleus"},
        {"fungi", "fungus"},
        {"bacteria", "bacterium"},
        {"metastases", "metastasis"},
        {"doses", "dose"},
        {"bases", "base"},
        {"cases", "case"},
        {"phases", "phase"},
        {"responses", "response"},
        {"men", "man"},
        {"women", "woman"},
        {"children", "child"},
        {"cheeses", "cheese"},
    }};
    for (auto [plural, singular] : irregular) exceptions_.emplace(std::string(plural), std::string(singular));
}

void Singularizer::add_exception(std::string plural, std::string singular) {
    exceptions_.insert_or_assign(std::move(plural), std::move(singular));
}

void Singularizer::load_exceptions(const std::filesystem::path &file) {
    std::ifstream in(file);
    if (!in) throw Error("cannot open inflection exceptions: " + file.string());
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        auto tab = line.find('\t');
        std::string plural = fold_case(line.substr(0, tab));
        std::string singular = tab == std::string::npos ? plural : fold_case(line.substr(tab + 1));
        if (!is_lower_alpha(plural) || !is_lower_alpha(singular) || plural.empty() || singular.empty())
            throw FormatError(file.string(), line_no, "exception entries must be alphabetic words");
        add_exception(std::move(plural), std::move(singular));
    }
}

std::string Singularizer::word(std::string_view token) const {
    std::string current(token);
    // Rule outputs are fixed points of the suffix rules, but a user table may
    // map one word onto another entry; iterate to a fixed point.
    for (int round = 0; round < 8; ++round) {
        std::string lower = fold_case(current);
        std::string next = current;
        if (auto it = exceptions_.find(lower); it != exceptions_.end()) {
            next = it->second;
        } else if (lower.size() <= 2 || !is_lower_alpha(lower)) {
            return current;
        } else if (ends_with(lower, "ies") && lower.size() > 3) {
            next = current.substr(0, current.size() - 3) + "y";
        } else if (ends_with(lower, "sses")) {
            next = current.substr(0, current.size() - 2);
        } else if (ends_with(lower, "yses") || ends_with(lower, "oses") || ends_with(lower, "eses")) {
            next = current.substr(0, current.size() - 2) + "is";
        } else if (ends_with(lower, "s") && !ends_with(lower, "ss") && !ends_with(lower, "us") &&
                   !ends_with(lower, "is")) {
            next = current.substr(0, current.size() - 1);
        }
        if (next == current) return current;
        current = std::move(next);
    }
    return current;
}

std::string Singularizer::phrase(std::string_view text) const {
    std::string out;
    std::size_t i = 0;
    while (i < text.size()) {
        std::size_t start = text.find_first_not_of(kWhitespace, i);
        out.append(text.substr(i, (start == std::string_view::npos ? text.size() : start) - i));
        if (start == std::string_view::npos) break;
        std::size_t end = text.find_first_of(kWhitespace, start);
        if (end == std::string_view::npos) end = text.size();
        out += word(text.substr(start, end - start));
        i = end;
    }
    return out;
}

const Singularizer &Singularizer::standard() {
    static const Singularizer instance;
    return instance;
}

std::string singularize(std::string_view phrase) { return Singularizer::standard().phrase(phrase); }

std::vector<std::string> tokenize(std::string_view normalized) {
    std::vector<std::string> tokens;
    std::size_t i = 0;
    while (i < normalized.size()) {
        std::size_t start = normalized.find_first_not_of(kWhitespace, i);
        if (start == std::string_view::npos) break;
        std::size_t end = normalized.find_first_of(kWhitespace, start);
        if (end == std::string_view::npos) end = normalized.size();
        tokens.emplace_back(normalized.substr(start, end - start));
        i = end;
    }
    return tokens;
}

std::string normalize_label(std::string_view phrase) {
    const auto &singular = Singularizer::standard();
    std::string out;
    for (const auto &token : tokenize(strip_punctuation(fold_case(phrase)))) {
        if (is_article(token)) continue;
        std::string word = singular.word(token);
        if (is_article(word)) continue;
        if (!out.empty()) out.push_back(' ');
        out += word;
    }
    return out;
}

SynonymSet dedup_synonyms(SynonymSet set) {
    std::set<std::string> seen{normalize_label(set.canonical)};
    std::vector<std::string> kept{set.canonical};
    for (auto &synonym : set.synonyms) {
        if (synonym == set.canonical) continue;
        if (seen.insert(normalize_label(synonym)).second) kept.push_back(std::move(synonym));
    }
    set.synonyms = std::move(kept);
    return set;
}

SynonymSet reference_candidates(std::string_view label, const std::map<std::string, SynonymSet> &table) {
    if (auto it = table.find(std::string(label)); it != table.end()) return dedup_synonyms(it->second);
    const std::string wanted = normalize_label(label);
    for (const auto &[canonical, set] : table) {
        if (normalize_label(canonical) == wanted) return dedup_synonyms(set);
    }
    for (const auto &[canonical, set] : table) {
        for (const auto &synonym : set.synonyms) {
            if (normalize_label(synonym) == wanted) return dedup_synonyms(set);
        }
    }
    return SynonymSet{std::string(label), {std::string(label)}};
}

} // namespace scbench
