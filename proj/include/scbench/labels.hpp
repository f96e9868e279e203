#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "scbench/dataset.hpp"

namespace scbench {

/// Longest prefix of `response` free of newline, comma and period, with
/// surrounding whitespace trimmed. An empty result is a legal prediction.
std::string cleanse(std::string_view response);

/// Rule-based English singularizer for cell-type phrases.
///
/// Each whitespace-separated token is looked up in the exception table first;
/// otherwise the suffix rules apply in order: -ies -> -y, -sses -> -ss,
/// -yses/-oses/-eses -> -sis, and a trailing -s is dropped unless the token
/// ends in -ss, -us or -is. Tokens of two characters or fewer and tokens
/// containing digits are left alone. Every rule output is a fixed point, so
/// singularizing twice is the same as singularizing once.
class Singularizer {
  public:
    Singularizer();

    /// Adds `plural -> singular` pairs from a tab-separated file. A line with a
    /// single column marks the word as invariant.
    void load_exceptions(const std::filesystem::path &file);
    void add_exception(std::string plural, std::string singular);

    std::string word(std::string_view token) const;
    std::string phrase(std::string_view text) const;

    const std::map<std::string, std::string, std::less<>> &exceptions() const { return exceptions_; }

    static const Singularizer &standard();

  private:
    std::map<std::string, std::string, std::less<>> exceptions_;
};

std::string singularize(std::string_view phrase);

/// lowercase -> punctuation to spaces -> drop articles -> collapse
/// whitespace -> singularize each token.
///
/// `+` survives when attached to a token and `-` survives when it touches a
/// digit ("CD141+", "BDCA-3+"); every other non-alphanumeric character becomes
/// a space. A few Greek letters are spelled out, other non-ASCII bytes become
/// spaces. The output only uses the characters [a-z0-9+ -].
std::string normalize_label(std::string_view phrase);

/// Splits an already-normalized label on single spaces.
std::vector<std::string> tokenize(std::string_view normalized);

/// Drops synonyms whose normalized form repeats an earlier entry. The
/// canonical name always survives.
SynonymSet dedup_synonyms(SynonymSet set);

/// The SynonymSet for `label`, looked up by exact canonical name and then by
/// normalized canonical name. Unknown labels yield a singleton set.
SynonymSet reference_candidates(std::string_view label, const std::map<std::string, SynonymSet> &table);

} // namespace scbench
