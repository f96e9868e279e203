#include <doctest.h>

#include <random>
#include <regex>
#include <set>

#include "scbench/labels.hpp"
#include "test_util.hpp"

using namespace scbench;

TEST_CASE("cleanse stops at the first newline, comma or period") {
    CHECK(cleanse("B cells") == "B cells");
    CHECK(cleanse("Dendritic cells, specifically the CD141+ (BDCA-3+) subset") == "Dendritic cells");
    CHECK(cleanse("Proximal tubule cell.\nBecause of Lrp2") == "Proximal tubule cell");
    CHECK(cleanse("  Cholangiocytes  ") == "Cholangiocytes");
    CHECK(cleanse("") == "");
    CHECK(cleanse(".leading stop") == "");
}

TEST_CASE("cleanse is idempotent and never lengthens") {
    std::mt19937_64 rng(3);
    const std::string alphabet = "ab ,.\n\tC+-";
    for (int i = 0; i < 500; ++i) {
        std::string s;
        const int n = static_cast<int>(rng() % 20);
        for (int j = 0; j < n; ++j) s += alphabet[rng() % alphabet.size()];
        const auto once = cleanse(s);
        CHECK(once.size() <= s.size());
        CHECK(cleanse(once) == once);
    }
}

TEST_CASE("singularizer rules") {
    CHECK(singularize("b cells") == "b cell");
    CHECK(singularize("antibodies") == "antibody");
    CHECK(singularize("species") == "species");
    CHECK(singularize("analyses") == "analysis");
    CHECK(singularize("classes") == "class");
    CHECK(singularize("pancreas") == "pancreas");
    CHECK(singularize("nuclei") == "nucleus");
    CHECK(singularize("mice") == "mouse");
    CHECK(singularize("testes") == "testis");
    CHECK(singularize("virus") == "virus");
    CHECK(singularize("cd4") == "cd4");
    CHECK(singularize("as") == "as");
}

TEST_CASE("exceptions can be loaded from a file") {
    testutil::TempDir dir("labels");
    testutil::spit(dir / "ex.tsv", "glia\tglia\nmacrophagi\tmacrophage\nthymus\n");
    Singularizer s;
    s.load_exceptions(dir / "ex.tsv");
    CHECK(s.word("macrophagi") == "macrophage");
    CHECK(s.word("thymus") == "thymus");
}

TEST_CASE("normalize_label pipeline") {
    CHECK(normalize_label("The B-cells") == "b cell");
    CHECK(normalize_label("") == "");
    CHECK(normalize_label("CD141+ dendritic cells") == "cd141+ dendritic cell");
    CHECK(normalize_label("BDCA-3+ cells") == "bdca-3+ cell");
    CHECK(normalize_label("γδ T cells") == "gammadelta t cell");
    CHECK(normalize_label("  Myeloid   dendritic cell ") == "myeloid dendritic cell");
    CHECK(normalize_label("An alveolar macrophage") == "alveolar macrophage");
}

TEST_CASE("normalize_label is a fixed point with a restricted alphabet") {
    std::mt19937_64 rng(17);
    const std::vector<std::string> words{"The", "a", "B-cells", "CD4+", "T", "cells", "Antibodies", "classes",
                                         "analyses", "(naive)", "γ", "IL-7R", "--", "+", "épithélium", "stem",
                                         "progenitors", "an", "species", "Cells.", "3-", "x+y"};
    const std::regex allowed("^[a-z0-9+ -]*$");
    for (int i = 0; i < 1000; ++i) {
        std::string phrase;
        const int n = static_cast<int>(rng() % 6);
        for (int j = 0; j < n; ++j) phrase += words[rng() % words.size()] + (rng() % 3 ? " " : "");
        const auto once = normalize_label(phrase);
        CHECK_MESSAGE(normalize_label(once) == once, phrase);
        CHECK_MESSAGE(std::regex_match(once, allowed), phrase);
    }
}

TEST_CASE("reference candidates") {
    std::map<std::string, SynonymSet> table;
    table["B cell"] = {"B cell", {"B cell", "B lymphocyte"}};
    CHECK(reference_candidates("B cell", table).synonyms == std::vector<std::string>{"B cell", "B lymphocyte"});
    CHECK(reference_candidates("b cells", table).canonical == "B cell");
    CHECK(reference_candidates("B lymphocytes", table).canonical == "B cell");
    const auto unknown = reference_candidates("xyz", table);
    CHECK(unknown.canonical == "xyz");
    CHECK(unknown.synonyms == std::vector<std::string>{"xyz"});
}

TEST_CASE("dedup keeps the first of each normalized form") {
    const auto set = dedup_synonyms({"T cell", {"T cell", "T cells", "t-cell", "T lymphocyte", "T Lymphocytes"}});
    CHECK(set.synonyms == std::vector<std::string>{"T cell", "T lymphocyte"});
    // Random case variants collapse onto one entry per normalized form.
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<std::string> syn{"Mast cell"};
        std::set<std::string> forms{normalize_label("Mast cell")};
        for (int i = 0; i < 6; ++i) {
            std::string s = i % 2 ? "mast cells" : "Mast Cell";
            for (auto &ch : s)
                if (rng() % 2) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
            syn.push_back(s);
            if (i == 3) syn.push_back("mastocyte");
        }
        forms.insert(normalize_label("mastocyte"));
        const auto out = dedup_synonyms({"Mast cell", syn});
        CHECK(out.synonyms.size() == forms.size());
        CHECK(out.synonyms.front() == "Mast cell");
    }
}
