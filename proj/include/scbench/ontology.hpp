#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>

#include "scbench/dataset.hpp"

namespace scbench {

struct OntologyConfig {
    std::string endpoint = "https://data.bioontology.org";
    std::string api_key_env = "BIOPORTAL_API_KEY";
    std::string ontology = "CL";
    std::filesystem::path cache_path;     // synonyms.tsv-formatted; empty disables persistence
    std::chrono::milliseconds timeout{30000};
};

/// Cell-ontology synonym lookup over a BioPortal-style search endpoint:
/// GET {endpoint}/search?q=<label>&ontologies=<ontology>&require_exact_match=true
/// with an `Authorization: apikey token=<key>` header. The first result's
/// prefLabel becomes the canonical name and its `synonym` array the synonyms.
///
/// Results are cached in memory and, when cache_path is set, rewritten to the
/// cache file after every miss. One client instance is the single writer of
/// its cache file.
class OntologyClient {
  public:
    explicit OntologyClient(OntologyConfig cfg);

    /// Cached set when the label matches a cached canonical name or synonym,
    /// otherwise a remote lookup. Labels the service does not know yield a
    /// singleton set (not cached).
    SynonymSet lookup(std::string_view label);

    std::map<std::string, SynonymSet> cache() const;
    std::size_t remote_calls() const;

  private:
    OntologyConfig cfg_;
    std::string api_key_;
    mutable std::mutex mutex_;
    std::map<std::string, SynonymSet> cache_;
    std::size_t remote_calls_ = 0;
};

/// Parses a search response body into a synonym set; std::nullopt when the
/// collection is empty.
std::optional<SynonymSet> parse_ontology_search(const std::string &body);

} // namespace scbench
