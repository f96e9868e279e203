#include "scbench/ontology.hpp"

#include <cstdlib>
#include <optional>

#include <httplib.h>
#include <json.hpp>

#include "scbench/error.hpp"
#include "scbench/labels.hpp"

namespace scbench {

std::optional<SynonymSet> parse_ontology_search(const std::string &body) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception &e) {
        throw Error(std::string("ontology response is not JSON: ") + e.what());
    }
    const auto &collection = doc.contains("collection") ? doc.at("collection") : nlohmann::json::array();
    if (!collection.is_array() || collection.empty()) return std::nullopt;
    const auto &first = collection.at(0);
    if (!first.contains("prefLabel") || !first.at("prefLabel").is_string())
        throw Error("ontology search result has no prefLabel");
    SynonymSet set;
    set.canonical = first.at("prefLabel").get<std::string>();
    set.synonyms.push_back(set.canonical);
    if (first.contains("synonym") && first.at("synonym").is_array()) {
        for (const auto &s : first.at("synonym")) {
            if (s.is_string()) set.synonyms.push_back(s.get<std::string>());
        }
    }
    return dedup_synonyms(std::move(set));
}

OntologyClient::OntologyClient(OntologyConfig cfg) : cfg_(std::move(cfg)) {
    if (!cfg_.api_key_env.empty()) {
        if (const char *key = std::getenv(cfg_.api_key_env.c_str())) api_key_ = key;
    }
    if (!cfg_.cache_path.empty() && std::filesystem::exists(cfg_.cache_path)) cache_ = read_synonyms(cfg_.cache_path);
}

SynonymSet OntologyClient::lookup(std::string_view label) {
    {
        std::lock_guard lock(mutex_);
        auto cached = reference_candidates(label, cache_);
        if (cache_.contains(cached.canonical)) return cached;
    }
    if (api_key_.empty())
        throw ConfigError("ontology lookup needs an API key in " +
                          (cfg_.api_key_env.empty() ? std::string("(unset variable)") : cfg_.api_key_env));

    auto scheme = cfg_.endpoint.find("://");
    if (scheme == std::string::npos) throw ConfigError("ontology endpoint must be an http(s) URL");
    auto slash = cfg_.endpoint.find('/', scheme + 3);
    const std::string base = cfg_.endpoint.substr(0, slash);
    std::string path = slash == std::string::npos ? std::string{} : cfg_.endpoint.substr(slash);
    while (!path.empty() && path.back() == '/') path.pop_back();

    httplib::Client client(base);
    client.set_connection_timeout(cfg_.timeout);
    client.set_read_timeout(cfg_.timeout);
    httplib::Params params{{"q", std::string(label)}, {"ontologies", cfg_.ontology}, {"require_exact_match", "true"}};
    httplib::Headers headers{{"Authorization", "apikey token=" + api_key_}};
    auto res = client.Get(path + "/search", params, headers);
    {
        std::lock_guard lock(mutex_);
        ++remote_calls_;
    }
    if (!res) throw Error("ontology lookup failed: " + httplib::to_string(res.error()));
    if (res->status != 200) throw Error("ontology lookup returned HTTP " + std::to_string(res->status));

    auto found = parse_ontology_search(res->body);
    if (!found) return SynonymSet{std::string(label), {std::string(label)}};

    std::lock_guard lock(mutex_);
    auto &entry = cache_[found->canonical];
    entry = *found;
    if (!cfg_.cache_path.empty()) write_synonyms(cache_, cfg_.cache_path);
    return entry;
}

std::map<std::string, SynonymSet> OntologyClient::cache() const {
    std::lock_guard lock(mutex_);
    return cache_;
}

std::size_t OntologyClient::remote_calls() const {
    std::lock_guard lock(mutex_);
    return remote_calls_;
}

} // namespace scbench
