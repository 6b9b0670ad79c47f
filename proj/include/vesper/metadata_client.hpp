#pragma once

#include "vesper/corpus.hpp"

#include <chrono>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace vesper {

/// Open-metadata endpoint. Requests are `GET {base_url}{path_prefix}/{doi}`
/// and responses follow the Crossref work envelope:
/// `{"message": {"title": [..], "abstract": "..", "issued": {"date-parts": [[Y]]},
///   "reference": [{"DOI": ".."}]}}`.
struct EndpointConfig {
    std::string base_url = "https://api.crossref.org";
    std::string path_prefix = "/works";
    double requests_per_second = 5.0;
    int max_retries = 4;
    std::chrono::milliseconds initial_backoff{200};
    std::size_t max_batch = 100;
    std::chrono::seconds timeout{20};
};

struct MetadataFragment {
    std::string doi;
    std::optional<std::string> title;
    std::optional<std::string> abstract;
    std::optional<int> year;
    std::vector<std::string> reference_dois;
};

struct FetchReport {
    std::vector<MetadataFragment> fragments;
    std::vector<std::string> warnings;
    std::size_t requests = 0;
    std::size_t retries = 0;
};

/// Sleep hook; tests replace it to avoid real waits.
using Sleeper = std::function<void(std::chrono::milliseconds)>;

/// Retrieves one fragment per DOI. 429 and 5xx responses and transport
/// failures are retried with exponential backoff; exhausting the retry cap
/// throws DataError. Malformed payloads are skipped with a warning.
FetchReport fetch_metadata(const std::vector<std::string>& dois, const EndpointConfig& config,
                           const Sleeper& sleep = {});

MetadataFragment parse_crossref_message(const std::string& doi, const std::string& body);

/// Fills empty title/abstract/references of records whose DOI matches.
/// Nonempty local fields are never overwritten. Returns merged record count.
std::size_t merge_fragments(Corpus& corpus, const std::vector<MetadataFragment>& fragments);

}  // namespace vesper
