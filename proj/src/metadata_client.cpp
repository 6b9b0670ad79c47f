#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "vesper/metadata_client.hpp"

#include <json.hpp>

#include <thread>
#include <unordered_map>

namespace vesper {

namespace {

std::string url_escape_path(const std::string& s) {
    static constexpr char kHex[] = "0123456789ABCDEF";
    std::string out;
    for (unsigned char c : s) {
        if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~' || c == '/') {
            out.push_back(static_cast<char>(c));
        } else {
            out.push_back('%');
            out.push_back(kHex[c >> 4]);
            out.push_back(kHex[c & 0xf]);
        }
    }
    return out;
}

bool retryable(int status) { return status == 429 || status >= 500; }

}  // namespace

MetadataFragment parse_crossref_message(const std::string& doi, const std::string& body) {
    const auto j = nlohmann::json::parse(body);
    const auto& msg = j.at("message");
    if (!msg.is_object()) throw DataError("message is not an object");
    MetadataFragment f;
    f.doi = doi;
    if (msg.contains("title")) {
        const auto& t = msg["title"];
        if (t.is_array() && !t.empty()) f.title = t.front().get<std::string>();
        if (t.is_string()) f.title = t.get<std::string>();
    }
    if (msg.contains("abstract") && msg["abstract"].is_string()) f.abstract = msg["abstract"].get<std::string>();
    for (const char* key : {"issued", "published", "published-print"}) {
        if (f.year || !msg.contains(key)) continue;
        const auto& parts = msg[key].at("date-parts");
        if (!parts.empty() && !parts[0].empty() && parts[0][0].is_number_integer()) {
            f.year = parts[0][0].get<int>();
        }
    }
    if (msg.contains("reference")) {
        for (const auto& r : msg["reference"]) {
            if (r.contains("DOI") && r["DOI"].is_string()) f.reference_dois.push_back(r["DOI"].get<std::string>());
        }
    }
    return f;
}

FetchReport fetch_metadata(const std::vector<std::string>& dois, const EndpointConfig& config,
                           const Sleeper& sleep_hook) {
    FetchReport report;
    if (dois.empty()) return report;
    if (dois.size() > config.max_batch) {
        throw ConfigError("metadata batch of " + std::to_string(dois.size()) + " exceeds limit " +
                          std::to_string(config.max_batch));
    }
    if (config.requests_per_second <= 0.0) throw ConfigError("requests_per_second must be positive");

    const Sleeper sleep = sleep_hook ? sleep_hook : [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
    const auto spacing = std::chrono::milliseconds(static_cast<long>(1000.0 / config.requests_per_second));

    httplib::Client client(config.base_url);
    client.set_connection_timeout(config.timeout);
    client.set_read_timeout(config.timeout);
    client.set_follow_location(true);

    bool first = true;
    for (const auto& doi : dois) {
        auto backoff = config.initial_backoff;
        for (int attempt = 0;; ++attempt) {
            if (!first) sleep(spacing);
            first = false;
            ++report.requests;
            auto res = client.Get(config.path_prefix + "/" + url_escape_path(doi));
            const bool transport_failure = !res;
            if (!transport_failure && res->status == 200) {
                try {
                    report.fragments.push_back(parse_crossref_message(doi, res->body));
                } catch (const std::exception& e) {
                    report.warnings.push_back("malformed response for " + doi + ": " + e.what());
                }
                break;
            }
            if (!transport_failure && !retryable(res->status)) {
                report.warnings.push_back("HTTP " + std::to_string(res->status) + " for " + doi + ", skipped");
                break;
            }
            if (attempt >= config.max_retries) {
                throw DataError("metadata request for " + doi + " failed after " +
                                std::to_string(attempt + 1) + " attempts (" +
                                (transport_failure ? httplib::to_string(res.error())
                                                   : "HTTP " + std::to_string(res->status)) +
                                ")");
            }
            ++report.retries;
            sleep(backoff);
            backoff *= 2;
        }
    }
    return report;
}

std::size_t merge_fragments(Corpus& corpus, const std::vector<MetadataFragment>& fragments) {
    std::unordered_map<std::string, std::size_t> by_doi;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        if (corpus[i].doi) by_doi.emplace(*corpus[i].doi, i);
    }
    std::size_t merged = 0;
    for (const auto& f : fragments) {
        auto it = by_doi.find(f.doi);
        if (it == by_doi.end()) continue;
        auto& p = corpus.mutable_paper(it->second);
        if (p.title.empty() && f.title) p.title = *f.title;
        if (p.abstract.empty() && f.abstract) p.abstract = *f.abstract;
        if (p.references.empty()) {
            for (const auto& rd : f.reference_dois) {
                auto r = by_doi.find(rd);
                if (r != by_doi.end() && r->second != it->second) p.references.push_back(corpus[r->second].id);
            }
        }
        ++merged;
    }
    return merged;
}

}  // namespace vesper
