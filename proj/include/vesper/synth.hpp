#pragma once

#include "vesper/corpus.hpp"
#include "vesper/events.hpp"
#include "vesper/predict.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace vesper {

struct BlobSpec {
    std::string name;
    int year = 0;
    std::vector<double> center;
    double sigma = 0.5;
    int count = 0;
    std::vector<std::string> vocabulary;
};

struct PlantedEvent {
    int year = 0;  // t of the transition t -> t+1
    EventKind kind = EventKind::Continuation;
    std::vector<std::string> parents;   // blobs at t
    std::vector<std::string> children;  // blobs at t+1
};

struct CitationModel {
    double p_in = 0.06;       // same blob
    double p_out = 0.0;       // unrelated blobs of the same year
    double p_partner = 0.0;   // blobs paired by `partners`
    int bridges = 0;          // bridge papers per partnered blob
    int bridge_refs = 6;      // citations from each bridge into its partner
};

struct TimelineSpec {
    std::vector<int> years;
    std::vector<BlobSpec> blobs;
    std::vector<PlantedEvent> events;
    /// Blob pairs whose papers cite each other (same year).
    std::vector<std::pair<std::string, std::string>> partners;
    CitationModel citations;
    double link_threshold = kLinkThreshold;
    std::uint64_t seed = 0;
    std::size_t dims = 768;

    const BlobSpec& blob(const std::string& name) const;
};

struct Timeline {
    Corpus corpus;
    EmbeddingMatrix embeddings;
    std::vector<PlantedEvent> events;
    std::map<std::string, std::string> blob_of;  // paper id -> blob
    std::vector<std::string> bridge_papers;

    /// 1 if the blob splits or merges at t+1, 0 if it continues or dies;
    /// absent for blobs of the final year.
    std::map<std::string, int> planted_labels() const;
};

/// Checks that linked blob pairs exceed the link threshold and unrelated
/// consecutive-year pairs stay below it. Throws ConfigError otherwise.
void validate_timeline(const TimelineSpec& spec);

/// Gaussian blobs per year, vocabulary-pool texts and SBM citations.
Timeline gen_timeline(const TimelineSpec& spec);

struct SbmNode {
    std::string id;
    int year = 0;
    std::string block;
};

/// Same-year planted-partition citations; the later paper in input order
/// cites the earlier one. Bridge papers of partnered blocks additionally cite
/// `bridge_refs` papers of the partner. Returns (citing, cited) pairs.
std::vector<std::pair<std::string, std::string>> gen_citation_sbm(
    const std::vector<SbmNode>& nodes, const CitationModel& model,
    const std::vector<std::pair<std::string, std::string>>& partners, std::uint64_t seed,
    std::vector<std::string>* bridge_papers = nullptr);

/// Standard-normal features with Bernoulli(logistic(intercept + x beta)) labels.
Dataset gen_feature_table(const std::vector<double>& beta, std::size_t n, std::uint64_t seed, double intercept = 0.0);

/// Four years planting 5 continuations, 3 splits, 3 merges, 2 deaths and
/// 2 births.
TimelineSpec reference_timeline(std::uint64_t seed, int papers_per_blob = 120, int first_year = 2015);

/// Randomized fates over `n_years` with about `papers_per_year` papers split
/// across roughly `blobs_per_year` blobs. Blobs that split or merge at t+1
/// are partnered in the citation graph at t.
TimelineSpec random_timeline(std::uint64_t seed, int n_years = 4, int papers_per_year = 2000,
                             int blobs_per_year = 16, int first_year = 2015);

void write_planted_events_csv(std::ostream& out, const std::vector<PlantedEvent>& events);
void write_planted_labels_csv(std::ostream& out, const Timeline& timeline);

}  // namespace vesper
