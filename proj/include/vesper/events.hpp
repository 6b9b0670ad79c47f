#pragma once

#include "vesper/clusterer.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace vesper {

inline constexpr double kLinkThreshold = 0.95;

enum class EventKind { Birth, Death, Merge, Split, Continuation };
enum class EventGroup { dynamic, stable, excluded };

std::string to_string(EventKind k);
std::string to_string(EventGroup g);
EventKind parse_event_kind(const std::string& s);

/// Pairwise comparison of a cluster at year t with one at year t+1.
struct EventLink {
    int year = 0;  // t
    int cluster_from = 0;
    int cluster_to = 0;
    double cosine = 0.0;
    bool linked = false;  // cosine > threshold
};

/// Role(s) of one cluster in the transition t -> t+1. `later` marks a
/// cluster of year t+1 (whose only excluded role is Birth).
struct ClusterEvent {
    int year = 0;
    int cluster = 0;
    bool later = false;
    std::vector<EventKind> kinds;
    EventGroup group = EventGroup::excluded;

    bool has(EventKind k) const;
};

struct CentroidResult {
    std::vector<double> centroid;
    bool near_zero = false;
};

/// Element-wise mean of the given rows. Throws DataError on an empty set.
CentroidResult centroid(std::span<const std::size_t> members, const Matrix& embeddings);

struct LinkResult {
    std::vector<EventLink> pairs;  // every (from, to) pair with a defined cosine
    std::vector<std::string> warnings;

    std::vector<EventLink> links() const;
};

/// All pairwise cosines between centroids of consecutive years; pairs above
/// `threshold` are marked linked (many-to-many). Zero-norm centroids are
/// skipped with a warning.
LinkResult link_years(int year, const std::vector<std::vector<double>>& from,
                      const std::vector<std::vector<double>>& to, double threshold = kLinkThreshold);

struct Transition {
    std::vector<ClusterEvent> earlier;  // one per cluster at t
    std::vector<ClusterEvent> later;    // one per cluster at t+1
};

/// Death: no outbound link. Birth: no inbound link. Split: a t cluster with
/// >= 2 children (recorded on the parent and its children). Merge: a t+1
/// cluster with >= 2 parents (recorded on the product and its parents).
/// Continuation: a one-to-one link. A t cluster is dynamic iff it takes part
/// in a split or merge, stable otherwise.
Transition classify(int year, const std::vector<EventLink>& links, std::size_t n_from, std::size_t n_to);

void write_events_csv(std::ostream& out, const LinkResult& links, const Transition& transition);

}  // namespace vesper
