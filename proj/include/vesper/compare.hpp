#pragma once

#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace vesper {

inline constexpr double kOverlapThreshold = 0.1;

using IdSet = std::set<std::string>;

/// |A n B| / |A u B|; 0 when both are empty.
double jaccard(const IdSet& a, const IdSet& b);

struct OverlapPair {
    int cluster = 0;
    int community = 0;
    double jaccard = 0.0;
};

struct OverlapReport {
    int year = 0;
    std::size_t n_clusters = 0;
    std::size_t n_communities = 0;
    std::vector<OverlapPair> pairs_with_weak;
    std::vector<OverlapPair> pairs_without_weak;
    std::optional<double> overlap_pct_with_weak;     // empty when there are no clusters
    std::optional<double> overlap_pct_without_weak;
};

/// Percentage of clusters having at least one community with jaccard > theta.
std::optional<double> overlap_percentage(const std::vector<IdSet>& clusters, const std::vector<IdSet>& communities,
                                         double theta, std::vector<OverlapPair>* pairs = nullptr);

/// `strong` and `weak` hold each cluster's strong and (assigned) weak members.
/// Communities are intersected with `cohort` before comparison; communities
/// left empty are dropped.
OverlapReport overlap(int year, const std::vector<IdSet>& strong, const std::vector<IdSet>& weak,
                      const std::vector<IdSet>& communities, const IdSet& cohort, double theta = kOverlapThreshold);

void write_overlap_csv(std::ostream& out, const std::vector<OverlapReport>& reports);

}  // namespace vesper
