#pragma once

#include "vesper/corpus.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace vesper {

/// Undirected, unweighted, simple citation graph for one time window.
class YearGraph {
public:
    YearGraph() = default;
    /// Builds from node ids and an undirected edge list over node positions.
    /// Self-loops are dropped and parallel edges merged.
    YearGraph(int year, std::vector<std::string> node_ids,
              const std::vector<std::pair<std::uint32_t, std::uint32_t>>& edges);

    int year() const { return year_; }
    std::size_t node_count() const { return ids_.size(); }
    std::size_t edge_count() const { return edges_.size(); }
    const std::vector<std::string>& node_ids() const { return ids_; }
    const std::string& id(std::size_t v) const { return ids_[v]; }
    std::optional<std::size_t> node_of(std::string_view id) const;

    /// Canonical edges (u < v), sorted.
    const std::vector<std::pair<std::uint32_t, std::uint32_t>>& edges() const { return edges_; }
    std::span<const std::uint32_t> neighbors(std::size_t v) const {
        return {adjacency_.data() + offsets_[v], offsets_[v + 1] - offsets_[v]};
    }
    std::size_t degree(std::size_t v) const { return offsets_[v + 1] - offsets_[v]; }

private:
    int year_ = 0;
    std::vector<std::string> ids_;
    std::unordered_map<std::string, std::size_t> index_;
    std::vector<std::pair<std::uint32_t, std::uint32_t>> edges_;
    std::vector<std::size_t> offsets_{0};
    std::vector<std::uint32_t> adjacency_;
};

/// G(t): one node per window paper that has a resolvable citation inside the
/// window or is a core paper published by t. Edges come from papers
/// published by t to the papers they cite; dangling ids never become nodes.
YearGraph build_graph(const Corpus& corpus, const CorpusWindow& window);

struct CommunityAssignment {
    std::vector<int> community;  // per node, renumbered by first appearance
    double modularity = 0.0;
    int levels = 0;
};

double modularity(const YearGraph& g, std::span<const int> community, double resolution = 1.0);

/// Louvain: local moving in seeded random order, then aggregation, until no
/// pass improves modularity by more than 1e-12. An edgeless graph yields
/// singleton communities with Q = 0.
CommunityAssignment louvain(const YearGraph& g, double resolution = 1.0, std::uint64_t seed = 0);

/// Exact Brandes betweenness over unordered pairs (endpoints excluded).
/// Per-source contributions are summed in a fixed order so the result does
/// not depend on the thread count.
std::vector<double> betweenness(const YearGraph& g);

/// Pivot-sampled estimate from `pivots` sources, rescaled by n / pivots.
std::vector<double> betweenness_sampled(const YearGraph& g, std::size_t pivots, std::uint64_t seed);

struct CentralityScores {
    int year = 0;
    std::vector<std::string> node_ids;
    std::vector<double> values;
    std::unordered_map<std::string, std::size_t> index;
    /// year -> cohort paper ids (the normalization set for that year).
    std::map<int, std::vector<std::string>> cohorts;

    std::optional<double> value(std::string_view id) const;
};

struct CentralityOptions {
    bool allow_sampling = false;
    std::size_t sampling_threshold = 200000;
    std::size_t pivots = 1024;
    std::uint64_t seed = 0;
};

CentralityScores centrality_scores(const YearGraph& g, const Corpus& corpus, const CorpusWindow& window,
                                   const CentralityOptions& options = {});

void write_edge_list(std::ostream& out, const YearGraph& g);
YearGraph read_edge_list(std::istream& in, int year);
void write_communities_csv(std::ostream& out, const YearGraph& g, const CommunityAssignment& c);
void write_centrality_csv(std::ostream& out, const CentralityScores& c);

}  // namespace vesper
