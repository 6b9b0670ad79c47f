#include "vesper/compare.hpp"

#include "vesper/common.hpp"
#include "vesper/csv.hpp"

#include <algorithm>
#include <ostream>

namespace vesper {

double jaccard(const IdSet& a, const IdSet& b) {
    if (a.empty() && b.empty()) return 0.0;
    const IdSet& small = a.size() <= b.size() ? a : b;
    const IdSet& large = a.size() <= b.size() ? b : a;
    std::size_t inter = 0;
    for (const auto& x : small) inter += large.count(x);
    return static_cast<double>(inter) / static_cast<double>(a.size() + b.size() - inter);
}

std::optional<double> overlap_percentage(const std::vector<IdSet>& clusters, const std::vector<IdSet>& communities,
                                         double theta, std::vector<OverlapPair>* pairs) {
    if (!(theta >= 0.0 && theta < 1.0)) throw ConfigError("overlap threshold must lie in [0, 1)");
    if (clusters.empty()) return std::nullopt;
    std::size_t similar = 0;
    for (std::size_t c = 0; c < clusters.size(); ++c) {
        bool hit = false;
        for (std::size_t m = 0; m < communities.size(); ++m) {
            const double j = jaccard(clusters[c], communities[m]);
            if (pairs && j > 0.0) pairs->push_back({static_cast<int>(c), static_cast<int>(m), j});
            hit = hit || j > theta;
        }
        similar += hit;
    }
    return 100.0 * static_cast<double>(similar) / static_cast<double>(clusters.size());
}

OverlapReport overlap(int year, const std::vector<IdSet>& strong, const std::vector<IdSet>& weak,
                      const std::vector<IdSet>& communities, const IdSet& cohort, double theta) {
    if (!weak.empty() && weak.size() != strong.size()) throw DataError("overlap: weak sets do not match clusters");
    std::vector<IdSet> comms;
    for (const auto& c : communities) {
        IdSet in;
        std::copy_if(c.begin(), c.end(), std::inserter(in, in.end()), [&](const std::string& id) { return cohort.count(id); });
        if (!in.empty()) comms.push_back(std::move(in));
    }
    std::vector<IdSet> with_weak = strong;
    for (std::size_t c = 0; c < weak.size(); ++c) with_weak[c].insert(weak[c].begin(), weak[c].end());

    OverlapReport r;
    r.year = year;
    r.n_clusters = strong.size();
    r.n_communities = comms.size();
    r.overlap_pct_with_weak = overlap_percentage(with_weak, comms, theta, &r.pairs_with_weak);
    r.overlap_pct_without_weak = overlap_percentage(strong, comms, theta, &r.pairs_without_weak);
    return r;
}

void write_overlap_csv(std::ostream& out, const std::vector<OverlapReport>& reports) {
    out << "year,n_clusters,n_communities,overlap_pct_with_weak,overlap_pct_without_weak\n";
    for (const auto& r : reports) {
        out << r.year << ',' << r.n_clusters << ',' << r.n_communities << ',' << format_float(r.overlap_pct_with_weak)
            << ',' << format_float(r.overlap_pct_without_weak) << '\n';
    }
}

}  // namespace vesper
