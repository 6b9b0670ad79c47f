#include "vesper/graph.hpp"

#include "vesper/csv.hpp"

#include <algorithm>
#include <istream>
#include <numeric>
#include <ostream>
#include <set>
#include <unordered_map>

namespace vesper {

YearGraph::YearGraph(int year, std::vector<std::string> node_ids,
                     const std::vector<std::pair<std::uint32_t, std::uint32_t>>& edges)
    : year_(year), ids_(std::move(node_ids)) {
    const std::size_t n = ids_.size();
    for (std::size_t v = 0; v < n; ++v) {
        if (!index_.emplace(ids_[v], v).second) throw DataError("duplicate graph node id " + ids_[v]);
    }
    for (auto [u, v] : edges) {
        if (u >= n || v >= n) throw DataError("edge endpoint out of range");
        if (u == v) continue;
        edges_.emplace_back(std::min(u, v), std::max(u, v));
    }
    std::sort(edges_.begin(), edges_.end());
    edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());

    std::vector<std::size_t> deg(n, 0);
    for (auto [u, v] : edges_) {
        ++deg[u];
        ++deg[v];
    }
    offsets_.assign(n + 1, 0);
    for (std::size_t v = 0; v < n; ++v) offsets_[v + 1] = offsets_[v] + deg[v];
    adjacency_.resize(offsets_[n]);
    std::vector<std::size_t> fill(offsets_.begin(), offsets_.end() - 1);
    for (auto [u, v] : edges_) {
        adjacency_[fill[u]++] = v;
        adjacency_[fill[v]++] = u;
    }
    for (std::size_t v = 0; v < n; ++v) {
        std::sort(adjacency_.begin() + static_cast<std::ptrdiff_t>(offsets_[v]),
                  adjacency_.begin() + static_cast<std::ptrdiff_t>(offsets_[v + 1]));
    }
}

std::optional<std::size_t> YearGraph::node_of(std::string_view id) const {
    auto it = index_.find(std::string(id));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

YearGraph build_graph(const Corpus& corpus, const CorpusWindow& w) {
    std::vector<std::pair<std::size_t, std::size_t>> raw;  // corpus indices
    std::vector<char> keep(corpus.size(), 0);
    for (std::size_t m = 0; m < w.members.size(); ++m) {
        const std::size_t i = w.members[m];
        if (w.published_by_t[m] && corpus[i].is_core) keep[i] = 1;
        if (!w.published_by_t[m]) continue;
        for (const auto& ref : corpus[i].references) {
            auto j = corpus.index_of(ref);
            if (!j || *j == i || !w.contains(*j)) continue;
            raw.emplace_back(i, *j);
            keep[i] = keep[*j] = 1;
        }
    }
    std::vector<std::string> ids;
    std::unordered_map<std::size_t, std::uint32_t> pos;
    for (std::size_t i : w.members) {
        if (!keep[i]) continue;
        pos.emplace(i, static_cast<std::uint32_t>(ids.size()));
        ids.push_back(corpus[i].id);
    }
    std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
    edges.reserve(raw.size());
    for (auto [a, b] : raw) edges.emplace_back(pos.at(a), pos.at(b));
    return YearGraph(w.year, std::move(ids), edges);
}

// ---- modularity / Louvain ---------------------------------------------------

namespace {

/// Symmetric weighted graph used across Louvain levels. A self entry holds
/// A_ii, which counts internal weight of an aggregated node in both directions.
struct WeightedGraph {
    std::vector<std::vector<std::pair<std::uint32_t, double>>> adj;
    std::vector<double> degree;
    double total = 0.0;  // sum of degrees (2m)

    std::size_t size() const { return adj.size(); }
};

WeightedGraph from_year_graph(const YearGraph& g) {
    WeightedGraph w;
    w.adj.resize(g.node_count());
    w.degree.assign(g.node_count(), 0.0);
    for (std::size_t v = 0; v < g.node_count(); ++v) {
        for (auto u : g.neighbors(v)) w.adj[v].emplace_back(u, 1.0);
        w.degree[v] = static_cast<double>(g.degree(v));
        w.total += w.degree[v];
    }
    return w;
}

double weighted_modularity(const WeightedGraph& g, const std::vector<int>& comm, double gamma) {
    if (g.total == 0.0) return 0.0;
    std::unordered_map<int, double> internal, tot;
    for (std::size_t v = 0; v < g.size(); ++v) {
        tot[comm[v]] += g.degree[v];
        for (auto [u, w] : g.adj[v]) {
            if (comm[u] == comm[v]) internal[comm[v]] += w;
        }
    }
    double q = 0.0;
    for (const auto& [c, t] : tot) {
        q += internal[c] / g.total - gamma * (t / g.total) * (t / g.total);
    }
    return q;
}

/// One round of local moves. Returns true if any node changed community.
bool local_moves(const WeightedGraph& g, std::vector<int>& comm, double gamma, Rng& rng) {
    const std::size_t n = g.size();
    std::vector<double> tot(n, 0.0);
    for (std::size_t v = 0; v < n; ++v) tot[static_cast<std::size_t>(comm[v])] += g.degree[v];
    std::vector<std::uint32_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);

    std::vector<double> link(n, 0.0);
    std::vector<int> touched;
    bool any_move = false;
    for (;;) {
        bool moved = false;
        for (auto v : order) {
            const int own = comm[v];
            const double kv = g.degree[v];
            touched.clear();
            for (auto [u, w] : g.adj[v]) {
                if (u == v) continue;
                const int c = comm[u];
                if (link[static_cast<std::size_t>(c)] == 0.0) touched.push_back(c);
                link[static_cast<std::size_t>(c)] += w;
            }
            tot[static_cast<std::size_t>(own)] -= kv;
            const double own_gain = link[static_cast<std::size_t>(own)] - gamma * tot[static_cast<std::size_t>(own)] * kv / g.total;
            int best = own;
            double best_gain = own_gain;
            std::sort(touched.begin(), touched.end());
            for (int c : touched) {
                const double gain = link[static_cast<std::size_t>(c)] - gamma * tot[static_cast<std::size_t>(c)] * kv / g.total;
                if (gain > best_gain + 1e-12) {
                    best_gain = gain;
                    best = c;
                }
            }
            tot[static_cast<std::size_t>(best)] += kv;
            if (best != own) {
                comm[v] = best;
                moved = any_move = true;
            }
            for (int c : touched) link[static_cast<std::size_t>(c)] = 0.0;
        }
        if (!moved) break;
    }
    return any_move;
}

std::vector<int> renumber(const std::vector<int>& comm) {
    std::unordered_map<int, int> map;
    std::vector<int> out(comm.size());
    for (std::size_t i = 0; i < comm.size(); ++i) {
        auto [it, inserted] = map.emplace(comm[i], static_cast<int>(map.size()));
        out[i] = it->second;
    }
    return out;
}

WeightedGraph aggregate(const WeightedGraph& g, const std::vector<int>& comm, std::size_t n_comm) {
    WeightedGraph out;
    out.adj.resize(n_comm);
    out.degree.assign(n_comm, 0.0);
    out.total = g.total;
    std::vector<std::map<std::uint32_t, double>> acc(n_comm);
    for (std::size_t v = 0; v < g.size(); ++v) {
        const auto cv = static_cast<std::size_t>(comm[v]);
        out.degree[cv] += g.degree[v];
        for (auto [u, w] : g.adj[v]) acc[cv][static_cast<std::uint32_t>(comm[u])] += w;
    }
    for (std::size_t c = 0; c < n_comm; ++c) out.adj[c].assign(acc[c].begin(), acc[c].end());
    return out;
}

}  // namespace

double modularity(const YearGraph& g, std::span<const int> community, double resolution) {
    if (community.size() != g.node_count()) throw DataError("modularity: assignment size mismatch");
    return weighted_modularity(from_year_graph(g), std::vector<int>(community.begin(), community.end()), resolution);
}

CommunityAssignment louvain(const YearGraph& g, double resolution, std::uint64_t seed) {
    const std::size_t n = g.node_count();
    CommunityAssignment result;
    result.community.resize(n);
    std::iota(result.community.begin(), result.community.end(), 0);
    if (g.edge_count() == 0) return result;

    Rng rng(seed);
    WeightedGraph level = from_year_graph(g);
    std::vector<int> node_to_level(n);
    std::iota(node_to_level.begin(), node_to_level.end(), 0);
    double q = weighted_modularity(level, std::vector<int>(node_to_level.begin(), node_to_level.end()), resolution);
    for (;;) {
        std::vector<int> comm(level.size());
        std::iota(comm.begin(), comm.end(), 0);
        local_moves(level, comm, resolution, rng);
        const double new_q = weighted_modularity(level, comm, resolution);
        if (!(new_q - q > 1e-12)) break;
        q = new_q;
        ++result.levels;
        comm = renumber(comm);
        const auto n_comm = static_cast<std::size_t>(*std::max_element(comm.begin(), comm.end()) + 1);
        for (auto& c : node_to_level) c = comm[static_cast<std::size_t>(c)];
        level = aggregate(level, comm, n_comm);
        if (n_comm == 1) break;
    }
    result.community = renumber(node_to_level);
    result.modularity = modularity(g, result.community, resolution);
    return result;
}

// ---- betweenness ------------------------------------------------------------

namespace {

/// Adds the dependency of every node on `source` into `acc`.
struct BrandesWorkspace {
    std::vector<std::int64_t> dist;
    std::vector<double> sigma, delta;
    std::vector<std::uint32_t> order;

    explicit BrandesWorkspace(std::size_t n) : dist(n, -1), sigma(n, 0.0), delta(n, 0.0) { order.reserve(n); }

    void accumulate(const YearGraph& g, std::size_t source, std::vector<double>& acc, double scale) {
        order.clear();
        dist[source] = 0;
        sigma[source] = 1.0;
        order.push_back(static_cast<std::uint32_t>(source));
        for (std::size_t head = 0; head < order.size(); ++head) {
            const auto v = order[head];
            for (auto u : g.neighbors(v)) {
                if (dist[u] < 0) {
                    dist[u] = dist[v] + 1;
                    order.push_back(u);
                }
                if (dist[u] == dist[v] + 1) sigma[u] += sigma[v];
            }
        }
        for (std::size_t p = order.size(); p-- > 0;) {
            const auto w = order[p];
            for (auto v : g.neighbors(w)) {
                if (dist[v] == dist[w] - 1) delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
            }
            if (w != source) acc[w] += scale * delta[w];
        }
        for (auto v : order) {
            dist[v] = -1;
            sigma[v] = 0.0;
            delta[v] = 0.0;
        }
    }
};

std::vector<double> brandes_over(const YearGraph& g, const std::vector<std::size_t>& sources, double scale) {
    const std::size_t n = g.node_count();
    constexpr std::size_t kBlocks = 16;
    const std::size_t blocks = std::min(kBlocks, std::max<std::size_t>(sources.size(), 1));
    std::vector<std::vector<double>> partial(blocks);
    parallel_for(blocks, [&](std::size_t b) {
        partial[b].assign(n, 0.0);
        BrandesWorkspace ws(n);
        const std::size_t lo = sources.size() * b / blocks, hi = sources.size() * (b + 1) / blocks;
        for (std::size_t s = lo; s < hi; ++s) ws.accumulate(g, sources[s], partial[b], scale);
    });
    std::vector<double> out(n, 0.0);
    for (const auto& p : partial) {
        for (std::size_t v = 0; v < n; ++v) out[v] += p[v];
    }
    for (auto& v : out) v *= 0.5;  // undirected: each pair seen from both ends
    return out;
}

}  // namespace

std::vector<double> betweenness(const YearGraph& g) {
    std::vector<std::size_t> sources(g.node_count());
    std::iota(sources.begin(), sources.end(), 0);
    return brandes_over(g, sources, 1.0);
}

std::vector<double> betweenness_sampled(const YearGraph& g, std::size_t pivots, std::uint64_t seed) {
    const std::size_t n = g.node_count();
    if (pivots == 0 || pivots >= n) return betweenness(g);
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), 0);
    Rng rng(seed);
    rng.shuffle(all);
    all.resize(pivots);
    std::sort(all.begin(), all.end());
    return brandes_over(g, all, static_cast<double>(n) / static_cast<double>(pivots));
}

std::optional<double> CentralityScores::value(std::string_view id) const {
    auto it = index.find(std::string(id));
    if (it == index.end()) return std::nullopt;
    return values[it->second];
}

CentralityScores centrality_scores(const YearGraph& g, const Corpus& corpus, const CorpusWindow& window,
                                   const CentralityOptions& options) {
    CentralityScores s;
    s.year = g.year();
    s.node_ids = g.node_ids();
    const bool sample = options.allow_sampling && g.node_count() > options.sampling_threshold;
    s.values = sample ? betweenness_sampled(g, options.pivots, options.seed) : betweenness(g);
    for (std::size_t v = 0; v < s.node_ids.size(); ++v) s.index.emplace(s.node_ids[v], v);
    auto& cohort = s.cohorts[window.year];
    for (auto i : window.cohort) cohort.push_back(corpus[i].id);
    return s;
}

void write_edge_list(std::ostream& out, const YearGraph& g) {
    std::vector<std::pair<std::string, std::string>> lines;
    lines.reserve(g.edge_count());
    for (auto [u, v] : g.edges()) {
        const auto& a = g.id(u);
        const auto& b = g.id(v);
        lines.emplace_back(std::min(a, b), std::max(a, b));
    }
    std::sort(lines.begin(), lines.end());
    for (const auto& [a, b] : lines) out << csv_field(a) << ',' << csv_field(b) << '\n';
}

YearGraph read_edge_list(std::istream& in, int year) {
    std::set<std::string> ids;
    std::vector<std::pair<std::string, std::string>> pairs;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto f = split_csv_line(line);
        if (f.size() != 2) throw DataError("edge list line must have two fields: " + line);
        ids.insert(f[0]);
        ids.insert(f[1]);
        pairs.emplace_back(std::move(f[0]), std::move(f[1]));
    }
    std::vector<std::string> nodes(ids.begin(), ids.end());
    std::unordered_map<std::string, std::uint32_t> pos;
    for (std::size_t i = 0; i < nodes.size(); ++i) pos.emplace(nodes[i], static_cast<std::uint32_t>(i));
    std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
    for (const auto& [a, b] : pairs) edges.emplace_back(pos[a], pos[b]);
    return YearGraph(year, std::move(nodes), edges);
}

void write_communities_csv(std::ostream& out, const YearGraph& g, const CommunityAssignment& c) {
    out << "node_id,community\n";
    for (std::size_t v = 0; v < g.node_count(); ++v) out << csv_field(g.id(v)) << ',' << c.community[v] << '\n';
}

void write_centrality_csv(std::ostream& out, const CentralityScores& c) {
    out << "node_id,betweenness\n";
    for (std::size_t v = 0; v < c.node_ids.size(); ++v) {
        out << csv_field(c.node_ids[v]) << ',' << format_float(c.values[v]) << '\n';
    }
}

}  // namespace vesper
