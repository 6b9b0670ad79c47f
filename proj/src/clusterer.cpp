#include "vesper/clusterer.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <numeric>

namespace vesper {

int ClusterModel::effective_label(std::size_t i) const {
    if (labels[i] != kWeak) return labels[i];
    return weak_assignment.empty() ? kWeak : weak_assignment[i];
}

namespace {

struct LinkageRow {
    std::size_t left, right;
    double distance;
    std::size_t size;
};

struct CondensedRow {
    std::size_t parent;  // cluster index, 0 = root
    std::size_t child;   // point index, or cluster index when child_is_cluster
    bool child_is_cluster;
    double lambda;
    std::size_t child_size;
};

std::vector<double> core_distances(const Matrix& x, int min_samples) {
    const std::size_t n = x.rows;
    std::vector<double> core(n, 0.0);
    if (min_samples <= 1) return core;
    const std::size_t rank = std::min<std::size_t>(static_cast<std::size_t>(min_samples) - 2, n - 2);
    parallel_for(n, [&](std::size_t i) {
        std::vector<double> d;
        d.reserve(n - 1);
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i) d.push_back(euclidean(x.row(i), x.row(j)));
        }
        std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(rank), d.end());
        core[i] = d[rank];
    });
    return core;
}

struct MstEdge {
    std::size_t u, v;
    double w;
};

std::vector<MstEdge> mutual_reachability_mst(const Matrix& x, const std::vector<double>& core) {
    const std::size_t n = x.rows;
    std::vector<MstEdge> edges;
    edges.reserve(n - 1);
    std::vector<char> in_tree(n, 0);
    std::vector<double> best(n, std::numeric_limits<double>::infinity());
    std::vector<std::size_t> from(n, 0);
    std::size_t current = 0;
    in_tree[0] = 1;
    for (std::size_t step = 1; step < n; ++step) {
        std::size_t next = n;
        double next_w = std::numeric_limits<double>::infinity();
        for (std::size_t v = 0; v < n; ++v) {
            if (in_tree[v]) continue;
            const double mrd = std::max({core[current], core[v], euclidean(x.row(current), x.row(v))});
            if (mrd < best[v]) {
                best[v] = mrd;
                from[v] = current;
            }
            if (best[v] < next_w) {
                next_w = best[v];
                next = v;
            }
        }
        in_tree[next] = 1;
        edges.push_back({from[next], next, next_w});
        current = next;
    }
    return edges;
}

std::vector<LinkageRow> single_linkage(std::vector<MstEdge> edges, std::size_t n) {
    std::stable_sort(edges.begin(), edges.end(), [](const MstEdge& a, const MstEdge& b) { return a.w < b.w; });
    std::vector<std::size_t> parent(2 * n - 1), size(2 * n - 1, 1);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](std::size_t a) {
        while (parent[a] != a) {
            parent[a] = parent[parent[a]];
            a = parent[a];
        }
        return a;
    };
    std::vector<LinkageRow> rows;
    rows.reserve(n - 1);
    std::size_t next = n;
    for (const auto& e : edges) {
        const std::size_t a = find(e.u), b = find(e.v);
        rows.push_back({a, b, e.w, size[a] + size[b]});
        parent[a] = parent[b] = next;
        size[next] = size[a] + size[b];
        ++next;
    }
    return rows;
}

std::vector<CondensedRow> condense(const std::vector<LinkageRow>& link, std::size_t n, std::size_t min_size,
                                   std::size_t& n_clusters) {
    const std::size_t root = 2 * n - 2;
    double min_positive = std::numeric_limits<double>::infinity();
    for (const auto& r : link) {
        if (r.distance > 0.0) min_positive = std::min(min_positive, r.distance);
    }
    const double zero_lambda = std::isfinite(min_positive) ? 2.0 / min_positive : 1.0;
    auto node_size = [&](std::size_t v) { return v < n ? std::size_t{1} : link[v - n].size; };
    auto leaves_of = [&](std::size_t v, std::vector<std::size_t>& out) {
        std::vector<std::size_t> stack{v};
        while (!stack.empty()) {
            const std::size_t u = stack.back();
            stack.pop_back();
            if (u < n) {
                out.push_back(u);
            } else {
                stack.push_back(link[u - n].right);
                stack.push_back(link[u - n].left);
            }
        }
    };

    std::vector<CondensedRow> rows;
    std::vector<std::size_t> relabel(2 * n - 1, 0);
    std::vector<char> ignore(2 * n - 1, 0);
    std::size_t next_label = 1;
    std::deque<std::size_t> queue{root};
    std::vector<std::size_t> pts;
    while (!queue.empty()) {
        const std::size_t node = queue.front();
        queue.pop_front();
        if (node < n || ignore[node]) continue;
        const auto& r = link[node - n];
        queue.push_back(r.left);
        queue.push_back(r.right);
        const double lambda = r.distance > 0.0 ? 1.0 / r.distance : zero_lambda;
        const std::size_t ls = node_size(r.left), rs = node_size(r.right);
        auto fall_out = [&](std::size_t sub) {
            pts.clear();
            leaves_of(sub, pts);
            for (auto p : pts) rows.push_back({relabel[node], p, false, lambda, 1});
            // mark whole subtree ignored
            std::vector<std::size_t> stack{sub};
            while (!stack.empty()) {
                const std::size_t u = stack.back();
                stack.pop_back();
                ignore[u] = 1;
                if (u >= n) {
                    stack.push_back(link[u - n].left);
                    stack.push_back(link[u - n].right);
                }
            }
        };
        if (ls >= min_size && rs >= min_size) {
            relabel[r.left] = next_label++;
            rows.push_back({relabel[node], relabel[r.left], true, lambda, ls});
            relabel[r.right] = next_label++;
            rows.push_back({relabel[node], relabel[r.right], true, lambda, rs});
        } else if (ls < min_size && rs < min_size) {
            fall_out(r.left);
            fall_out(r.right);
        } else if (ls < min_size) {
            relabel[r.right] = relabel[node];
            fall_out(r.left);
        } else {
            relabel[r.left] = relabel[node];
            fall_out(r.right);
        }
    }
    n_clusters = next_label;
    return rows;
}

}  // namespace

ClusterModel cluster(const Matrix& x, const HdbscanParams& params) {
    if (params.min_cluster_size < 2) throw ConfigError("min_cluster_size must be >= 2");
    if (params.min_samples < 1) throw ConfigError("min_samples must be >= 1");
    if (!x.all_finite()) throw DataError("cluster: non-finite input");
    const std::size_t n = x.rows;
    ClusterModel model;
    model.labels.assign(n, kWeak);
    model.outlier_scores.assign(n, 0.0);
    model.strength.assign(n, 0.0);
    if (n < static_cast<std::size_t>(params.min_cluster_size) || n < 2) {
        model.degenerate = true;
        return model;
    }

    const auto core = core_distances(x, params.min_samples);
    const auto link = single_linkage(mutual_reachability_mst(x, core), n);
    std::size_t n_tree_clusters = 0;
    const auto rows = condense(link, n, static_cast<std::size_t>(params.min_cluster_size), n_tree_clusters);

    // Tree bookkeeping per condensed cluster.
    std::vector<double> birth(n_tree_clusters, 0.0), stability(n_tree_clusters, 0.0);
    std::vector<double> direct_max(n_tree_clusters, 0.0);
    std::vector<std::size_t> tree_parent(n_tree_clusters, 0);
    std::vector<std::vector<std::size_t>> children(n_tree_clusters);
    std::vector<std::size_t> point_parent(n, 0);
    std::vector<double> point_lambda(n, 0.0);
    double global_max_lambda = 0.0;
    for (const auto& r : rows) {
        if (r.child_is_cluster) {
            birth[r.child] = r.lambda;
            tree_parent[r.child] = r.parent;
            children[r.parent].push_back(r.child);
        } else {
            point_parent[r.child] = r.parent;
            point_lambda[r.child] = r.lambda;
        }
        direct_max[r.parent] = std::max(direct_max[r.parent], r.lambda);
        global_max_lambda = std::max(global_max_lambda, r.lambda);
    }
    for (const auto& r : rows) stability[r.parent] += (r.lambda - birth[r.parent]) * static_cast<double>(r.child_size);

    // Excess of mass; children always carry larger indices than parents.
    const std::vector<double> own_stability = stability;
    std::vector<char> selected(n_tree_clusters, 1);
    selected[0] = 0;
    for (std::size_t c = n_tree_clusters; c-- > 1;) {
        double child_sum = 0.0;
        for (auto ch : children[c]) child_sum += stability[ch];
        if (child_sum > stability[c]) {
            selected[c] = 0;
            stability[c] = child_sum;
        } else {
            std::vector<std::size_t> stack(children[c].begin(), children[c].end());
            while (!stack.empty()) {
                const auto u = stack.back();
                stack.pop_back();
                selected[u] = 0;
                stack.insert(stack.end(), children[u].begin(), children[u].end());
            }
        }
    }

    std::vector<int> cluster_id(n_tree_clusters, kWeak);
    std::vector<std::size_t> tree_of_cluster;
    for (std::size_t c = 1; c < n_tree_clusters; ++c) {
        if (selected[c]) {
            cluster_id[c] = static_cast<int>(tree_of_cluster.size());
            tree_of_cluster.push_back(c);
        }
    }
    // Selected ancestor-or-self per tree cluster (top-down order is index order).
    std::vector<int> owner(n_tree_clusters, kWeak);
    for (std::size_t c = 1; c < n_tree_clusters; ++c) {
        owner[c] = selected[c] ? cluster_id[c] : owner[tree_parent[c]];
    }

    model.n_clusters = static_cast<int>(tree_of_cluster.size());
    if (model.n_clusters == 0) {
        model.degenerate = true;
    }

    // GLOSH: deaths propagated bottom-up.
    std::vector<double> deaths = direct_max;
    for (std::size_t c = n_tree_clusters; c-- > 1;) {
        deaths[tree_parent[c]] = std::max(deaths[tree_parent[c]], deaths[c]);
    }
    for (std::size_t i = 0; i < n; ++i) {
        const double dmax = deaths[point_parent[i]];
        model.outlier_scores[i] = dmax > 0.0 ? (dmax - point_lambda[i]) / dmax : 0.0;
        model.labels[i] = owner[point_parent[i]];
        if (model.labels[i] != kWeak) {
            const double m = direct_max[tree_of_cluster[static_cast<std::size_t>(model.labels[i])]];
            model.strength[i] = m > 0.0 && std::isfinite(m) ? std::min(point_lambda[i], m) / m : 1.0;
        }
    }

    // Exemplars: max-lambda points of each leaf cluster under a selected cluster.
    model.exemplars.resize(tree_of_cluster.size());
    model.persistence.resize(tree_of_cluster.size());
    std::vector<std::size_t> cluster_sizes(tree_of_cluster.size(), 0);
    for (int l : model.labels) {
        if (l != kWeak) ++cluster_sizes[static_cast<std::size_t>(l)];
    }
    for (std::size_t k = 0; k < tree_of_cluster.size(); ++k) {
        std::vector<std::size_t> leaves, stack{tree_of_cluster[k]};
        while (!stack.empty()) {
            const auto u = stack.back();
            stack.pop_back();
            if (children[u].empty()) leaves.push_back(u);
            stack.insert(stack.end(), children[u].begin(), children[u].end());
        }
        std::sort(leaves.begin(), leaves.end());
        for (auto leaf : leaves) {
            for (std::size_t i = 0; i < n; ++i) {
                if (point_parent[i] == leaf && point_lambda[i] == direct_max[leaf]) model.exemplars[k].push_back(i);
            }
        }
        std::sort(model.exemplars[k].begin(), model.exemplars[k].end());
        const double denom = static_cast<double>(cluster_sizes[k]) * global_max_lambda;
        model.persistence[k] = (denom > 0.0 && std::isfinite(denom)) ? own_stability[tree_of_cluster[k]] / denom : 1.0;
    }
    return model;
}

void soft_membership(ClusterModel& model, const Matrix& x) {
    if (model.degenerate || model.n_clusters < 1) {
        throw DataError("soft membership requires a non-degenerate cluster model");
    }
    if (x.rows != model.size()) throw DataError("soft membership: point count mismatch");
    const std::size_t n = model.size(), k = static_cast<std::size_t>(model.n_clusters);
    model.membership.assign(n * k, 0.0);
    model.weak_mass.assign(n, 0.0);
    parallel_for(n, [&](std::size_t i) {
        const double p_wm = std::clamp(model.outlier_scores[i], 0.0, 0.99);
        model.weak_mass[i] = p_wm;
        std::vector<double> dist(k, std::numeric_limits<double>::infinity());
        for (std::size_t c = 0; c < k; ++c) {
            for (auto e : model.exemplars[c]) dist[c] = std::min(dist[c], euclidean(x.row(i), x.row(e)));
        }
        double* row = &model.membership[i * k];
        const auto zeros = static_cast<std::size_t>(std::count(dist.begin(), dist.end(), 0.0));
        if (zeros > 0) {
            for (std::size_t c = 0; c < k; ++c) row[c] = dist[c] == 0.0 ? (1.0 - p_wm) / static_cast<double>(zeros) : 0.0;
        } else {
            double total = 0.0;
            for (std::size_t c = 0; c < k; ++c) total += 1.0 / (dist[c] + 1e-12);
            for (std::size_t c = 0; c < k; ++c) row[c] = (1.0 - p_wm) * (1.0 / (dist[c] + 1e-12)) / total;
        }
        if (model.labels[i] != kWeak) {
            const auto own = static_cast<std::size_t>(model.labels[i]);
            const auto top = static_cast<std::size_t>(std::max_element(row, row + k) - row);
            if (row[own] < row[top]) std::swap(row[own], row[top]);
        }
    });
}

void assign_weak(ClusterModel& model, const Matrix& emb) {
    const std::size_t n = model.size();
    if (emb.rows != n) throw DataError("assign_weak: embedding rows do not match the model");
    model.weak_assignment.assign(n, kWeak);
    model.strong_centroids.clear();
    if (model.n_clusters < 1) return;
    const std::size_t k = static_cast<std::size_t>(model.n_clusters);
    model.strong_centroids.assign(k, std::vector<double>(emb.cols, 0.0));
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
        if (model.labels[i] == kWeak) continue;
        const auto c = static_cast<std::size_t>(model.labels[i]);
        ++counts[c];
        const auto r = emb.row(i);
        for (std::size_t d = 0; d < emb.cols; ++d) model.strong_centroids[c][d] += r[d];
    }
    for (std::size_t c = 0; c < k; ++c) {
        for (auto& v : model.strong_centroids[c]) v /= static_cast<double>(std::max<std::size_t>(counts[c], 1));
    }
    std::vector<double> point(emb.cols);
    for (std::size_t i = 0; i < n; ++i) {
        if (model.labels[i] != kWeak) {
            model.weak_assignment[i] = model.labels[i];
            continue;
        }
        const auto r = emb.row(i);
        std::copy(r.begin(), r.end(), point.begin());
        double best = -std::numeric_limits<double>::infinity();
        int arg = 0;
        for (std::size_t c = 0; c < k; ++c) {
            const double cs = cosine(std::span<const double>(point), std::span<const double>(model.strong_centroids[c]));
            if (std::isfinite(cs) && cs > best) {
                best = cs;
                arg = static_cast<int>(c);
            }
        }
        model.weak_assignment[i] = arg;
    }
}

double dbcv(const ClusterModel& model, const Matrix& x) {
    if (model.n_clusters < 2) throw DataError("insufficient clusters for validity");
    const std::size_t k = static_cast<std::size_t>(model.n_clusters);
    std::vector<std::vector<std::size_t>> members(k);
    for (std::size_t i = 0; i < model.size(); ++i) {
        if (model.labels[i] != kWeak) members[static_cast<std::size_t>(model.labels[i])].push_back(i);
    }
    for (const auto& m : members) {
        if (m.size() < 2) throw DataError("insufficient clusters for validity: cluster with fewer than 2 members");
    }
    const double dim = static_cast<double>(x.cols);

    // all-points core distance, evaluated in log space
    std::vector<double> core(model.size(), 0.0);
    for (const auto& m : members) {
        for (auto i : m) {
            double max_term = -std::numeric_limits<double>::infinity();
            std::vector<double> terms;
            terms.reserve(m.size() - 1);
            bool zero = false;
            for (auto j : m) {
                if (j == i) continue;
                const double d = euclidean(x.row(i), x.row(j));
                if (d == 0.0) {
                    zero = true;
                    break;
                }
                terms.push_back(-dim * std::log(d));
                max_term = std::max(max_term, terms.back());
            }
            if (zero) {
                core[i] = 0.0;
                continue;
            }
            double s = 0.0;
            for (double t : terms) s += std::exp(t - max_term);
            const double log_mean = max_term + std::log(s) - std::log(static_cast<double>(m.size() - 1));
            core[i] = std::exp(-log_mean / dim);
        }
    }
    auto mrd = [&](std::size_t a, std::size_t b) { return std::max({core[a], core[b], euclidean(x.row(a), x.row(b))}); };

    std::vector<double> sparseness(k, 0.0);
    std::vector<std::vector<std::size_t>> internal(k);
    for (std::size_t c = 0; c < k; ++c) {
        const auto& m = members[c];
        const std::size_t s = m.size();
        std::vector<char> in_tree(s, 0);
        std::vector<double> best(s, std::numeric_limits<double>::infinity());
        std::vector<std::size_t> from(s, 0), degree(s, 0);
        std::vector<MstEdge> edges;
        std::size_t cur = 0;
        in_tree[0] = 1;
        for (std::size_t step = 1; step < s; ++step) {
            std::size_t next = s;
            double nw = std::numeric_limits<double>::infinity();
            for (std::size_t v = 0; v < s; ++v) {
                if (in_tree[v]) continue;
                const double w = mrd(m[cur], m[v]);
                if (w < best[v]) {
                    best[v] = w;
                    from[v] = cur;
                }
                if (best[v] < nw) {
                    nw = best[v];
                    next = v;
                }
            }
            in_tree[next] = 1;
            edges.push_back({from[next], next, nw});
            ++degree[from[next]];
            ++degree[next];
            cur = next;
        }
        for (std::size_t v = 0; v < s; ++v) {
            if (degree[v] > 1) internal[c].push_back(m[v]);
        }
        double dsc = -1.0;
        for (const auto& e : edges) {
            if (degree[e.u] > 1 && degree[e.v] > 1) dsc = std::max(dsc, e.w);
        }
        if (dsc < 0.0) {
            for (const auto& e : edges) dsc = std::max(dsc, e.w);
        }
        sparseness[c] = dsc;
        if (internal[c].empty()) internal[c] = m;
    }

    double total = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
        double separation = std::numeric_limits<double>::infinity();
        for (std::size_t o = 0; o < k; ++o) {
            if (o == c) continue;
            for (auto a : internal[c]) {
                for (auto b : internal[o]) separation = std::min(separation, mrd(a, b));
            }
        }
        const double denom = std::max(separation, sparseness[c]);
        const double v = denom > 0.0 ? (separation - sparseness[c]) / denom : 0.0;
        total += static_cast<double>(members[c].size()) * v;
    }
    return total / static_cast<double>(model.size());
}

double adjusted_rand_index(std::span<const int> a, std::span<const int> b) {
    if (a.size() != b.size()) throw DataError("adjusted_rand_index: length mismatch");
    std::map<std::pair<int, int>, double> table;
    std::map<int, double> ra, rb;
    for (std::size_t i = 0; i < a.size(); ++i) {
        table[{a[i], b[i]}] += 1.0;
        ra[a[i]] += 1.0;
        rb[b[i]] += 1.0;
    }
    auto choose2 = [](double v) { return v * (v - 1.0) / 2.0; };
    double index = 0.0, sa = 0.0, sb = 0.0;
    for (const auto& [key, v] : table) index += choose2(v);
    for (const auto& [key, v] : ra) sa += choose2(v);
    for (const auto& [key, v] : rb) sb += choose2(v);
    const double total = choose2(static_cast<double>(a.size()));
    if (total == 0.0) return 1.0;
    const double expected = sa * sb / total;
    const double max_index = 0.5 * (sa + sb);
    if (max_index == expected) return 1.0;
    return (index - expected) / (max_index - expected);
}

std::string model_to_json(const ClusterModel& m) {
    nlohmann::json j;
    j["labels"] = m.labels;
    j["n_clusters"] = m.n_clusters;
    j["degenerate"] = m.degenerate;
    j["membership"] = m.membership;
    j["weak_mass"] = m.weak_mass;
    j["exemplars"] = m.exemplars;
    j["persistence"] = m.persistence;
    j["outlier_scores"] = m.outlier_scores;
    j["strength"] = m.strength;
    j["dbcv"] = m.dbcv ? nlohmann::json(*m.dbcv) : nlohmann::json(nullptr);
    j["weak_assignment"] = m.weak_assignment;
    j["strong_centroids"] = m.strong_centroids;
    return j.dump();
}

ClusterModel model_from_json(const std::string& text) {
    try {
        const auto j = nlohmann::json::parse(text);
        ClusterModel m;
        m.labels = j.at("labels").get<std::vector<int>>();
        m.n_clusters = j.at("n_clusters").get<int>();
        m.degenerate = j.at("degenerate").get<bool>();
        m.membership = j.at("membership").get<std::vector<double>>();
        m.weak_mass = j.at("weak_mass").get<std::vector<double>>();
        m.exemplars = j.at("exemplars").get<std::vector<std::vector<std::size_t>>>();
        m.persistence = j.at("persistence").get<std::vector<double>>();
        m.outlier_scores = j.at("outlier_scores").get<std::vector<double>>();
        m.strength = j.at("strength").get<std::vector<double>>();
        if (!j.at("dbcv").is_null()) m.dbcv = j["dbcv"].get<double>();
        m.weak_assignment = j.at("weak_assignment").get<std::vector<int>>();
        m.strong_centroids = j.at("strong_centroids").get<std::vector<std::vector<double>>>();
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed cluster model: ") + e.what());
    }
}

double band_penalty(double mean_n, double low, double high) {
    if (mean_n < low) return (low - mean_n) / low;
    if (mean_n > high) return (mean_n - high) / high;
    return 0.0;
}

double tune_objective(const TuneCriteria& c, double band_low, double band_high) {
    return c.mean_dbcv - c.std_dbcv - c.std_n_clusters + c.mean_persistence -
           band_penalty(c.mean_n_clusters, band_low, band_high);
}

namespace {

std::pair<double, double> mean_std(const std::vector<double>& v) {
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return {mean, std::sqrt(ss / static_cast<double>(v.size()))};
}

int draw(Rng& rng, std::pair<int, int> r) {
    return r.first + static_cast<int>(rng.index(static_cast<std::size_t>(r.second - r.first + 1)));
}

}  // namespace

TuneResult tune(const Matrix& emb, const TuneSpace& space, int budget, int repeats, std::uint64_t seed) {
    if (budget < 1) throw ConfigError("tune budget must be >= 1");
    if (repeats < 2) throw ConfigError("tune repeats must be >= 2");
    Rng rng(seed);
    TuneResult result;
    for (int c = 0; c < budget; ++c) {
        TuneCandidate cand;
        cand.reducer.mode = space.mode;
        cand.reducer.n_epochs = space.n_epochs;
        cand.reducer.n_neighbors = draw(rng, space.n_neighbors);
        cand.reducer.min_dist = rng.uniform(space.min_dist.first, space.min_dist.second);
        cand.reducer.target_dims = draw(rng, space.target_dims);
        if (space.mode == ReduceMode::passthrough) cand.reducer.target_dims = static_cast<int>(emb.cols);
        cand.clusterer.min_cluster_size = draw(rng, space.min_cluster_size);
        cand.clusterer.min_samples = draw(rng, space.min_samples);
        result.candidates.push_back(cand);
    }

    for (std::size_t c = 0; c < result.candidates.size(); ++c) {
        auto& cand = result.candidates[c];
        std::vector<double> dbcvs, counts, persist;
        for (int r = 0; r < repeats; ++r) {
            ReducerConfig cfg = cand.reducer;
            cfg.seed = mix_seed(seed, c * 1000003ULL + static_cast<std::uint64_t>(r));
            const Matrix reduced = reduce(emb, cfg);
            const ClusterModel model = cluster(reduced, cand.clusterer);
            cand.n_clusters_per_run.push_back(model.n_clusters);
            if (model.n_clusters == 0) cand.degenerate = true;
            counts.push_back(model.n_clusters);
            double v = -1.0;
            try {
                if (model.n_clusters >= 2) v = dbcv(model, reduced);
            } catch (const DataError&) {
                v = -1.0;
            }
            dbcvs.push_back(v);
            persist.push_back(model.persistence.empty()
                                  ? 0.0
                                  : std::accumulate(model.persistence.begin(), model.persistence.end(), 0.0) /
                                        static_cast<double>(model.persistence.size()));
        }
        std::tie(cand.criteria.mean_dbcv, cand.criteria.std_dbcv) = mean_std(dbcvs);
        std::tie(cand.criteria.mean_n_clusters, cand.criteria.std_n_clusters) = mean_std(counts);
        cand.criteria.mean_persistence = mean_std(persist).first;
        cand.objective = tune_objective(cand.criteria, space.band_low, space.band_high);
    }

    bool any = false;
    for (std::size_t c = 0; c < result.candidates.size(); ++c) {
        const auto& cand = result.candidates[c];
        if (cand.degenerate) continue;
        if (!any || cand.objective > result.candidates[result.best].objective) result.best = c;
        any = true;
    }
    if (!any) {
        std::string msg = "all tuning candidates are degenerate:";
        for (std::size_t c = 0; c < result.candidates.size(); ++c) {
            const auto& cr = result.candidates[c].criteria;
            msg += "\n  candidate " + std::to_string(c) + ": mean_dbcv=" + std::to_string(cr.mean_dbcv) +
                   " std_dbcv=" + std::to_string(cr.std_dbcv) + " mean_n=" + std::to_string(cr.mean_n_clusters) +
                   " std_n=" + std::to_string(cr.std_n_clusters) +
                   " mean_persistence=" + std::to_string(cr.mean_persistence);
        }
        throw DataError(msg);
    }
    return result;
}

}  // namespace vesper
