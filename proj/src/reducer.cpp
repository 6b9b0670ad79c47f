#include "vesper/reducer.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace vesper {

ReduceMode parse_reduce_mode(const std::string& s) {
    if (s == "umap") return ReduceMode::umap;
    if (s == "pca") return ReduceMode::pca;
    if (s == "passthrough") return ReduceMode::passthrough;
    throw ConfigError("unknown reducer mode \"" + s + "\"");
}

std::string to_string(ReduceMode m) {
    switch (m) {
        case ReduceMode::umap: return "umap";
        case ReduceMode::pca: return "pca";
        case ReduceMode::passthrough: return "passthrough";
    }
    return "?";
}

void ReducerConfig::validate(std::size_t input_rows, std::size_t input_dims) const {
    if (mode == ReduceMode::passthrough) {
        if (static_cast<std::size_t>(target_dims) != input_dims) {
            throw ConfigError("passthrough reducer requires target_dims == input dims (" +
                              std::to_string(input_dims) + ")");
        }
        return;
    }
    if (target_dims < 2) throw ConfigError("target_dims must be >= 2");
    if (static_cast<std::size_t>(target_dims) > input_dims) {
        throw ConfigError("target_dims " + std::to_string(target_dims) + " exceeds input dims " +
                          std::to_string(input_dims));
    }
    if (mode == ReduceMode::umap) {
        if (n_neighbors < 2) throw ConfigError("n_neighbors must be >= 2");
        if (!(min_dist >= 0.0 && min_dist < 1.0)) throw ConfigError("min_dist must lie in [0, 1)");
        if (n_epochs < 1) throw ConfigError("n_epochs must be >= 1");
        if (input_rows <= static_cast<std::size_t>(n_neighbors)) {
            throw DataError("umap needs more rows (" + std::to_string(input_rows) + ") than n_neighbors (" +
                            std::to_string(n_neighbors) + ")");
        }
    } else if (input_rows < 2) {
        throw DataError("pca needs at least 2 rows");
    }
}

namespace {

using Candidate = std::pair<float, std::uint32_t>;  // (distance, index); lexicographic order

void sort_rows(NeighborGraph& g, std::size_t n) {
    std::vector<Candidate> row(g.k);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < g.k; ++j) row[j] = {g.distance[i * g.k + j], g.index[i * g.k + j]};
        std::sort(row.begin(), row.end());
        for (std::size_t j = 0; j < g.k; ++j) {
            g.distance[i * g.k + j] = row[j].first;
            g.index[i * g.k + j] = row[j].second;
        }
    }
}

}  // namespace

NeighborGraph exact_knn(const Matrix& x, std::size_t k) {
    const std::size_t n = x.rows;
    if (k > n) throw DataError("k exceeds number of points");
    NeighborGraph g;
    g.k = k;
    g.index.resize(n * k);
    g.distance.resize(n * k);
    parallel_for(n, [&](std::size_t i) {
        std::vector<Candidate> all(n);
        const auto xi = x.row(i);
        for (std::size_t j = 0; j < n; ++j) {
            all[j] = {static_cast<float>(std::sqrt(squared_distance(xi, x.row(j)))), static_cast<std::uint32_t>(j)};
        }
        std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end());
        for (std::size_t j = 0; j < k; ++j) {
            g.distance[i * k + j] = all[j].first;
            g.index[i * k + j] = all[j].second;
        }
    });
    return g;
}

NeighborGraph approximate_knn(const Matrix& x, std::size_t k, std::uint64_t seed, int max_iters) {
    const std::size_t n = x.rows;
    if (k > n) throw DataError("k exceeds number of points");
    auto dist = [&](std::size_t a, std::size_t b) {
        return static_cast<float>(std::sqrt(squared_distance(x.row(a), x.row(b))));
    };
    // Each list holds k entries sorted ascending; self is seeded at distance 0.
    std::vector<std::vector<Candidate>> lists(n);
    Rng rng(seed);
    for (std::size_t i = 0; i < n; ++i) {
        auto& l = lists[i];
        l.push_back({0.0f, static_cast<std::uint32_t>(i)});
        while (l.size() < k) {
            const auto j = static_cast<std::uint32_t>(rng.index(n));
            if (std::none_of(l.begin(), l.end(), [&](const Candidate& c) { return c.second == j; })) {
                l.push_back({dist(i, j), j});
            }
        }
        std::sort(l.begin(), l.end());
    }
    auto try_insert = [&](std::size_t i, std::uint32_t j) {
        auto& l = lists[i];
        const float d = dist(i, j);
        const Candidate c{d, j};
        if (!(c < l.back())) return false;
        if (std::any_of(l.begin(), l.end(), [&](const Candidate& e) { return e.second == j; })) return false;
        l.back() = c;
        for (std::size_t p = l.size() - 1; p > 0 && l[p] < l[p - 1]; --p) std::swap(l[p], l[p - 1]);
        return true;
    };
    for (int iter = 0; iter < max_iters; ++iter) {
        std::vector<std::vector<std::uint32_t>> reverse(n);
        for (std::size_t i = 0; i < n; ++i) {
            for (const auto& c : lists[i]) {
                if (c.second != i) reverse[c.second].push_back(static_cast<std::uint32_t>(i));
            }
        }
        std::size_t updates = 0;
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<std::uint32_t> pool;
            for (const auto& c : lists[i]) pool.push_back(c.second);
            const std::size_t cap = std::min(reverse[i].size(), k);
            pool.insert(pool.end(), reverse[i].begin(), reverse[i].begin() + static_cast<std::ptrdiff_t>(cap));
            for (auto j : pool) {
                if (j == i) continue;
                for (const auto& c : lists[j]) {
                    if (c.second != i && try_insert(i, c.second)) ++updates;
                }
            }
        }
        if (static_cast<double>(updates) < 0.001 * static_cast<double>(n * k)) break;
    }
    NeighborGraph g;
    g.k = k;
    g.index.resize(n * k);
    g.distance.resize(n * k);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
            g.distance[i * k + j] = lists[i][j].first;
            g.index[i * k + j] = lists[i][j].second;
        }
    }
    sort_rows(g, n);
    return g;
}

std::vector<FuzzyEdge> fuzzy_simplicial_set(const NeighborGraph& knn, std::size_t n) {
    const std::size_t k = knn.k;
    const double target = std::log2(static_cast<double>(k));
    double global_mean = 0.0;
    for (float d : knn.distance) global_mean += d;
    global_mean /= std::max<std::size_t>(1, knn.distance.size());

    struct Directed {
        std::uint32_t i, j;
        double forward, backward;
    };
    std::vector<Directed> entries;
    entries.reserve(2 * n * k);
    for (std::size_t i = 0; i < n; ++i) {
        const float* d = &knn.distance[i * k];
        const std::uint32_t* idx = &knn.index[i * k];
        double rho = 0.0, row_mean = 0.0;
        bool have_rho = false;
        for (std::size_t j = 0; j < k; ++j) {
            row_mean += d[j];
            if (!have_rho && idx[j] != i && d[j] > 0.0f) {
                rho = d[j];
                have_rho = true;
            }
        }
        row_mean /= static_cast<double>(k);

        double lo = 0.0, hi = std::numeric_limits<double>::infinity(), sigma = 1.0;
        for (int it = 0; it < 64; ++it) {
            double psum = 0.0;
            for (std::size_t j = 0; j < k; ++j) {
                if (idx[j] == i) continue;
                const double gap = d[j] - rho;
                psum += gap > 0.0 ? std::exp(-gap / sigma) : 1.0;
            }
            if (std::abs(psum - target) < 1e-5) break;
            if (psum > target) {
                hi = sigma;
                sigma = 0.5 * (lo + hi);
            } else {
                lo = sigma;
                sigma = std::isinf(hi) ? sigma * 2.0 : 0.5 * (lo + hi);
            }
        }
        sigma = std::max(sigma, 1e-3 * (rho > 0.0 ? row_mean : global_mean));

        for (std::size_t j = 0; j < k; ++j) {
            if (idx[j] == i) continue;
            const double gap = d[j] - rho;
            const double w = gap > 0.0 ? std::exp(-gap / sigma) : 1.0;
            entries.push_back({static_cast<std::uint32_t>(i), idx[j], w, 0.0});
            entries.push_back({idx[j], static_cast<std::uint32_t>(i), 0.0, w});
        }
    }
    std::sort(entries.begin(), entries.end(), [](const Directed& a, const Directed& b) {
        return a.i != b.i ? a.i < b.i : a.j < b.j;
    });
    std::vector<FuzzyEdge> edges;
    for (std::size_t p = 0; p < entries.size();) {
        double f = 0.0, b = 0.0;
        std::size_t q = p;
        for (; q < entries.size() && entries[q].i == entries[p].i && entries[q].j == entries[p].j; ++q) {
            f = std::max(f, entries[q].forward);
            b = std::max(b, entries[q].backward);
        }
        const double w = f + b - f * b;
        if (w > 0.0) edges.push_back({entries[p].i, entries[p].j, static_cast<float>(w)});
        p = q;
    }
    return edges;
}

std::pair<double, double> fit_ab(double min_dist, double spread) {
    constexpr int kSamples = 300;
    std::vector<double> xs(kSamples), ys(kSamples);
    for (int s = 0; s < kSamples; ++s) {
        xs[s] = 3.0 * spread * s / (kSamples - 1);
        ys[s] = xs[s] < min_dist ? 1.0 : std::exp(-(xs[s] - min_dist) / spread);
    }
    auto residuals = [&](double a, double b, Eigen::VectorXd& r, Eigen::MatrixXd* jac) {
        r.resize(kSamples);
        if (jac) jac->resize(kSamples, 2);
        for (int s = 0; s < kSamples; ++s) {
            const double x = xs[s];
            const double p = x > 0.0 ? std::pow(x, 2.0 * b) : 0.0;
            const double denom = 1.0 + a * p;
            r(s) = 1.0 / denom - ys[s];
            if (jac) {
                (*jac)(s, 0) = -p / (denom * denom);
                (*jac)(s, 1) = x > 0.0 ? -a * p * 2.0 * std::log(x) / (denom * denom) : 0.0;
            }
        }
    };
    double a = 1.5, b = 0.9, lambda = 1e-3;
    Eigen::VectorXd r;
    Eigen::MatrixXd J;
    residuals(a, b, r, &J);
    double cost = r.squaredNorm();
    for (int it = 0; it < 200; ++it) {
        const Eigen::Matrix2d jtj = J.transpose() * J;
        const Eigen::Vector2d g = J.transpose() * r;
        Eigen::Matrix2d damped = jtj;
        damped(0, 0) *= 1.0 + lambda;
        damped(1, 1) *= 1.0 + lambda;
        const Eigen::Vector2d step = damped.ldlt().solve(-g);
        const double na = a + step(0), nb = b + step(1);
        if (na <= 0.0 || nb <= 0.0) {
            lambda *= 10.0;
            continue;
        }
        Eigen::VectorXd nr;
        residuals(na, nb, nr, nullptr);
        const double ncost = nr.squaredNorm();
        if (ncost < cost) {
            a = na;
            b = nb;
            const bool done = cost - ncost < 1e-14;
            cost = ncost;
            residuals(a, b, r, &J);
            lambda = std::max(lambda * 0.3, 1e-12);
            if (done) break;
        } else {
            lambda *= 10.0;
            if (lambda > 1e12) break;
        }
    }
    return {a, b};
}

Matrix pca(const Matrix& x, int target_dims) {
    const auto n = static_cast<Eigen::Index>(x.rows), d = static_cast<Eigen::Index>(x.cols);
    Eigen::MatrixXd m(n, d);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < d; ++j) m(i, j) = x(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
    }
    m.rowwise() -= m.colwise().mean();
    const Eigen::MatrixXd cov = (m.transpose() * m) / std::max<double>(1.0, static_cast<double>(n - 1));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    if (eig.info() != Eigen::Success) throw NumericalError("pca: eigendecomposition failed");
    Eigen::MatrixXd basis(d, target_dims);
    for (int c = 0; c < target_dims; ++c) {
        Eigen::VectorXd v = eig.eigenvectors().col(d - 1 - c);
        Eigen::Index arg;
        v.cwiseAbs().maxCoeff(&arg);
        if (v(arg) < 0) v = -v;
        basis.col(c) = v;
    }
    const Eigen::MatrixXd proj = m * basis;
    Matrix out(x.rows, static_cast<std::size_t>(target_dims));
    for (Eigen::Index i = 0; i < n; ++i) {
        for (int c = 0; c < target_dims; ++c) out(static_cast<std::size_t>(i), c) = static_cast<float>(proj(i, c));
    }
    return out;
}

namespace {

double clip(double v) { return std::clamp(v, -4.0, 4.0); }

Matrix umap(const Matrix& x, const ReducerConfig& cfg) {
    const std::size_t n = x.rows;
    const std::size_t dims = static_cast<std::size_t>(cfg.target_dims);
    const std::size_t k = static_cast<std::size_t>(cfg.n_neighbors);
    const NeighborGraph knn =
        n < cfg.exact_knn_limit ? exact_knn(x, k) : approximate_knn(x, k, mix_seed(cfg.seed, 1));
    std::vector<FuzzyEdge> edges = fuzzy_simplicial_set(knn, n);
    const auto [a, b] = fit_ab(cfg.min_dist);

    // Initial layout: leading principal components rescaled to [0, 10].
    Matrix init = pca(x, cfg.target_dims);
    std::vector<double> emb(n * dims);
    Rng rng(cfg.seed);
    for (std::size_t c = 0; c < dims; ++c) {
        float lo = std::numeric_limits<float>::max(), hi = std::numeric_limits<float>::lowest();
        for (std::size_t i = 0; i < n; ++i) {
            lo = std::min(lo, init(i, c));
            hi = std::max(hi, init(i, c));
        }
        const double span = hi > lo ? hi - lo : 1.0;
        for (std::size_t i = 0; i < n; ++i) emb[i * dims + c] = 10.0 * (init(i, c) - lo) / span;
    }
    for (auto& v : emb) v += 1e-4 * rng.normal();

    float w_max = 0.0f;
    for (const auto& e : edges) w_max = std::max(w_max, e.weight);
    const int n_epochs = cfg.n_epochs;
    std::erase_if(edges, [&](const FuzzyEdge& e) { return e.weight < w_max / static_cast<float>(n_epochs); });

    const std::size_t m = edges.size();
    std::vector<double> per_sample(m), next_sample(m), per_negative(m), next_negative(m);
    for (std::size_t e = 0; e < m; ++e) {
        per_sample[e] = static_cast<double>(w_max) / edges[e].weight;
        next_sample[e] = per_sample[e];
        per_negative[e] = per_sample[e] / cfg.negative_sample_rate;
        next_negative[e] = per_negative[e];
    }

    std::vector<double> grad(dims);
    for (int epoch = 0; epoch < n_epochs; ++epoch) {
        const double alpha = 1.0 - static_cast<double>(epoch) / n_epochs;
        for (std::size_t e = 0; e < m; ++e) {
            if (next_sample[e] > epoch) continue;
            double* cur = &emb[edges[e].head * dims];
            double* other = &emb[edges[e].tail * dims];
            double dsq = 0.0;
            for (std::size_t c = 0; c < dims; ++c) dsq += (cur[c] - other[c]) * (cur[c] - other[c]);
            if (dsq > 0.0) {
                const double coeff = -2.0 * a * b * std::pow(dsq, b - 1.0) / (a * std::pow(dsq, b) + 1.0);
                for (std::size_t c = 0; c < dims; ++c) {
                    const double g = clip(coeff * (cur[c] - other[c]));
                    cur[c] += g * alpha;
                    other[c] -= g * alpha;
                }
            }
            next_sample[e] += per_sample[e];

            const auto n_neg = static_cast<int>((epoch - next_negative[e]) / per_negative[e]);
            for (int s = 0; s < n_neg; ++s) {
                const std::size_t j = rng.index(n);
                if (j == edges[e].head) continue;
                const double* neg = &emb[j * dims];
                double nsq = 0.0;
                for (std::size_t c = 0; c < dims; ++c) nsq += (cur[c] - neg[c]) * (cur[c] - neg[c]);
                if (nsq > 0.0) {
                    const double coeff = 2.0 * b / ((0.001 + nsq) * (a * std::pow(nsq, b) + 1.0));
                    for (std::size_t c = 0; c < dims; ++c) cur[c] += clip(coeff * (cur[c] - neg[c])) * alpha;
                } else {
                    for (std::size_t c = 0; c < dims; ++c) cur[c] += 4.0 * alpha;
                }
            }
            next_negative[e] += n_neg * per_negative[e];
        }
    }

    Matrix out(n, dims);
    for (std::size_t i = 0; i < n * dims; ++i) out.data[i] = static_cast<float>(emb[i]);
    if (!out.all_finite()) throw NumericalError("umap layout produced non-finite coordinates");
    return out;
}

}  // namespace

Matrix reduce(const Matrix& x, const ReducerConfig& config) {
    if (!x.all_finite()) throw DataError("reduce: input contains non-finite values");
    config.validate(x.rows, x.cols);
    switch (config.mode) {
        case ReduceMode::passthrough: return x;
        case ReduceMode::pca: return pca(x, config.target_dims);
        case ReduceMode::umap: return umap(x, config);
    }
    throw ConfigError("unknown reducer mode");
}

}  // namespace vesper
