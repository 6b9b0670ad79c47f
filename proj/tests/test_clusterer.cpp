#include <doctest.h>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "vesper/clusterer.hpp"

#include <cmath>
#include <limits>
#include <numeric>

using namespace vesper;

namespace {

using fixture::two_blobs_noise;

ClusterModel fit(const Matrix& x, HdbscanParams params = {}) {
    auto m = cluster(x, params);
    if (!m.degenerate) soft_membership(m, x);
    return m;
}

// DBCV straight from its definition.
double dbcv_oracle(const std::vector<int>& labels, const Matrix& x) {
    const double dim = double(x.cols);
    std::map<int, std::vector<std::size_t>> members;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] >= 0) members[labels[i]].push_back(i);
    }
    std::vector<double> core(labels.size(), 0.0);
    for (auto& [c, m] : members) {
        for (auto i : m) {
            double s = 0;
            for (auto j : m) {
                if (j != i) s += std::pow(1.0 / euclidean(x.row(i), x.row(j)), dim);
            }
            core[i] = std::pow(s / double(m.size() - 1), -1.0 / dim);
        }
    }
    auto mrd = [&](std::size_t a, std::size_t b) { return std::max({core[a], core[b], euclidean(x.row(a), x.row(b))}); };
    std::map<int, double> dsc;
    std::map<int, std::vector<std::size_t>> internal;
    for (auto& [c, m] : members) {
        // Naive Prim from the first member. Mutual reachability weights tie
        // often, so the tree follows a fixed rule: the earliest tree vertex
        // wins, then the lowest index.
        struct E {
            std::size_t a, b;
            double w;
        };
        std::vector<E> tree;
        std::vector<int> degree(m.size(), 0);
        std::vector<std::size_t> order{0};
        std::vector<char> in(m.size(), 0);
        in[0] = 1;
        while (order.size() < m.size()) {
            E best{0, 0, std::numeric_limits<double>::infinity()};
            for (std::size_t v = 0; v < m.size(); ++v) {
                if (in[v]) continue;
                for (auto u : order) {
                    const double w = mrd(m[u], m[v]);
                    if (w < best.w) best = {u, v, w};
                }
            }
            in[best.b] = 1;
            order.push_back(best.b);
            tree.push_back(best);
            ++degree[best.a];
            ++degree[best.b];
        }
        double d = -1;
        for (const auto& e : tree) {
            if (degree[e.a] > 1 && degree[e.b] > 1) d = std::max(d, e.w);
        }
        if (d < 0) {
            for (const auto& e : tree) d = std::max(d, e.w);
        }
        dsc[c] = d;
        for (std::size_t i = 0; i < m.size(); ++i) {
            if (degree[i] > 1) internal[c].push_back(m[i]);
        }
        if (internal[c].empty()) internal[c] = m;
    }
    double total = 0;
    for (auto& [c, m] : members) {
        double sep = std::numeric_limits<double>::infinity();
        for (auto& [o, om] : members) {
            if (o == c) continue;
            for (auto a : internal[c]) {
                for (auto b : internal[o]) sep = std::min(sep, mrd(a, b));
            }
        }
        total += double(m.size()) * (sep - dsc[c]) / std::max(sep, dsc[c]);
    }
    return total / double(labels.size());
}

}  // namespace

TEST_SUITE("clusterer") {

TEST_CASE("two blobs with noise") {
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        auto p = two_blobs_noise(seed);
        auto m = fit(p.x);
        CHECK(m.n_clusters == 2);
        CHECK(oracle::ari(p.labels, m.labels) >= 0.95);
        int noise_weak = 0;
        for (std::size_t i = 300; i < 330; ++i) noise_weak += m.is_weak(i) ? 1 : 0;
        CHECK(noise_weak > 15);
    }
}

TEST_CASE("size guard") {
    Matrix x(5, 2);
    for (std::size_t i = 0; i < 5; ++i) x(i, 0) = float(i);
    auto m = cluster(x, {});
    CHECK(m.degenerate);
    CHECK(m.n_clusters == 0);
    for (int l : m.labels) CHECK(l == kWeak);
}

TEST_CASE("duplicating every point keeps the cluster count") {
    auto small = fixture::blobs({{0, 0}, {8, 0}, {0, 8}}, 40, 1.0, 11);
    auto twice = fixture::append(small, small);
    HdbscanParams p{10, 5};
    CHECK(cluster(small, p).n_clusters == 3);
    CHECK(cluster(twice, p).n_clusters == 3);
}

TEST_CASE("membership rows") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        auto p = two_blobs_noise(seed);
        auto m = fit(p.x);
        REQUIRE(m.n_clusters >= 1);
        for (std::size_t i = 0; i < m.size(); ++i) {
            const auto row = m.membership_row(i);
            const double s = std::accumulate(row.begin(), row.end(), m.weak_mass[i]);
            CHECK(std::abs(s - 1.0) <= 1e-9);
            CHECK(m.weak_mass[i] >= 0.0);
            CHECK(m.weak_mass[i] <= 0.99);
            if (!m.is_weak(i)) {
                const auto top = std::max_element(row.begin(), row.end()) - row.begin();
                CHECK(top == m.labels[i]);
            }
        }
    }
}

TEST_CASE("exemplar dominance") {
    auto p = two_blobs_noise(4);
    auto m = fit(p.x);
    REQUIRE(m.n_clusters == 2);
    const auto e = m.exemplars[0].front();
    CHECK(m.membership_row(e)[0] == doctest::Approx(1.0 - m.weak_mass[e]).epsilon(1e-12));
    CHECK(m.membership_row(e)[1] == 0.0);
}

TEST_CASE("equidistant point splits evenly") {
    auto left = fixture::blobs({{-6.0, 0.0}}, 120, 1.0, 5);
    Matrix x(241, 2);
    for (std::size_t i = 0; i < 120; ++i) {
        x(i, 0) = left(i, 0);
        x(i, 1) = left(i, 1);
        x(120 + i, 0) = -left(i, 0);
        x(120 + i, 1) = left(i, 1);
    }
    auto m = fit(x);
    REQUIRE(m.n_clusters == 2);
    const auto row = m.membership_row(240);
    CHECK(row[0] == doctest::Approx(row[1]).epsilon(1e-12));
}

TEST_CASE("weak assignment") {
    ClusterModel m;
    m.labels = {0, 1, kWeak, kWeak};
    m.n_clusters = 2;
    Matrix e(4, 2);
    e(0, 0) = 1;
    e(1, 1) = 1;
    e(2, 0) = 1;  // equals centroid A
    e(3, 0) = 2;  // tie between the two centroids
    e(3, 1) = 2;
    assign_weak(m, e);
    CHECK(m.weak_assignment[2] == 0);
    CHECK(m.weak_assignment[3] == 0);
    CHECK(m.weak_assignment[0] == 0);
    CHECK(m.weak_assignment[1] == 1);
}

TEST_CASE("weak assignment matches a brute-force scan") {
    std::mt19937_64 g(3);
    std::normal_distribution<double> n;
    const std::size_t rows = 200, dims = 16, k = 5;
    ClusterModel m;
    m.n_clusters = int(k);
    Matrix e(rows, dims);
    for (std::size_t i = 0; i < rows; ++i) {
        m.labels.push_back(i < 100 ? int(i % k) : kWeak);
        for (std::size_t j = 0; j < dims; ++j) e(i, j) = float(n(g) + (i < 100 ? (i % k == j ? 3.0 : 0.0) : 0.0));
    }
    assign_weak(m, e);
    std::vector<std::vector<double>> cent(k, std::vector<double>(dims, 0.0));
    for (std::size_t i = 0; i < 100; ++i) {
        for (std::size_t j = 0; j < dims; ++j) cent[i % k][j] += e(i, j) / 20.0;
    }
    for (std::size_t i = 100; i < rows; ++i) {
        int best = 0;
        double bv = -2;
        for (std::size_t c = 0; c < k; ++c) {
            double dot = 0, na = 0, nb = 0;
            for (std::size_t j = 0; j < dims; ++j) {
                dot += e(i, j) * cent[c][j];
                na += double(e(i, j)) * e(i, j);
                nb += cent[c][j] * cent[c][j];
            }
            const double cs = dot / std::sqrt(na * nb);
            if (cs > bv) {
                bv = cs;
                best = int(c);
            }
        }
        CHECK(m.weak_assignment[i] == best);
    }
}

TEST_CASE("dbcv") {
    std::vector<int> labels;
    auto far = fixture::blobs({{0, 0}, {20, 0}}, 15, 1.0, 8, &labels);
    auto near = fixture::blobs({{0, 0}, {1, 0}}, 15, 1.0, 8);
    ClusterModel m;
    m.labels = labels;
    m.n_clusters = 2;
    const double a = dbcv(m, far), b = dbcv(m, near);
    CHECK(a == doctest::Approx(dbcv_oracle(labels, far)).epsilon(1e-9));
    CHECK(b == doctest::Approx(dbcv_oracle(labels, near)).epsilon(1e-9));
    CHECK(a > b);

    std::mt19937_64 g(2);
    for (int trial = 0; trial < 20; ++trial) {
        Matrix x(24, 3);
        std::vector<int> l;
        std::uniform_real_distribution<double> u(-5, 5);
        for (std::size_t i = 0; i < 24; ++i) {
            for (std::size_t j = 0; j < 3; ++j) x(i, j) = float(u(g));
            l.push_back(i < 3 ? kWeak : int(i % 3));
        }
        ClusterModel r;
        r.labels = l;
        r.n_clusters = 3;
        const double v = dbcv(r, x);
        CHECK(v >= -1.0);
        CHECK(v <= 1.0);
        CHECK(v == doctest::Approx(dbcv_oracle(l, x)).epsilon(1e-9));
    }
    m.labels.assign(30, 0);
    m.n_clusters = 1;
    CHECK_THROWS_AS(dbcv(m, far), DataError);
}

TEST_CASE("model json round trip") {
    auto p = two_blobs_noise(2);
    auto m = fit(p.x);
    assign_weak(m, p.x);
    m.dbcv = dbcv(m, p.x);
    auto back = model_from_json(model_to_json(m));
    CHECK(back.labels == m.labels);
    CHECK(back.membership == m.membership);
    CHECK(back.strong_centroids == m.strong_centroids);
    CHECK(*back.dbcv == *m.dbcv);
}

TEST_CASE("tuning") {
    std::vector<std::vector<double>> centers(4, std::vector<double>(8, 0.0));
    for (int c = 0; c < 4; ++c) centers[c][c] = 12.0;
    auto x = fixture::blobs(centers, 60, 1.0, 3);
    TuneSpace space;
    space.n_epochs = 100;
    space.target_dims = {2, 4};
    space.n_neighbors = {10, 20};
    space.min_cluster_size = {10, 30};
    space.band_low = 2;
    space.band_high = 8;

    auto one = tune(x, space, 1, 2, 5);
    CHECK(one.candidates.size() == 1);
    CHECK(one.best == 0);
    CHECK(one.winner().n_clusters_per_run.size() == 2);

    auto a = tune(x, space, 4, 2, 9);
    auto b = tune(x, space, 4, 2, 9);
    CHECK(a.best == b.best);
    CHECK(a.winner().objective == b.winner().objective);
    for (int n : a.winner().n_clusters_per_run) {
        CHECK(n >= 3);
        CHECK(n <= 5);
    }
    CHECK_THROWS_AS(tune(x, space, 0, 2, 1), ConfigError);
}

}  // TEST_SUITE clusterer
