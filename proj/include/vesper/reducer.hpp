#pragma once

#include "vesper/common.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace vesper {

enum class ReduceMode { umap, pca, passthrough };

ReduceMode parse_reduce_mode(const std::string& s);
std::string to_string(ReduceMode m);

struct ReducerConfig {
    ReduceMode mode = ReduceMode::umap;
    int n_neighbors = 30;
    double min_dist = 0.1;
    int target_dims = 10;
    int n_epochs = 300;
    std::uint64_t seed = 42;
    /// Row count at or above which the neighbor graph switches to
    /// approximate search (NN-descent, recall target >= 0.9).
    std::size_t exact_knn_limit = 50000;
    int negative_sample_rate = 5;

    void validate(std::size_t input_rows, std::size_t input_dims) const;
};

/// k nearest neighbors per point, self included at position 0 when unique.
/// Sorted by (distance, index).
struct NeighborGraph {
    std::size_t k = 0;
    std::vector<std::uint32_t> index;  // n * k
    std::vector<float> distance;       // n * k
};

NeighborGraph exact_knn(const Matrix& x, std::size_t k);
/// NN-descent; deterministic for a fixed seed.
NeighborGraph approximate_knn(const Matrix& x, std::size_t k, std::uint64_t seed, int max_iters = 12);

struct FuzzyEdge {
    std::uint32_t head;
    std::uint32_t tail;
    float weight;
};

/// Smoothed local connectivity per point (rho = nearest nonzero distance,
/// sigma by bisection so the membership mass equals log2(k)) followed by
/// the fuzzy union a + b - ab. Returns edges sorted by (head, tail), both
/// directions present.
std::vector<FuzzyEdge> fuzzy_simplicial_set(const NeighborGraph& knn, std::size_t n_points);

/// Curve parameters (a, b) of 1 / (1 + a d^(2b)) fitted to the min_dist
/// offset exponential.
std::pair<double, double> fit_ab(double min_dist, double spread = 1.0);

Matrix pca(const Matrix& x, int target_dims);

Matrix reduce(const Matrix& x, const ReducerConfig& config);

}  // namespace vesper
