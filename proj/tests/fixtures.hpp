#pragma once

#include "vesper/common.hpp"

#include <random>
#include <vector>

namespace fixture {

// Gaussian blobs around the given centers; labels follow the center index.
inline vesper::Matrix blobs(const std::vector<std::vector<double>>& centers, int per_blob, double sigma,
                            std::uint64_t seed, std::vector<int>* labels = nullptr) {
    const std::size_t d = centers.front().size();
    vesper::Matrix m(centers.size() * static_cast<std::size_t>(per_blob), d);
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> n(0.0, sigma);
    std::size_t r = 0;
    for (std::size_t c = 0; c < centers.size(); ++c) {
        for (int i = 0; i < per_blob; ++i, ++r) {
            for (std::size_t j = 0; j < d; ++j) m(r, j) = static_cast<float>(centers[c][j] + n(gen));
            if (labels) labels->push_back(static_cast<int>(c));
        }
    }
    return m;
}

inline vesper::Matrix append(const vesper::Matrix& a, const vesper::Matrix& b) {
    vesper::Matrix m(a.rows + b.rows, a.cols);
    std::copy(a.data.begin(), a.data.end(), m.data.begin());
    std::copy(b.data.begin(), b.data.end(), m.data.begin() + static_cast<std::ptrdiff_t>(a.data.size()));
    return m;
}

inline std::vector<std::vector<double>> rows(const vesper::Matrix& m) {
    std::vector<std::vector<double>> out(m.rows, std::vector<double>(m.cols));
    for (std::size_t i = 0; i < m.rows; ++i) {
        for (std::size_t j = 0; j < m.cols; ++j) out[i][j] = m(i, j);
    }
    return out;
}

struct Planted {
    vesper::Matrix x;
    std::vector<int> labels;  // -1 for noise
};

// Two 10-sigma separated 2-D blobs of 150 points plus 30 uniform noise points
// spread over a box reaching 25 sigma around the pair.
inline Planted two_blobs_noise(std::uint64_t seed) {
    Planted p;
    auto core = blobs({{0.0, 0.0}, {10.0, 0.0}}, 150, 1.0, seed, &p.labels);
    vesper::Matrix noise(30, 2);
    std::mt19937_64 g(seed ^ 0xabcdef);
    std::uniform_real_distribution<double> ux(-20.0, 30.0), uy(-25.0, 25.0);
    for (std::size_t i = 0; i < 30; ++i) {
        noise(i, 0) = float(ux(g));
        noise(i, 1) = float(uy(g));
        p.labels.push_back(-1);
    }
    p.x = append(core, noise);
    return p;
}

}  // namespace fixture
