#pragma once

#include "vesper/common.hpp"
#include "vesper/reducer.hpp"

#include <optional>
#include <string>
#include <vector>

namespace vesper {

inline constexpr int kWeak = -1;

struct HdbscanParams {
    int min_cluster_size = 15;
    int min_samples = 15;
};

/// Per-year clustering result. Cluster ids are 0..n_clusters-1; points the
/// density hierarchy cannot place carry kWeak ("weak members").
struct ClusterModel {
    std::vector<int> labels;
    int n_clusters = 0;
    bool degenerate = false;

    /// n x n_clusters cluster probabilities, row-major; empty until
    /// soft_membership() has run.
    std::vector<double> membership;
    std::vector<double> weak_mass;  // P_wm per point

    std::vector<std::vector<std::size_t>> exemplars;
    std::vector<double> persistence;
    std::vector<double> outlier_scores;  // GLOSH in [0, 1]
    std::vector<double> strength;        // lambda-based membership strength
    std::optional<double> dbcv;

    /// Weak points mapped to their most similar cluster (kWeak if N == 0).
    std::vector<int> weak_assignment;
    /// Per-cluster means over strong members in the full embedding space.
    std::vector<std::vector<double>> strong_centroids;

    std::size_t size() const { return labels.size(); }
    bool is_weak(std::size_t i) const { return labels[i] == kWeak; }
    /// Hard label for strong points, the assigned cluster for weak points.
    int effective_label(std::size_t i) const;
    std::span<const double> membership_row(std::size_t i) const {
        return {membership.data() + i * static_cast<std::size_t>(n_clusters), static_cast<std::size_t>(n_clusters)};
    }
};

/// HDBSCAN: mutual reachability with core distance at min_samples (self
/// counted), Prim MST, condensed tree at min_cluster_size, excess-of-mass
/// selection without the root. Fills labels, exemplars, persistence,
/// outlier_scores and strength.
ClusterModel cluster(const Matrix& points, const HdbscanParams& params);

/// Soft membership rows: P_wm = GLOSH clipped to [0, 0.99]; the remaining
/// mass is split over clusters proportionally to 1 / (d_ik + 1e-12) with
/// d_ik the distance to the nearest exemplar of cluster k. Exact-zero
/// distances share the mass uniformly. Strong members have their own
/// cluster's entry exchanged with the row maximum if it is not already the
/// maximum, so hard and soft labels agree.
void soft_membership(ClusterModel& model, const Matrix& points);

/// Computes strong-member centroids over `embeddings` and maps each weak
/// point to the centroid with the highest cosine (lowest id on ties).
void assign_weak(ClusterModel& model, const Matrix& embeddings);

/// Density-based cluster validity in [-1, 1]. Requires >= 2 clusters with
/// >= 2 members each; throws DataError otherwise.
double dbcv(const ClusterModel& model, const Matrix& points);

/// Adjusted Rand index between two labelings (kWeak is treated as a label).
double adjusted_rand_index(std::span<const int> a, std::span<const int> b);

std::string model_to_json(const ClusterModel& model);
ClusterModel model_from_json(const std::string& text);

// ---- tuning ----------------------------------------------------------------

struct TuneSpace {
    std::pair<int, int> n_neighbors{10, 50};
    std::pair<double, double> min_dist{0.0, 0.5};
    std::pair<int, int> target_dims{5, 15};
    std::pair<int, int> min_cluster_size{10, 50};
    std::pair<int, int> min_samples{5, 30};
    ReduceMode mode = ReduceMode::umap;
    int n_epochs = 200;
    /// Mean cluster counts outside [band_low, band_high] are penalized.
    double band_low = 10.0;
    double band_high = 150.0;
};

struct TuneCriteria {
    double mean_dbcv = 0.0;
    double std_dbcv = 0.0;
    double mean_n_clusters = 0.0;
    double std_n_clusters = 0.0;
    double mean_persistence = 0.0;
};

struct TuneCandidate {
    ReducerConfig reducer;
    HdbscanParams clusterer;
    TuneCriteria criteria;
    std::vector<int> n_clusters_per_run;
    double objective = 0.0;
    bool degenerate = false;
};

struct TuneResult {
    std::size_t best = 0;
    std::vector<TuneCandidate> candidates;

    const TuneCandidate& winner() const { return candidates[best]; }
};

double band_penalty(double mean_n_clusters, double low, double high);
double tune_objective(const TuneCriteria& c, double band_low, double band_high);

/// Seeded random search; each candidate is run `repeats` times with derived
/// reducer seeds. Throws DataError when every candidate is degenerate.
TuneResult tune(const Matrix& embeddings, const TuneSpace& space, int budget, int repeats, std::uint64_t seed);

}  // namespace vesper
