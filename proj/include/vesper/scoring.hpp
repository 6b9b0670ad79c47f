#pragma once

#include "vesper/clusterer.hpp"
#include "vesper/graph.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace vesper {

/// Language-based interdisciplinarity of a strong member:
///
///   ID_text = N/(N-1) * (1 - P_wm - max_k P_k) * (1 - sigma_p)
///
/// where sigma_p is the population standard deviation of the N cluster
/// probabilities. Requires N >= 2 and a row that sums to 1 with P_wm.
double language_id(std::span<const double> cluster_probs, double weak_mass);

/// Population standard deviation (divide by N).
double population_std(std::span<const double> v);

/// Network interdisciplinarity of each cohort paper: its betweenness
/// divided by the maximum over the cohort (all zero when that maximum is 0).
/// Throws DataError when a cohort paper has no centrality value.
std::unordered_map<std::string, double> network_id(const CentralityScores& scores,
                                                   const std::vector<std::string>& cohort);

struct InterdisciplinarityScore {
    std::string paper_id;
    int year = 0;
    int cluster_id = kWeak;  // effective cluster (weak members: assigned cluster)
    bool is_weak = false;
    std::optional<double> id_text;  // strong members only
    double id_network = 0.0;
    double sigma_p = 0.0;
};

enum class ClusterCountScope { per_year, all_years };

struct ScoringOptions {
    /// N in the language score: clusters of the producing model (per_year)
    /// or `all_years_cluster_count` (all_years).
    ClusterCountScope scope = ClusterCountScope::per_year;
    int all_years_cluster_count = 0;
    /// Also score weak members' language ID (for the inclusive feature variant).
    bool weak_text = false;
};

/// Scores one year's cohort. `paper_ids` are aligned with the model's rows.
std::vector<InterdisciplinarityScore> score_year(int year, const std::vector<std::string>& paper_ids,
                                                 const ClusterModel& model, const CentralityScores& centrality,
                                                 const ScoringOptions& options = {});

void write_scores_csv(std::ostream& out, const std::vector<InterdisciplinarityScore>& scores);

}  // namespace vesper
