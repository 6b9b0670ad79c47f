#include "vesper/scoring.hpp"

#include "vesper/csv.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

namespace vesper {

double population_std(std::span<const double> v) {
    if (v.empty()) return 0.0;
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(v.size()));
}

double language_id(std::span<const double> p, double weak_mass) {
    const std::size_t n = p.size();
    if (n < 2) throw DataError("language_id requires at least 2 clusters");
    constexpr double kTol = 1e-9;
    if (!(weak_mass >= -kTol && weak_mass <= 1.0 + kTol)) throw DataError("language_id: weak mass outside [0, 1]");
    double sum = weak_mass;
    for (double v : p) {
        if (!(v >= -kTol)) throw DataError("language_id: negative cluster probability");
        sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-6) throw DataError("language_id: probabilities do not sum to 1");
    const double nn = static_cast<double>(n);
    const double top = *std::max_element(p.begin(), p.end());
    const double score = nn / (nn - 1.0) * (1.0 - weak_mass - top) * (1.0 - population_std(p));
    return std::clamp(score, 0.0, 1.0);
}

std::unordered_map<std::string, double> network_id(const CentralityScores& scores,
                                                   const std::vector<std::string>& cohort) {
    std::unordered_map<std::string, double> out;
    double top = 0.0;
    for (const auto& id : cohort) {
        auto v = scores.value(id);
        if (!v) throw DataError("paper " + id + " has no centrality value");
        top = std::max(top, *v);
    }
    for (const auto& id : cohort) out[id] = top > 0.0 ? *scores.value(id) / top : 0.0;
    return out;
}

std::vector<InterdisciplinarityScore> score_year(int year, const std::vector<std::string>& paper_ids,
                                                 const ClusterModel& model, const CentralityScores& centrality,
                                                 const ScoringOptions& options) {
    if (paper_ids.size() != model.size()) throw DataError("score_year: ids do not match the cluster model");
    const auto net = network_id(centrality, paper_ids);
    const bool have_membership = !model.membership.empty();
    std::vector<InterdisciplinarityScore> out;
    out.reserve(paper_ids.size());
    for (std::size_t i = 0; i < paper_ids.size(); ++i) {
        InterdisciplinarityScore s;
        s.paper_id = paper_ids[i];
        s.year = year;
        s.is_weak = model.is_weak(i);
        s.cluster_id = model.effective_label(i);
        s.id_network = net.at(paper_ids[i]);
        if (have_membership) {
            const auto row = model.membership_row(i);
            s.sigma_p = population_std(row);
            if ((!s.is_weak || options.weak_text) && model.n_clusters >= 2) {
                if (options.scope == ClusterCountScope::per_year) {
                    s.id_text = language_id(row, model.weak_mass[i]);
                } else {
                    // Pad with zero-probability clusters from the other years.
                    std::vector<double> padded(row.begin(), row.end());
                    padded.resize(std::max<std::size_t>(padded.size(),
                                                         static_cast<std::size_t>(options.all_years_cluster_count)),
                                  0.0);
                    s.id_text = language_id(padded, model.weak_mass[i]);
                    s.sigma_p = population_std(padded);
                }
            }
        }
        out.push_back(std::move(s));
    }
    return out;
}

void write_scores_csv(std::ostream& out, const std::vector<InterdisciplinarityScore>& scores) {
    out << "paper_id,year,cluster_id,is_weak,id_text,id_network\n";
    for (const auto& s : scores) {
        out << csv_field(s.paper_id) << ',' << s.year << ',' << s.cluster_id << ',' << (s.is_weak ? 1 : 0) << ','
            << format_float(s.id_text) << ',' << format_float(s.id_network) << '\n';
    }
}

}  // namespace vesper
