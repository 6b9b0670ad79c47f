#pragma once

#include "vesper/clusterer.hpp"
#include "vesper/events.hpp"
#include "vesper/scoring.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace vesper {

struct FeatureRow {
    int cluster_id = 0;
    int year = 0;
    double n_strong = 0;
    double n_weak = 0;
    double mean_id_text_strong = 0.0;
    double mean_id_net_strong = 0.0;
    double mean_id_net_weak = 0.0;  // 0 when imputed
    bool weak_imputed = false;
    int label = 0;  // 1 = split/merge at t+1, 0 = continuation/death

    double get(const std::string& feature) const;
};

/// year, n_strong, n_weak, mean_id_text_strong, mean_id_net_strong, mean_id_net_weak
const std::vector<std::string>& default_features();

struct FeatureOptions {
    /// Average the language score over strong and weak members (requires
    /// weak members to carry id_text).
    bool text_includes_weak = false;
};

struct FeatureBuild {
    std::vector<FeatureRow> rows;
    std::vector<std::string> warnings;
};

/// One row per cluster of year t from the t -> t+1 transition. `scores` are
/// aligned with the model's rows.
FeatureBuild build_features(int year, const ClusterModel& model, const std::vector<InterdisciplinarityScore>& scores,
                            const Transition& transition, const FeatureOptions& options = {});

/// x[i] holds row i's values in `names` order.
struct Dataset {
    std::vector<std::string> names;
    std::vector<std::vector<double>> x;
    std::vector<int> y;

    std::size_t size() const { return y.size(); }
};

Dataset to_dataset(const std::vector<FeatureRow>& rows, const std::vector<std::string>& features);

struct MarginalEffects {
    std::vector<std::string> names;
    std::vector<double> ame, se, z, p;
};

struct LogitFit {
    std::vector<std::string> names;  // "const" first, then features
    std::vector<double> beta, se, z, p;
    MarginalEffects effects;
    double log_likelihood = 0.0;
    double null_log_likelihood = 0.0;
    double pseudo_r2 = 0.0;
    bool converged = false;
    int iterations = 0;
    bool standardized = false;
    std::vector<double> center, scale;  // per feature; identity when not standardized
    std::vector<std::vector<double>> covariance;

    /// P(y = 1) for a row of raw feature values.
    double probability(std::span<const double> raw) const;
};

struct LogitOptions {
    int max_iterations = 100;
    double tolerance = 1e-10;    // |delta log-likelihood|
    double divergence = 50.0;    // any |beta| beyond this signals separation
};

/// Binary logit by Newton-Raphson with step halving; covariance from the
/// inverse observed information. Intercept always included.
LogitFit fit_logit(const Dataset& data, bool standardize, const LogitOptions& options = {});

/// AME_j = mean_i p_i (1 - p_i) beta_j with delta-method standard errors,
/// in the fit's (possibly standardized) units.
MarginalEffects marginal_effects(const LogitFit& fit, const Dataset& data);

/// Log-likelihood at beta (in the fit's design units) for checks.
double logit_log_likelihood(const LogitFit& fit, const Dataset& data, std::span<const double> beta);

struct FeatureSignificance {
    std::string name;
    double coef_p = 1.0;
    double ame_p = 1.0;
};

/// Retains features with coefficient p < alpha or AME p < alpha.
std::vector<std::string> select_features(const std::vector<FeatureSignificance>& table, double alpha = 0.05);

struct SelectionResult {
    std::vector<std::string> selected;
    LogitFit initial;  // all features, unstandardized
    LogitFit final;    // retained features, standardized
};

SelectionResult purposeful_selection(const std::vector<FeatureRow>& rows, const std::vector<std::string>& features,
                                     double alpha = 0.05, const LogitOptions& options = {});

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;  // fraction of class 1 at the node
};

struct Tree {
    std::vector<TreeNode> nodes;
    double probability(std::span<const double> x) const;
};

struct ForestOptions {
    int n_trees = 100;
    int max_features = 0;  // 0 -> ceil(sqrt(d))
    int min_samples_split = 2;
};

struct ForestFit {
    std::vector<std::string> names;
    std::vector<Tree> trees;
    std::vector<double> importances;
    std::uint64_t seed = 0;

    double probability(std::span<const double> x) const;
    int predict(std::span<const double> x) const { return probability(x) > 0.5 ? 1 : 0; }
};

/// CART trees on bootstrap resamples with Gini impurity; features are
/// visited in name order so the fit does not depend on column order.
ForestFit fit_forest(const Dataset& data, std::uint64_t seed, const ForestOptions& options = {});

struct Metrics {
    double micro_f1 = 0.0;
    double f1_class0 = 0.0;
    double f1_class1 = 0.0;
    long confusion[2][2] = {{0, 0}, {0, 0}};  // [true][predicted]
};

Metrics evaluate(const std::vector<int>& y_true, const std::vector<int>& y_pred);

struct YearSplit {
    std::vector<FeatureRow> train;
    std::vector<FeatureRow> test;
};

YearSplit split_by_year(const std::vector<FeatureRow>& rows, const std::set<int>& train_years, int test_year);

void write_features_csv(std::ostream& out, const std::vector<FeatureRow>& rows);
std::vector<FeatureRow> read_features_csv(std::istream& in);

struct Prediction {
    int cluster_id = 0;
    int year = 0;
    int predicted = 0;
    double probability = 0.0;
};

void write_predictions_csv(std::ostream& out, const std::vector<Prediction>& predictions);

/// JSON report: logit tables (coefficient, P, effect, P), forest Gini
/// importances and test metrics.
std::string fit_report_json(const SelectionResult* selection, const ForestFit* forest, const Metrics* logit_metrics,
                            const Metrics* forest_metrics);

}  // namespace vesper
