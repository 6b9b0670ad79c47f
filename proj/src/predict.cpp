#include "vesper/predict.hpp"

#include "vesper/csv.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>

namespace vesper {

double FeatureRow::get(const std::string& f) const {
    if (f == "year") return year;
    if (f == "n_strong") return n_strong;
    if (f == "n_weak") return n_weak;
    if (f == "mean_id_text_strong") return mean_id_text_strong;
    if (f == "mean_id_net_strong") return mean_id_net_strong;
    if (f == "mean_id_net_weak") return mean_id_net_weak;
    if (f == "weak_imputed") return weak_imputed ? 1.0 : 0.0;
    throw ConfigError("unknown feature \"" + f + "\"");
}

const std::vector<std::string>& default_features() {
    static const std::vector<std::string> f = {"year", "n_strong", "n_weak", "mean_id_text_strong",
                                               "mean_id_net_strong", "mean_id_net_weak"};
    return f;
}

FeatureBuild build_features(int year, const ClusterModel& model, const std::vector<InterdisciplinarityScore>& scores,
                            const Transition& transition, const FeatureOptions& options) {
    if (scores.size() != model.size()) throw DataError("build_features: scores do not match the cluster model");
    if (transition.earlier.size() != static_cast<std::size_t>(model.n_clusters)) {
        throw DataError("build_features: transition does not match the clusters of year " + std::to_string(year));
    }
    FeatureBuild out;
    for (int c = 0; c < model.n_clusters; ++c) {
        FeatureRow row;
        row.cluster_id = c;
        row.year = year;
        double text = 0.0, net_strong = 0.0, net_weak = 0.0;
        std::size_t text_n = 0;
        bool text_missing = false;
        for (std::size_t i = 0; i < model.size(); ++i) {
            if (model.effective_label(i) != c) continue;
            const auto& s = scores[i];
            const bool counts_text = !model.is_weak(i) || options.text_includes_weak;
            if (model.is_weak(i)) {
                row.n_weak += 1;
                net_weak += s.id_network;
            } else {
                row.n_strong += 1;
                net_strong += s.id_network;
            }
            if (counts_text) {
                if (s.id_text) {
                    text += *s.id_text;
                    ++text_n;
                } else {
                    text_missing = true;
                }
            }
        }
        const std::string where = "cluster " + std::to_string(c) + " of year " + std::to_string(year);
        if (row.n_strong == 0) {
            out.warnings.push_back(where + " has no strong members; dropped");
            continue;
        }
        if (text_missing || text_n == 0) {
            out.warnings.push_back(where + " lacks language scores; dropped");
            continue;
        }
        row.mean_id_text_strong = text / static_cast<double>(text_n);
        row.mean_id_net_strong = net_strong / row.n_strong;
        if (row.n_weak > 0) {
            row.mean_id_net_weak = net_weak / row.n_weak;
        } else {
            row.weak_imputed = true;
        }
        const auto& ev = transition.earlier[static_cast<std::size_t>(c)];
        row.label = ev.group == EventGroup::dynamic ? 1 : 0;
        out.rows.push_back(row);
    }
    return out;
}

Dataset to_dataset(const std::vector<FeatureRow>& rows, const std::vector<std::string>& features) {
    Dataset d;
    d.names = features;
    for (const auto& r : rows) {
        std::vector<double> x;
        x.reserve(features.size());
        for (const auto& f : features) x.push_back(r.get(f));
        d.x.push_back(std::move(x));
        d.y.push_back(r.label);
    }
    return d;
}

// ---- logit ----------------------------------------------------------------

namespace {

double sigmoid(double t) {
    if (t >= 0) return 1.0 / (1.0 + std::exp(-t));
    const double e = std::exp(t);
    return e / (1.0 + e);
}

double softplus(double t) { return t > 0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t)); }

Eigen::MatrixXd design(const Dataset& data, const std::vector<double>& center, const std::vector<double>& scale) {
    const auto n = static_cast<Eigen::Index>(data.size());
    const auto d = static_cast<Eigen::Index>(data.names.size());
    Eigen::MatrixXd X(n, d + 1);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& row = data.x[static_cast<std::size_t>(i)];
        if (row.size() != data.names.size()) throw DataError("dataset row width does not match its feature names");
        X(i, 0) = 1.0;
        for (Eigen::Index j = 0; j < d; ++j) {
            const auto k = static_cast<std::size_t>(j);
            X(i, j + 1) = (row[k] - center[k]) / scale[k];
        }
    }
    return X;
}

double log_likelihood(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& beta) {
    const Eigen::VectorXd eta = X * beta;
    double ll = 0.0;
    for (Eigen::Index i = 0; i < eta.size(); ++i) ll += y(i) * eta(i) - softplus(eta(i));
    return ll;
}

struct Information {
    Eigen::VectorXd gradient;
    Eigen::MatrixXd hessian;  // observed information (negative Hessian of ll)
    Eigen::VectorXd p;
};

Information information(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& beta) {
    Information r;
    const Eigen::VectorXd eta = X * beta;
    r.p = eta.unaryExpr([](double t) { return sigmoid(t); });
    r.gradient = X.transpose() * (y - r.p);
    const Eigen::VectorXd w = r.p.array() * (1.0 - r.p.array());
    r.hessian = X.transpose() * w.asDiagonal() * X;
    return r;
}

Eigen::LDLT<Eigen::MatrixXd> factor(const Eigen::MatrixXd& h) {
    Eigen::LDLT<Eigen::MatrixXd> ldlt(h);
    if (ldlt.info() != Eigen::Success || !(ldlt.rcond() > 1e-12) || !ldlt.isPositive()) {
        throw NumericalError("singular information matrix (collinear features?)");
    }
    return ldlt;
}

}  // namespace

double LogitFit::probability(std::span<const double> raw) const {
    if (raw.size() + 1 != beta.size()) throw DataError("logit: row width does not match the fit");
    double eta = beta[0];
    for (std::size_t j = 0; j < raw.size(); ++j) eta += beta[j + 1] * (raw[j] - center[j]) / scale[j];
    return sigmoid(eta);
}

LogitFit fit_logit(const Dataset& data, bool standardize, const LogitOptions& opt) {
    const std::size_t n = data.size();
    const std::size_t d = data.names.size();
    std::size_t ones = 0;
    for (int v : data.y) {
        if (v != 0 && v != 1) throw DataError("logit labels must be 0 or 1");
        ones += static_cast<std::size_t>(v);
    }
    if (ones < 2 || n - ones < 2) throw DataError("logit needs at least 2 rows of each class");

    LogitFit fit;
    fit.standardized = standardize;
    fit.center.assign(d, 0.0);
    fit.scale.assign(d, 1.0);
    for (std::size_t j = 0; j < d; ++j) {
        double mean = 0.0;
        for (const auto& row : data.x) mean += row[j];
        mean /= static_cast<double>(n);
        double ss = 0.0;
        for (const auto& row : data.x) ss += (row[j] - mean) * (row[j] - mean);
        const double sd = std::sqrt(ss / static_cast<double>(n));
        if (!(sd > 1e-12 * std::max(1.0, std::abs(mean)))) {
            throw DataError("feature \"" + data.names[j] + "\" has zero variance");
        }
        if (standardize) {
            fit.center[j] = mean;
            fit.scale[j] = sd;
        }
    }
    const Eigen::MatrixXd X = design(data, fit.center, fit.scale);
    Eigen::VectorXd y(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) y(static_cast<Eigen::Index>(i)) = data.y[i];

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d + 1));
    double ll = log_likelihood(X, y, beta);
    for (fit.iterations = 1; fit.iterations <= opt.max_iterations; ++fit.iterations) {
        const auto info = information(X, y, beta);
        const Eigen::VectorXd step = factor(info.hessian).solve(info.gradient);
        double t = 1.0;
        Eigen::VectorXd cand;
        double ll_c = ll;
        bool accepted = false;
        for (int h = 0; h < 40; ++h, t *= 0.5) {
            cand = beta + t * step;
            ll_c = log_likelihood(X, y, cand);
            if (ll_c >= ll) {
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            fit.converged = true;  // no ascent direction left at machine precision
            break;
        }
        if (cand.cwiseAbs().maxCoeff() > opt.divergence) {
            throw NumericalError("logit diverged (perfect separation)");
        }
        const double delta = ll_c - ll;
        beta = cand;
        ll = ll_c;
        if (std::abs(delta) < opt.tolerance) {
            fit.converged = true;
            break;
        }
    }
    fit.iterations = std::min(fit.iterations, opt.max_iterations);

    const auto info = information(X, y, beta);
    if ((y - info.p).cwiseAbs().maxCoeff() < 1e-6) throw NumericalError("logit diverged (perfect separation)");
    const auto ldlt = factor(info.hessian);
    const Eigen::MatrixXd cov = ldlt.solve(Eigen::MatrixXd::Identity(info.hessian.rows(), info.hessian.cols()));

    fit.names.push_back("const");
    fit.names.insert(fit.names.end(), data.names.begin(), data.names.end());
    fit.covariance.assign(d + 1, std::vector<double>(d + 1));
    for (std::size_t j = 0; j <= d; ++j) {
        const auto jj = static_cast<Eigen::Index>(j);
        fit.beta.push_back(beta(jj));
        fit.se.push_back(std::sqrt(cov(jj, jj)));
        fit.z.push_back(fit.beta.back() / fit.se.back());
        fit.p.push_back(two_sided_p(fit.z.back()));
        for (std::size_t k = 0; k <= d; ++k) fit.covariance[j][k] = cov(jj, static_cast<Eigen::Index>(k));
    }
    fit.log_likelihood = ll;
    const double ybar = static_cast<double>(ones) / static_cast<double>(n);
    fit.null_log_likelihood = static_cast<double>(n) * (ybar * std::log(ybar) + (1.0 - ybar) * std::log(1.0 - ybar));
    fit.pseudo_r2 = 1.0 - ll / fit.null_log_likelihood;
    if (fit.converged) fit.effects = marginal_effects(fit, data);
    return fit;
}

MarginalEffects marginal_effects(const LogitFit& fit, const Dataset& data) {
    if (!fit.converged) throw NumericalError("marginal effects need a converged fit");
    const std::size_t d = data.names.size();
    if (fit.beta.size() != d + 1) throw DataError("marginal effects: dataset does not match the fit");
    const Eigen::MatrixXd X = design(data, fit.center, fit.scale);
    Eigen::VectorXd beta(static_cast<Eigen::Index>(d + 1));
    Eigen::MatrixXd cov(static_cast<Eigen::Index>(d + 1), static_cast<Eigen::Index>(d + 1));
    for (std::size_t j = 0; j <= d; ++j) {
        beta(static_cast<Eigen::Index>(j)) = fit.beta[j];
        for (std::size_t k = 0; k <= d; ++k) {
            cov(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) = fit.covariance[j][k];
        }
    }
    const Eigen::VectorXd p = (X * beta).unaryExpr([](double t) { return sigmoid(t); });
    const Eigen::ArrayXd w = p.array() * (1.0 - p.array());
    const double mean_w = w.mean();
    // d mean(w) / d beta_k = mean_i w_i (1 - 2 p_i) x_ik
    const Eigen::VectorXd dw = X.transpose() * (w * (1.0 - 2.0 * p.array())).matrix() / static_cast<double>(X.rows());

    MarginalEffects me;
    me.names = data.names;
    for (std::size_t j = 0; j < d; ++j) {
        const auto jj = static_cast<Eigen::Index>(j + 1);
        Eigen::VectorXd g = beta(jj) * dw;
        g(jj) += mean_w;
        const double ame = beta(jj) * mean_w;
        const double se = std::sqrt(std::max(0.0, g.dot(cov * g)));
        me.ame.push_back(ame);
        me.se.push_back(se);
        me.z.push_back(se > 0 ? ame / se : 0.0);
        me.p.push_back(se > 0 ? two_sided_p(ame / se) : 1.0);
    }
    return me;
}

double logit_log_likelihood(const LogitFit& fit, const Dataset& data, std::span<const double> b) {
    const Eigen::MatrixXd X = design(data, fit.center, fit.scale);
    Eigen::VectorXd y(static_cast<Eigen::Index>(data.size()));
    for (std::size_t i = 0; i < data.size(); ++i) y(static_cast<Eigen::Index>(i)) = data.y[i];
    const Eigen::VectorXd beta = Eigen::Map<const Eigen::VectorXd>(b.data(), static_cast<Eigen::Index>(b.size()));
    return log_likelihood(X, y, beta);
}

std::vector<std::string> select_features(const std::vector<FeatureSignificance>& table, double alpha) {
    std::vector<std::string> keep;
    for (const auto& f : table) {
        if (f.coef_p < alpha || f.ame_p < alpha) keep.push_back(f.name);
    }
    return keep;
}

SelectionResult purposeful_selection(const std::vector<FeatureRow>& rows, const std::vector<std::string>& features,
                                     double alpha, const LogitOptions& options) {
    SelectionResult r;
    r.initial = fit_logit(to_dataset(rows, features), false, options);
    if (!r.initial.converged) throw NumericalError("initial logit did not converge");
    std::vector<FeatureSignificance> table;
    for (std::size_t j = 0; j < features.size(); ++j) {
        table.push_back({features[j], r.initial.p[j + 1], r.initial.effects.p[j]});
    }
    r.selected = select_features(table, alpha);
    r.final = fit_logit(to_dataset(rows, r.selected), true, options);
    return r;
}

// ---- random forest --------------------------------------------------------

double Tree::probability(std::span<const double> x) const {
    std::size_t i = 0;
    while (nodes[i].feature >= 0) {
        const auto& n = nodes[i];
        i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
    }
    return nodes[i].value;
}

double ForestFit::probability(std::span<const double> x) const {
    if (x.size() != names.size()) throw DataError("forest: row width does not match the fit");
    double s = 0.0;
    for (const auto& t : trees) s += t.probability(x);
    return s / static_cast<double>(trees.size());
}

namespace {

double gini(double ones, double total) {
    if (total <= 0) return 0.0;
    const double p = ones / total;
    return 2.0 * p * (1.0 - p);
}

struct Grown {
    Tree tree;
    std::vector<double> importance;
};

Grown grow_tree(const Dataset& data, const std::vector<std::size_t>& order, std::size_t max_features,
                std::size_t min_split, Rng& rng) {
    const std::size_t n = data.size();
    const std::size_t d = order.size();
    Grown g;
    g.importance.assign(d, 0.0);

    std::vector<std::size_t> sample(n);
    for (auto& s : sample) s = rng.index(n);

    struct Work {
        int node;
        std::vector<std::size_t> idx;
    };
    std::vector<Work> stack;
    g.tree.nodes.emplace_back();
    stack.push_back({0, std::move(sample)});
    std::vector<std::pair<double, int>> vals;
    while (!stack.empty()) {
        Work w = std::move(stack.back());
        stack.pop_back();
        const double total = static_cast<double>(w.idx.size());
        double ones = 0;
        for (auto i : w.idx) ones += data.y[i];
        auto& node = g.tree.nodes[static_cast<std::size_t>(w.node)];
        node.value = ones / total;
        if (w.idx.size() < min_split || ones == 0 || ones == total) continue;

        const double parent = total * gini(ones, total);
        std::vector<std::size_t> feats(d);
        std::iota(feats.begin(), feats.end(), 0);
        rng.shuffle(feats);

        double best_gain = -1.0;
        std::size_t best_f = d;
        double best_thr = 0.0;
        std::size_t evaluated = 0;
        for (std::size_t fi = 0; fi < d && evaluated < max_features; ++fi) {
            const std::size_t col = order[feats[fi]];
            vals.clear();
            for (auto i : w.idx) vals.emplace_back(data.x[i][col], data.y[i]);
            std::sort(vals.begin(), vals.end());
            if (vals.front().first == vals.back().first) continue;  // constant here; not counted
            ++evaluated;
            double left_ones = 0;
            for (std::size_t k = 0; k + 1 < vals.size(); ++k) {
                left_ones += vals[k].second;
                if (vals[k].first == vals[k + 1].first) continue;
                const double nl = static_cast<double>(k + 1);
                const double nr = total - nl;
                const double gain = parent - nl * gini(left_ones, nl) - nr * gini(ones - left_ones, nr);
                if (gain > best_gain) {
                    best_gain = gain;
                    best_f = feats[fi];
                    double thr = 0.5 * (vals[k].first + vals[k + 1].first);
                    if (thr >= vals[k + 1].first) thr = vals[k].first;
                    best_thr = thr;
                }
            }
        }
        if (best_f == d) continue;

        const std::size_t col = order[best_f];
        std::vector<std::size_t> li, ri;
        for (auto i : w.idx) (data.x[i][col] <= best_thr ? li : ri).push_back(i);
        g.importance[best_f] += std::max(0.0, best_gain);
        const int l = static_cast<int>(g.tree.nodes.size());
        g.tree.nodes.emplace_back();
        g.tree.nodes.emplace_back();
        auto& parent_node = g.tree.nodes[static_cast<std::size_t>(w.node)];
        parent_node.feature = static_cast<int>(col);
        parent_node.threshold = best_thr;
        parent_node.left = l;
        parent_node.right = l + 1;
        stack.push_back({l + 1, std::move(ri)});
        stack.push_back({l, std::move(li)});
    }
    return g;
}

}  // namespace

ForestFit fit_forest(const Dataset& data, std::uint64_t seed, const ForestOptions& opt) {
    if (data.size() == 0) throw DataError("random forest needs training rows");
    if (opt.n_trees < 1) throw ConfigError("random forest needs at least one tree");
    const std::size_t d = data.names.size();
    if (d == 0) throw DataError("random forest needs at least one feature");
    for (const auto& row : data.x) {
        if (row.size() != d) throw DataError("dataset row width does not match its feature names");
    }
    std::vector<std::size_t> order(d);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return data.names[a] < data.names[b]; });
    const std::size_t max_features =
        opt.max_features > 0 ? std::min<std::size_t>(static_cast<std::size_t>(opt.max_features), d)
                             : static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(d))));

    ForestFit fit;
    fit.names = data.names;
    fit.seed = seed;
    std::vector<Grown> grown(static_cast<std::size_t>(opt.n_trees));
    parallel_for(grown.size(), [&](std::size_t t) {
        Rng rng(mix_seed(seed, t));
        grown[t] = grow_tree(data, order, max_features, static_cast<std::size_t>(std::max(2, opt.min_samples_split)), rng);
    });

    std::vector<double> imp(d, 0.0);
    for (auto& g : grown) {
        const double s = std::accumulate(g.importance.begin(), g.importance.end(), 0.0);
        if (s > 0) {
            for (std::size_t k = 0; k < d; ++k) imp[order[k]] += g.importance[k] / s;
        }
        fit.trees.push_back(std::move(g.tree));
    }
    const double s = std::accumulate(imp.begin(), imp.end(), 0.0);
    if (s > 0) {
        for (auto& v : imp) v /= s;
    } else {
        imp.assign(d, 1.0 / static_cast<double>(d));
    }
    fit.importances = std::move(imp);
    return fit;
}

// ---- evaluation -----------------------------------------------------------

Metrics evaluate(const std::vector<int>& y_true, const std::vector<int>& y_pred) {
    if (y_true.size() != y_pred.size()) throw DataError("evaluate: label vectors differ in length");
    if (y_true.empty()) throw DataError("evaluate: no labels");
    Metrics m;
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        if ((y_true[i] != 0 && y_true[i] != 1) || (y_pred[i] != 0 && y_pred[i] != 1)) {
            throw DataError("evaluate: labels must be 0 or 1");
        }
        ++m.confusion[y_true[i]][y_pred[i]];
    }
    auto f1 = [&](int c) {
        const double tp = static_cast<double>(m.confusion[c][c]);
        const double fp = static_cast<double>(m.confusion[1 - c][c]);
        const double fn = static_cast<double>(m.confusion[c][1 - c]);
        return tp == 0 ? 0.0 : 2 * tp / (2 * tp + fp + fn);
    };
    m.f1_class0 = f1(0);
    m.f1_class1 = f1(1);
    m.micro_f1 = static_cast<double>(m.confusion[0][0] + m.confusion[1][1]) / static_cast<double>(y_true.size());
    return m;
}

YearSplit split_by_year(const std::vector<FeatureRow>& rows, const std::set<int>& train_years, int test_year) {
    if (train_years.count(test_year)) throw ConfigError("test year is also a training year");
    YearSplit s;
    for (const auto& r : rows) {
        if (r.year == test_year) {
            s.test.push_back(r);
        } else if (train_years.count(r.year)) {
            s.train.push_back(r);
        }
    }
    if (s.test.empty()) throw DataError("no feature rows for test year " + std::to_string(test_year));
    if (s.train.empty()) throw DataError("no feature rows in the training years");
    return s;
}

// ---- IO -------------------------------------------------------------------

void write_features_csv(std::ostream& out, const std::vector<FeatureRow>& rows) {
    out << "cluster_id,year,n_strong,n_weak,mean_id_text_strong,mean_id_net_strong,mean_id_net_weak,weak_imputed,"
           "label_next_year\n";
    for (const auto& r : rows) {
        out << r.cluster_id << ',' << r.year << ',' << static_cast<long>(r.n_strong) << ','
            << static_cast<long>(r.n_weak) << ',' << format_float(r.mean_id_text_strong) << ','
            << format_float(r.mean_id_net_strong) << ',' << format_float(r.mean_id_net_weak) << ','
            << (r.weak_imputed ? 1 : 0) << ',' << r.label << '\n';
    }
}

std::vector<FeatureRow> read_features_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw DataError("features file is empty");
    std::vector<FeatureRow> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto f = split_csv_line(line);
        if (f.size() != 9) throw DataError("features line " + std::to_string(lineno) + ": expected 9 fields");
        try {
            FeatureRow r;
            r.cluster_id = std::stoi(f[0]);
            r.year = std::stoi(f[1]);
            r.n_strong = std::stod(f[2]);
            r.n_weak = std::stod(f[3]);
            r.mean_id_text_strong = std::stod(f[4]);
            r.mean_id_net_strong = std::stod(f[5]);
            r.mean_id_net_weak = std::stod(f[6]);
            r.weak_imputed = f[7] == "1";
            r.label = std::stoi(f[8]);
            rows.push_back(r);
        } catch (const std::logic_error&) {
            throw DataError("features line " + std::to_string(lineno) + ": malformed number");
        }
    }
    return rows;
}

void write_predictions_csv(std::ostream& out, const std::vector<Prediction>& predictions) {
    out << "cluster_id,year,predicted,probability\n";
    for (const auto& p : predictions) {
        out << p.cluster_id << ',' << p.year << ',' << p.predicted << ',' << format_float(p.probability) << '\n';
    }
}

namespace {

nlohmann::json logit_json(const LogitFit& f) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t j = 0; j < f.names.size(); ++j) {
        nlohmann::json r = {{"feature", f.names[j]}, {"coefficient", f.beta[j]}, {"std_err", f.se[j]},
                            {"z", f.z[j]}, {"p", f.p[j]}};
        if (j > 0 && !f.effects.ame.empty()) {
            r["effect"] = f.effects.ame[j - 1];
            r["effect_std_err"] = f.effects.se[j - 1];
            r["effect_p"] = f.effects.p[j - 1];
        }
        rows.push_back(std::move(r));
    }
    return {{"standardized", f.standardized}, {"converged", f.converged},   {"iterations", f.iterations},
            {"log_likelihood", f.log_likelihood}, {"pseudo_r2", f.pseudo_r2}, {"table", rows}};
}

nlohmann::json metrics_json(const Metrics& m) {
    return {{"micro_f1", m.micro_f1},
            {"f1_class0", m.f1_class0},
            {"f1_class1", m.f1_class1},
            {"confusion", {{m.confusion[0][0], m.confusion[0][1]}, {m.confusion[1][0], m.confusion[1][1]}}}};
}

}  // namespace

std::string fit_report_json(const SelectionResult* sel, const ForestFit* forest, const Metrics* logit_metrics,
                            const Metrics* forest_metrics) {
    nlohmann::json j = nlohmann::json::object();
    if (sel) {
        j["logit"] = {{"selected", sel->selected}, {"initial", logit_json(sel->initial)}, {"final", logit_json(sel->final)}};
        if (logit_metrics) j["logit"]["test"] = metrics_json(*logit_metrics);
    }
    if (forest) {
        nlohmann::json imp = nlohmann::json::array();
        for (std::size_t k = 0; k < forest->names.size(); ++k) {
            imp.push_back({{"feature", forest->names[k]}, {"gini_importance", forest->importances[k]}});
        }
        j["forest"] = {{"trees", forest->trees.size()}, {"seed", forest->seed}, {"importances", imp}};
        if (forest_metrics) j["forest"]["test"] = metrics_json(*forest_metrics);
    }
    return j.dump(2) + "\n";
}

}  // namespace vesper
