#include <doctest.h>

#include "oracles.hpp"
#include "vesper/predict.hpp"
#include "vesper/synth.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <random>
#include <sstream>

using namespace vesper;

namespace {

double ll_oracle(const Dataset& d, const std::vector<double>& b) {
    double ll = 0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        double eta = b[0];
        for (std::size_t j = 0; j < d.names.size(); ++j) eta += b[j + 1] * d.x[i][j];
        const double p = oracle::logistic(eta);
        ll += d.y[i] ? std::log(p) : std::log(1 - p);
    }
    return ll;
}

std::vector<double> gradient_oracle(const Dataset& d, const std::vector<double>& b) {
    std::vector<double> g(b.size(), 0.0);
    for (std::size_t i = 0; i < d.size(); ++i) {
        double eta = b[0];
        for (std::size_t j = 0; j < d.names.size(); ++j) eta += b[j + 1] * d.x[i][j];
        const double r = d.y[i] - oracle::logistic(eta);
        g[0] += r;
        for (std::size_t j = 0; j < d.names.size(); ++j) g[j + 1] += r * d.x[i][j];
    }
    return g;
}

FeatureRow row_of(int year, double a, double b, int label) {
    FeatureRow r;
    r.year = year;
    r.n_strong = a;
    r.n_weak = b;
    r.label = label;
    return r;
}

InterdisciplinarityScore score(bool weak, std::optional<double> text, double net) {
    InterdisciplinarityScore s;
    s.is_weak = weak;
    s.id_text = text;
    s.id_network = net;
    return s;
}

}  // namespace

TEST_SUITE("predict") {

TEST_CASE("features by hand") {
    ClusterModel m;
    m.n_clusters = 3;
    m.labels = {0, 0, kWeak, 1, 1, kWeak, 2};
    m.weak_assignment = {0, 0, 0, 1, 1, 2, 2};
    std::vector<InterdisciplinarityScore> s{score(false, 0.2, 0.5), score(false, 0.4, 0.1), score(true, {}, 0.3),
                                            score(false, 0.6, 1.0), score(false, 0.0, 0.0), score(true, {}, 0.7),
                                            score(false, 0.9, 0.2)};
    Transition t;
    t.earlier = {{2012, 0, false, {EventKind::Split}, EventGroup::dynamic},
                 {2012, 1, false, {EventKind::Death}, EventGroup::stable},
                 {2012, 2, false, {EventKind::Continuation}, EventGroup::stable}};
    auto b = build_features(2012, m, s, t);
    REQUIRE(b.rows.size() == 3);
    CHECK(b.rows[0].n_strong == 2);
    CHECK(b.rows[0].n_weak == 1);
    CHECK(b.rows[0].mean_id_text_strong == doctest::Approx(0.3));
    CHECK(b.rows[0].mean_id_net_strong == doctest::Approx(0.3));
    CHECK(b.rows[0].mean_id_net_weak == doctest::Approx(0.3));
    CHECK(b.rows[0].label == 1);
    CHECK(b.rows[1].n_weak == 0);
    CHECK(b.rows[1].weak_imputed);
    CHECK(b.rows[1].mean_id_net_weak == 0.0);
    CHECK(b.rows[1].label == 0);
    CHECK(b.rows[2].mean_id_net_weak == doctest::Approx(0.7));
    CHECK(b.rows[2].label == 0);

    m.labels[6] = kWeak;  // cluster 2 now has no strong member
    auto dropped = build_features(2012, m, s, t);
    CHECK(dropped.rows.size() == 2);
    CHECK(dropped.warnings.size() == 1);
}

TEST_CASE("average marginal effect by hand") {
    Dataset d;
    d.names = {"x"};
    d.x = {{-1}, {0}, {1}};
    d.y = {0, 1, 0};
    LogitFit f;
    f.beta = {0.0, 1.0};
    f.center = {0.0};
    f.scale = {1.0};
    f.converged = true;
    f.covariance = {{1, 0}, {0, 1}};
    auto me = marginal_effects(f, d);
    CHECK(std::abs(me.ame[0] - 0.21441) <= 1e-5);
    f.beta = {0.3, 0.0};
    CHECK(marginal_effects(f, d).ame[0] == 0.0);
    f.converged = false;
    CHECK_THROWS_AS(marginal_effects(f, d), NumericalError);
}

TEST_CASE("ame sign follows beta") {
    auto d = gen_feature_table({0.8, -0.6, 0.2}, 800, 5);
    auto f = fit_logit(d, false);
    for (std::size_t j = 0; j < 3; ++j) CHECK((f.effects.ame[j] > 0) == (f.beta[j + 1] > 0));
}

TEST_CASE("coefficient recovery over 100 replications") {
    const std::vector<double> beta{1.0, -1.0, 0.5};
    std::vector<int> covered(3, 0);
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        auto d = gen_feature_table(beta, 5000, seed);
        auto f = fit_logit(d, false);
        REQUIRE(f.converged);
        for (std::size_t j = 0; j < 3; ++j) {
            if (std::abs(f.beta[j + 1] - beta[j]) <= 1.959963984540054 * f.se[j + 1]) ++covered[j];
        }
    }
    MESSAGE("coverage " << covered[0] << " " << covered[1] << " " << covered[2]);
    for (int c : covered) CHECK(c >= 90);
}

TEST_CASE("optimum gradient and finite-difference errors") {
    auto d = gen_feature_table({1.0, -1.0, 0.5}, 5000, 77);
    auto f = fit_logit(d, false);
    const auto g = gradient_oracle(d, f.beta);
    double gmax = 0;
    for (double v : g) gmax = std::max(gmax, std::abs(v));
    CHECK(gmax < 1e-6);
    CHECK(logit_log_likelihood(f, d, f.beta) == doctest::Approx(ll_oracle(d, f.beta)).epsilon(1e-12));
    CHECK(f.log_likelihood == doctest::Approx(ll_oracle(d, f.beta)).epsilon(1e-12));

    const std::size_t k = f.beta.size();
    const double h = 1e-4;
    Eigen::MatrixXd hess(k, k);
    for (std::size_t a = 0; a < k; ++a) {
        for (std::size_t b = 0; b < k; ++b) {
            auto at = [&](double da, double db) {
                auto v = f.beta;
                v[a] += da;
                v[b] += db;
                return ll_oracle(d, v);
            };
            hess(a, b) = (at(h, h) - at(h, -h) - at(-h, h) + at(-h, -h)) / (4 * h * h);
        }
    }
    const Eigen::MatrixXd cov = (-hess).inverse();
    for (std::size_t j = 0; j < k; ++j) {
        const double se = std::sqrt(cov(j, j));
        CHECK(std::abs(f.se[j] - se) / se <= 1e-4);
    }
    CHECK(f.pseudo_r2 >= 0.0);
    CHECK(f.pseudo_r2 < 1.0);
}

TEST_CASE("logit failure modes") {
    auto d = gen_feature_table({1.0}, 200, 3);
    auto one = d;
    one.y.assign(one.size(), 1);
    CHECK_THROWS_AS(fit_logit(one, false), DataError);

    Dataset dup = d;
    dup.names = {"a", "b"};
    for (auto& r : dup.x) r.push_back(r[0]);
    CHECK_THROWS_AS(fit_logit(dup, false), NumericalError);

    Dataset flat = d;
    flat.names = {"a", "c"};
    for (auto& r : flat.x) r.push_back(3.0);
    try {
        fit_logit(flat, false);
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("\"c\"") != std::string::npos);
    }

    Dataset sep = d;
    for (std::size_t i = 0; i < sep.size(); ++i) sep.y[i] = sep.x[i][0] > 0 ? 1 : 0;
    CHECK_THROWS_AS(fit_logit(sep, false), NumericalError);
}

TEST_CASE("selection on a mocked p-value table") {
    const std::vector<FeatureSignificance> table{
        {"network_strong", 0.051, 0.046}, {"language", 0.436, 0.434}, {"n_weak", 0.01, 0.02}, {"n_strong", 0.05, 0.05}};
    CHECK(select_features(table) == std::vector<std::string>{"network_strong", "n_weak"});
    const std::vector<FeatureSignificance> all{{"a", 0.001, 0.2}, {"b", 0.3, 0.01}};
    CHECK(select_features(all) == std::vector<std::string>{"a", "b"});
}

TEST_CASE("purposeful selection refits standardized") {
    auto d = gen_feature_table({1.5, -1.2, 0.0}, 2000, 9);
    std::vector<FeatureRow> rows;
    for (std::size_t i = 0; i < d.size(); ++i) {
        FeatureRow r;
        r.year = 2011;
        r.n_strong = d.x[i][0];
        r.n_weak = d.x[i][1];
        r.mean_id_text_strong = d.x[i][2];
        r.label = d.y[i];
        rows.push_back(r);
    }
    const std::vector<std::string> f{"n_strong", "n_weak", "mean_id_text_strong"};
    auto s = purposeful_selection(rows, f);
    CHECK_FALSE(s.initial.standardized);
    CHECK(s.final.standardized);
    CHECK(s.initial.names.size() == 4);
    std::vector<FeatureSignificance> table;
    for (std::size_t j = 0; j < 3; ++j) table.push_back({f[j], s.initial.p[j + 1], s.initial.effects.p[j]});
    CHECK(s.selected == select_features(table));
    CHECK(std::vector<std::string>(s.final.names.begin() + 1, s.final.names.end()) == s.selected);
}

TEST_CASE("forest") {
    Dataset d;
    d.names = {"a", "b", "c"};
    std::mt19937_64 g(1);
    std::normal_distribution<double> n;
    for (int i = 0; i < 300; ++i) {
        const double a = n(g), b = n(g), c = n(g);
        d.x.push_back({a, b, c});
        d.y.push_back(a + 0.5 * b > 0 ? 1 : 0);
    }
    auto f = fit_forest(d, 42);
    CHECK(f.trees.size() == 100);
    double sum = 0;
    for (double v : f.importances) {
        CHECK(v >= 0);
        sum += v;
    }
    CHECK(std::abs(sum - 1.0) <= 1e-9);
    std::vector<int> pred;
    for (const auto& x : d.x) pred.push_back(f.predict(x));
    CHECK(evaluate(d.y, pred).micro_f1 == 1.0);
    CHECK(f.importances[0] > f.importances[2]);

    auto again = fit_forest(d, 42);
    CHECK(again.importances == f.importances);
    for (const auto& x : d.x) CHECK(again.probability(x) == f.probability(x));
    std::ostringstream a, b;
    a << fit_report_json(nullptr, &f, nullptr, nullptr);
    b << fit_report_json(nullptr, &again, nullptr, nullptr);
    CHECK(a.str() == b.str());

    // column order does not matter
    Dataset swapped = d;
    swapped.names = {"c", "a", "b"};
    for (auto& r : swapped.x) r = {r[2], r[0], r[1]};
    auto s = fit_forest(swapped, 42);
    CHECK(s.importances[1] == f.importances[0]);
    CHECK_THROWS(fit_forest(Dataset{}, 1));
}

TEST_CASE("metrics") {
    auto m = evaluate({1, 1, 0, 0}, {1, 0, 0, 0});
    CHECK(m.micro_f1 == doctest::Approx(0.75));
    CHECK(std::abs(m.f1_class1 - 0.6667) <= 1e-4);
    CHECK(m.confusion[1][0] == 1);
    CHECK(evaluate({1, 0, 1}, {1, 0, 1}).micro_f1 == 1.0);
    CHECK(evaluate({1, 1, 0, 0}, {0, 0, 0, 0}).micro_f1 == 0.5);
    CHECK_THROWS(evaluate({1}, {1, 0}));
}

TEST_CASE("split by year") {
    std::vector<FeatureRow> rows{row_of(2011, 1, 1, 0), row_of(2012, 2, 1, 1), row_of(2018, 3, 1, 0),
                                 row_of(2019, 4, 1, 0)};
    auto s = split_by_year(rows, {2011, 2012}, 2018);
    CHECK(s.train.size() == 2);
    CHECK(s.test.size() == 1);
    CHECK_THROWS_AS(split_by_year(rows, {2011}, 2015), DataError);
    CHECK_THROWS_AS(split_by_year(rows, {2013}, 2018), DataError);
    CHECK_THROWS_AS(split_by_year(rows, {2018}, 2018), ConfigError);
}

TEST_CASE("features csv round trip") {
    std::vector<FeatureRow> rows{row_of(2011, 3, 0, 1)};
    rows[0].mean_id_text_strong = 0.25;
    rows[0].weak_imputed = true;
    std::ostringstream out;
    write_features_csv(out, rows);
    std::istringstream in(out.str());
    auto back = read_features_csv(in);
    REQUIRE(back.size() == 1);
    CHECK(back[0].n_strong == 3);
    CHECK(back[0].mean_id_text_strong == 0.25);
    CHECK(back[0].weak_imputed);
    CHECK(back[0].label == 1);
}

}  // TEST_SUITE predict
