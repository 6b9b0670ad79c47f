// Acceptance run: one PASS/FAIL line per criterion.

#include <json.hpp>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "vesper/cli.hpp"
#include "vesper/clusterer.hpp"
#include "vesper/graph.hpp"
#include "vesper/pipeline.hpp"
#include "vesper/predict.hpp"
#include "vesper/scoring.hpp"
#include "vesper/synth.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <random>
#include <sstream>

using namespace vesper;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void criterion(int n, const std::string& name, double limit_s, const std::function<Outcome()>& body) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool pass = o.pass && s < limit_s;
    if (!pass) ++failures;
    std::cout << (pass ? "PASS" : "FAIL") << " criterion " << n << " " << name << ": " << o.detail << " ["
              << std::fixed << std::setprecision(2) << s << " s, limit " << limit_s << " s]" << std::endl;
}

YearGraph graph_of(std::size_t n, const oracle::Edges& e) {
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < n; ++i) ids.push_back(std::to_string(i));
    return YearGraph(2000, ids, e);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(slurp(p));
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::stringstream ss(line);
        for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
        rows.push_back(cells);
    }
    return rows;
}

// cluster -> most common blob among its strong members
std::map<int, std::string> majority_blobs(const std::vector<std::string>& ids, const std::vector<int>& labels,
                                          const std::map<std::string, std::string>& blob_of) {
    std::map<int, std::map<std::string, int>> votes;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (labels[i] >= 0) ++votes[labels[i]][blob_of.at(ids[i])];
    }
    std::map<int, std::string> out;
    for (auto& [c, v] : votes) {
        out[c] = std::max_element(v.begin(), v.end(), [](auto& a, auto& b) { return a.second < b.second; })->first;
    }
    return out;
}

Outcome language_examples() {
    std::vector<double> sure(9, 0.0);
    sure[0] = 1.0;
    const double a = language_id(sure, 0.0);
    const double b = language_id(std::vector<double>(9, 0.1), 0.1);
    std::ostringstream d;
    d << std::setprecision(17) << "ID_text " << a << " and " << b;
    return {std::abs(a) <= 1e-12 && std::abs(b - 0.9) <= 1e-12, d.str()};
}

Outcome betweenness_oracle() {
    std::mt19937_64 g(99);
    double worst = 0;
    for (int t = 0; t < 50; ++t) {
        const std::size_t n = std::uniform_int_distribution<std::size_t>(5, 200)(g);
        std::bernoulli_distribution edge(std::uniform_real_distribution<double>(1.0, 5.0)(g) / double(n));
        oracle::Edges e;
        for (std::uint32_t i = 0; i < n; ++i) {
            for (std::uint32_t j = i + 1; j < n; ++j) {
                if (edge(g)) e.push_back({i, j});
            }
        }
        const auto got = betweenness(graph_of(n, e));
        const auto want = oracle::betweenness_by_paths(n, e);
        for (std::size_t v = 0; v < n; ++v) worst = std::max(worst, std::abs(got[v] - want[v]));
    }
    bool closed = true;
    for (std::size_t n : {3u, 6u, 12u}) {
        oracle::Edges star, complete, path;
        for (std::uint32_t i = 1; i < n; ++i) star.push_back({0, i});
        for (std::uint32_t i = 0; i < n; ++i) {
            for (std::uint32_t j = i + 1; j < n; ++j) complete.push_back({i, j});
        }
        for (std::uint32_t i = 0; i + 1 < n; ++i) path.push_back({i, i + 1});
        const auto s = betweenness(graph_of(n, star));
        closed = closed && s[0] == double((n - 1) * (n - 2) / 2);
        for (double v : betweenness(graph_of(n, complete))) closed = closed && v == 0.0;
        const auto p = betweenness(graph_of(n, path));
        for (std::size_t i = 0; i < n; ++i) closed = closed && p[i] == double(i * (n - 1 - i));
    }
    std::ostringstream d;
    d << "max deviation " << worst << " over 50 graphs, closed forms " << (closed ? "exact" : "wrong");
    return {worst <= 1e-9 && closed, d.str()};
}

Outcome louvain_oracle() {
    oracle::Edges bar;
    for (std::uint32_t base : {0u, 5u}) {
        for (std::uint32_t i = 0; i < 5; ++i) {
            for (std::uint32_t j = i + 1; j < 5; ++j) bar.push_back({base + i, base + j});
        }
    }
    bar.push_back({4, 5});
    const double best = oracle::best_modularity(10, bar);
    const double got = louvain(graph_of(10, bar), 1.0, 1).modularity;
    double ari = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        std::mt19937_64 g(1000 + seed);
        std::uniform_real_distribution<double> u;
        oracle::Edges e;
        std::vector<int> truth;
        for (std::uint32_t i = 0; i < 128; ++i) {
            truth.push_back(int(i / 32));
            for (std::uint32_t j = i + 1; j < 128; ++j) {
                if (u(g) < (i / 32 == j / 32 ? 0.3 : 0.01)) e.push_back({i, j});
            }
        }
        ari += oracle::ari(truth, louvain(graph_of(128, e), 1.0, seed).community) / 10;
    }
    std::ostringstream d;
    d << std::setprecision(12) << "barbell Q " << got << " vs optimum " << best << ", planted mean ARI " << ari;
    return {std::abs(got - best) <= 1e-9 && ari >= 0.9, d.str()};
}

Outcome clustering() {
    double worst_ari = 1, worst_sum = 0;
    std::size_t strong = 0, agree = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        auto p = fixture::two_blobs_noise(seed);
        auto m = cluster(p.x, {});
        soft_membership(m, p.x);
        worst_ari = std::min(worst_ari, oracle::ari(p.labels, m.labels));
        for (std::size_t i = 0; i < m.size(); ++i) {
            const auto row = m.membership_row(i);
            double s = m.weak_mass[i];
            for (double v : row) s += v;
            worst_sum = std::max(worst_sum, std::abs(s - 1));
            if (!m.is_weak(i)) {
                ++strong;
                if (std::max_element(row.begin(), row.end()) - row.begin() == m.labels[i]) ++agree;
            }
        }
    }
    std::ostringstream d;
    d << "min ARI " << worst_ari << ", max |row sum - 1| " << worst_sum << ", argmax agreement " << agree << "/"
      << strong;
    return {worst_ari >= 0.95 && worst_sum <= 1e-9 && agree == strong, d.str()};
}

Outcome event_detection() {
    auto spec = reference_timeline(11);
    auto tl = gen_timeline(spec);
    PipelineConfig cfg;
    cfg.keyphrases = false;
    auto res = run_pipeline(tl.corpus, tl.embeddings, cfg);
    // blob -> cluster per year by majority vote
    std::map<int, std::map<std::string, int>> cluster_of;
    for (const auto& y : res.years) {
        for (auto& [c, blob] : majority_blobs(y.ids, y.model.labels, tl.blob_of)) cluster_of[y.year][blob] = c;
    }
    auto find = [&](int year, const std::string& blob) -> int {
        auto it = cluster_of[year].find(blob);
        return it == cluster_of[year].end() ? -1 : it->second;
    };
    const auto planted = tl.planted_labels();
    int recovered = 0, misgrouped = 0;
    for (const auto& ev : tl.events) {
        auto tr = res.transitions.find(ev.year);
        if (tr == res.transitions.end()) continue;
        const auto& t = tr->second;
        bool ok = false;
        std::vector<int> sources;
        if (ev.kind == EventKind::Birth || ev.kind == EventKind::Merge) {
            const int c = find(ev.year + 1, ev.children[0]);
            ok = c >= 0 && t.later[std::size_t(c)].has(ev.kind);
            if (ev.kind == EventKind::Merge) {
                for (const auto& p : ev.parents) {
                    const int a = find(ev.year, p);
                    ok = ok && a >= 0;
                    if (a >= 0) sources.push_back(a);
                }
            }
        } else {
            const int c = find(ev.year, ev.parents[0]);
            ok = c >= 0 && t.earlier[std::size_t(c)].has(ev.kind);
            if (c >= 0) sources.push_back(c);
        }
        if (!ok) continue;
        ++recovered;
        for (int a : sources) {
            const std::string blob = std::find_if(cluster_of[ev.year].begin(), cluster_of[ev.year].end(),
                                                  [&](auto& kv) { return kv.second == a; })->first;
            const int want = planted.at(blob);
            const int got = t.earlier[std::size_t(a)].group == EventGroup::dynamic ? 1 : 0;
            if (want != got) ++misgrouped;
        }
    }
    const double rate = double(recovered) / double(tl.events.size());
    std::ostringstream d;
    d << recovered << "/" << tl.events.size() << " planted events recovered, " << misgrouped
      << " group misassignments";
    return {rate >= 0.8 && misgrouped == 0, d.str()};
}

Outcome logit_recovery() {
    const std::vector<double> beta{1.0, -1.0, 0.5};
    std::vector<int> covered(3, 0);
    double grad = 0, se_rel = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        auto d = gen_feature_table(beta, 5000, 500 + seed);
        auto f = fit_logit(d, false);
        for (std::size_t j = 0; j < 3; ++j) {
            if (std::abs(f.beta[j + 1] - beta[j]) <= 1.959963984540054 * f.se[j + 1]) ++covered[j];
        }
        if (seed >= 5) continue;
        // gradient and finite-difference Hessian from the log-likelihood itself
        std::vector<double> g(4, 0.0);
        for (std::size_t i = 0; i < d.size(); ++i) {
            double eta = f.beta[0];
            for (std::size_t j = 0; j < 3; ++j) eta += f.beta[j + 1] * d.x[i][j];
            const double r = d.y[i] - oracle::logistic(eta);
            g[0] += r;
            for (std::size_t j = 0; j < 3; ++j) g[j + 1] += r * d.x[i][j];
        }
        for (double v : g) grad = std::max(grad, std::abs(v));
        const double h = 1e-4;
        double hess[4][4];
        for (int a = 0; a < 4; ++a) {
            for (int b = 0; b < 4; ++b) {
                auto at = [&](double da, double db) {
                    auto v = f.beta;
                    v[a] += da;
                    v[b] += db;
                    return logit_log_likelihood(f, d, v);
                };
                hess[a][b] = -(at(h, h) - at(h, -h) - at(-h, h) + at(-h, -h)) / (4 * h * h);
            }
        }
        // invert the 4x4 information by Gauss-Jordan
        double aug[4][8];
        for (int r = 0; r < 4; ++r) {
            for (int c = 0; c < 8; ++c) aug[r][c] = c < 4 ? hess[r][c] : (c - 4 == r ? 1.0 : 0.0);
        }
        for (int c = 0; c < 4; ++c) {
            int piv = c;
            for (int r = c + 1; r < 4; ++r) {
                if (std::abs(aug[r][c]) > std::abs(aug[piv][c])) piv = r;
            }
            std::swap(aug[c], aug[piv]);
            const double div = aug[c][c];
            for (int k = 0; k < 8; ++k) aug[c][k] /= div;
            for (int r = 0; r < 4; ++r) {
                if (r == c) continue;
                const double m = aug[r][c];
                for (int k = 0; k < 8; ++k) aug[r][k] -= m * aug[c][k];
            }
        }
        for (int j = 0; j < 4; ++j) se_rel = std::max(se_rel, std::abs(f.se[j] - std::sqrt(aug[j][4 + j])) / f.se[j]);
    }
    std::ostringstream d;
    d << "CI coverage " << covered[0] << "/" << covered[1] << "/" << covered[2] << " of 100, max |gradient| " << grad
      << ", max SE relative gap " << se_rel;
    return {*std::min_element(covered.begin(), covered.end()) >= 90 && grad < 1e-6 && se_rel <= 1e-4, d.str()};
}

Outcome selection_logic() {
    const std::vector<FeatureSignificance> table{{"mean_id_net_strong", 0.051, 0.046},
                                                 {"mean_id_text_strong", 0.436, 0.434},
                                                 {"n_weak", 0.20, 0.05}};
    const auto kept = select_features(table);
    const bool ok = kept == std::vector<std::string>{"mean_id_net_strong"};
    return {ok, ok ? "p 0.051 / AME p 0.046 retained, 0.436 / 0.434 and 0.20 / 0.05 dropped" : "wrong selection"};
}

Outcome forest() {
    Dataset d;
    d.names = {"a", "b", "c", "d"};
    std::mt19937_64 g(8);
    std::normal_distribution<double> n;
    for (int i = 0; i < 500; ++i) {
        std::vector<double> x{n(g), n(g), n(g), n(g)};
        d.y.push_back(x[0] - x[1] > 0 ? 1 : 0);
        d.x.push_back(x);
    }
    auto f = fit_forest(d, 3);
    auto again = fit_forest(d, 3);
    double sum = 0;
    for (double v : f.importances) sum += v;
    std::vector<int> pred;
    bool same = again.importances == f.importances;
    for (const auto& x : d.x) {
        pred.push_back(f.predict(x));
        same = same && f.probability(x) == again.probability(x);
    }
    const double f1 = evaluate(d.y, pred).micro_f1;
    std::ostringstream s;
    s << "importance sum " << std::setprecision(17) << sum << ", training micro-F1 " << f1 << ", rerun "
      << (same ? "identical" : "differs");
    return {std::abs(sum - 1) <= 1e-9 && f1 == 1.0 && same, s.str()};
}

int cli(const fs::path& dir, const std::string& stage) {
    std::ostringstream out, err;
    const int code = run_cli({"-o", dir.string(), "--seed", "42", stage}, out, err);
    if (code != 0) std::cerr << err.str();
    return code;
}

Outcome end_to_end(const fs::path& dir) {
    fs::remove_all(dir);
    if (cli(dir, "synth") != 0 || cli(dir, "pipeline") != 0) return {false, "cli run failed"};
    std::map<std::string, std::string> blob_of;
    for (const auto& r : read_csv(dir / "paper_blobs.csv")) blob_of[r[0]] = r[1];
    std::map<std::string, int> planted;
    for (const auto& r : read_csv(dir / "planted_labels.csv")) planted[r[0]] = std::stoi(r[2]);
    std::vector<int> truth, pred;
    int test_year = 0;
    std::map<int, std::string> blobs;
    for (const auto& r : read_csv(dir / "predictions.csv")) {
        const int year = std::stoi(r[1]);
        if (year != test_year) {
            test_year = year;
            auto j = nlohmann::json::parse(slurp(dir / ("clusters_" + std::to_string(year) + ".json")));
            blobs = majority_blobs(j["ids"].get<std::vector<std::string>>(),
                                   j["model"]["labels"].get<std::vector<int>>(), blob_of);
        }
        truth.push_back(planted.at(blobs.at(std::stoi(r[0]))));
        pred.push_back(std::stoi(r[2]));
    }
    if (pred.empty()) return {false, "no predictions"};
    const auto m = evaluate(truth, pred);
    std::ostringstream d;
    d << "8000 papers over 4 years, " << pred.size() << " test clusters in " << test_year
      << ", forest micro-F1 vs planted " << m.micro_f1;
    return {m.micro_f1 >= 0.8, d.str()};
}

Outcome determinism(const fs::path& first, const fs::path& second) {
    if (!fs::exists(first / "predictions.csv")) return {false, "first run missing"};
    fs::remove_all(second);
    if (cli(second, "synth") != 0 || cli(second, "pipeline") != 0) return {false, "cli run failed"};
    int compared = 0;
    std::string differs;
    for (const auto& e : fs::directory_iterator(first)) {
        if (e.path().extension() != ".csv") continue;
        ++compared;
        if (slurp(e.path()) != slurp(second / e.path().filename())) differs += " " + e.path().filename().string();
    }
    std::ostringstream d;
    d << compared << " CSV files compared" << (differs.empty() ? ", all byte-identical" : ", differ:" + differs);
    return {compared > 0 && differs.empty(), d.str()};
}

}  // namespace

int main(int argc, char** argv) {
    const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "vesper_acceptance";
    fs::create_directories(work);
    criterion(1, "language ID worked examples", 0.001, language_examples);
    criterion(2, "betweenness vs path enumeration", 60, betweenness_oracle);
    criterion(3, "louvain optimum and planted partition", 60, louvain_oracle);
    criterion(4, "two blobs with noise", 120, clustering);
    criterion(5, "planted event recovery", 120, event_detection);
    criterion(6, "logit recovery and inference", 120, logit_recovery);
    criterion(7, "purposeful selection logic", 1, selection_logic);
    criterion(8, "random forest", 60, forest);
    criterion(9, "end-to-end pipeline", 600, [&] { return end_to_end(work / "run_a"); });
    criterion(10, "determinism", 600, [&] { return determinism(work / "run_a", work / "run_b"); });
    std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
    return failures == 0 ? 0 : 1;
}
