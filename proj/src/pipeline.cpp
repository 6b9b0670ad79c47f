#include "vesper/pipeline.hpp"

#include "vesper/embedding_file.hpp"

#include <algorithm>
#include <cctype>

namespace vesper {

namespace {

Matrix stub_phrases(const std::vector<std::string>& phrases, std::size_t dims, std::uint64_t seed) {
    Matrix m(phrases.size(), dims);
    for (std::size_t i = 0; i < phrases.size(); ++i) {
        const auto v = stub_vector(phrases[i], seed, dims);
        std::copy(v.begin(), v.end(), m.row(i).begin());
    }
    return m;
}

std::string lower(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

}  // namespace

Cohort cohort_of(const Corpus& corpus, const EmbeddingMatrix& embeddings, const AlignedView& view,
                 const CorpusWindow& win) {
    Cohort c;
    c.corpus_index = win.cohort;
    c.embeddings = Matrix(win.cohort.size(), embeddings.values.cols);
    for (std::size_t k = 0; k < win.cohort.size(); ++k) {
        const auto& id = corpus[win.cohort[k]].id;
        const auto row = view.row(id);
        if (!row) throw DataError("paper " + id + " has no embedding");
        c.ids.push_back(id);
        const auto src = embeddings.values.row(*row);
        std::copy(src.begin(), src.end(), c.embeddings.row(k).begin());
    }
    return c;
}

bool can_cluster(std::size_t n, const PipelineConfig& cfg) {
    const int need = std::max({cfg.reducer.n_neighbors, cfg.reducer.target_dims, cfg.hdbscan.min_cluster_size}) + 1;
    return n >= static_cast<std::size_t>(need);
}

ReducerConfig year_reducer(const PipelineConfig& cfg, int year) {
    auto rc = cfg.reducer;
    rc.seed = mix_seed(cfg.seed, static_cast<std::uint64_t>(year));
    return rc;
}

std::uint64_t louvain_seed(const PipelineConfig& cfg, int year) {
    return mix_seed(cfg.seed, 0x10000u + static_cast<std::uint64_t>(year));
}

ClusterModel cluster_year(const Matrix& reduced, const Matrix& full, const PipelineConfig& cfg) {
    auto model = cluster(reduced, cfg.hdbscan);
    soft_membership(model, reduced);
    assign_weak(model, full);
    return model;
}

ClusterModel all_weak_model(std::size_t n) {
    ClusterModel m;
    m.labels.assign(n, kWeak);
    m.degenerate = true;
    m.weak_mass.assign(n, 1.0);
    m.weak_assignment.assign(n, kWeak);
    m.outlier_scores.assign(n, 1.0);
    m.strength.assign(n, 0.0);
    return m;
}

OverlapReport year_overlap(int year, const std::vector<std::string>& ids, const ClusterModel& model,
                           const std::vector<IdSet>& communities, double theta) {
    const std::size_t k = static_cast<std::size_t>(model.n_clusters);
    std::vector<IdSet> strong(k), weak(k);
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const int c = model.effective_label(i);
        if (c == kWeak) continue;
        (model.is_weak(i) ? weak : strong)[static_cast<std::size_t>(c)].insert(ids[i]);
    }
    const IdSet cohort(ids.begin(), ids.end());
    return overlap(year, strong, weak, communities, cohort, theta);
}

OverlapReport year_overlap(int year, const std::vector<std::string>& ids, const ClusterModel& model,
                           const YearGraph& graph, const CommunityAssignment& communities, double theta) {
    std::map<int, IdSet> comm;
    for (std::size_t v = 0; v < graph.node_count(); ++v) comm[communities.community[v]].insert(graph.id(v));
    std::vector<IdSet> sets;
    for (auto& [c, members] : comm) sets.push_back(std::move(members));
    return year_overlap(year, ids, model, sets, theta);
}

std::vector<KeyphraseSet> year_keyphrases(const Corpus& corpus, const std::vector<std::size_t>& corpus_index,
                                          const ClusterModel& model, const PipelineConfig& cfg) {
    std::vector<KeyphraseSet> out;
    for (std::size_t c = 0; c < static_cast<std::size_t>(model.n_clusters); ++c) {
        std::vector<std::string> texts;
        for (std::size_t i = 0; i < corpus_index.size(); ++i) {
            if (model.labels[i] != static_cast<int>(c)) continue;
            const auto& p = corpus[corpus_index[i]];
            texts.push_back(lower(p.title + " " + p.abstract));
        }
        std::vector<std::string> phrases;
        for (const auto& cd : candidates(texts, cfg.candidates)) phrases.push_back(cd.phrase);
        const auto& centroid = model.strong_centroids[c];
        const Matrix pe = cfg.phrase_embedder ? cfg.phrase_embedder(phrases, centroid.size())
                                              : stub_phrases(phrases, centroid.size(), cfg.phrase_seed);
        out.push_back(rank(static_cast<int>(c), phrases, pe, centroid, cfg.keyphrase_k, cfg.mmr_lambda));
    }
    return out;
}

YearResult run_year(const Corpus& corpus, const EmbeddingMatrix& embeddings, const AlignedView& view, int year,
                    const PipelineConfig& cfg, std::vector<std::string>& warnings) {
    YearResult r;
    r.year = year;
    const auto win = window(corpus, year);
    auto cohort = cohort_of(corpus, embeddings, view, win);
    r.ids = cohort.ids;
    if (!can_cluster(r.ids.size(), cfg)) {
        warnings.push_back("year " + std::to_string(year) + ": " + std::to_string(r.ids.size()) +
                           " papers are too few to cluster; every paper is weak");
        r.model = all_weak_model(r.ids.size());
    } else {
        r.reduced = reduce(cohort.embeddings, year_reducer(cfg, year));
        r.model = cluster_year(r.reduced, cohort.embeddings, cfg);
        if (r.model.degenerate) warnings.push_back("year " + std::to_string(year) + ": no clusters found");
    }
    r.graph = build_graph(corpus, win);
    r.communities = louvain(r.graph, cfg.louvain_resolution, louvain_seed(cfg, year));
    r.centrality = centrality_scores(r.graph, corpus, win, cfg.centrality);
    r.scores = score_year(year, r.ids, r.model, r.centrality, cfg.scoring);
    r.overlap = year_overlap(year, r.ids, r.model, r.graph, r.communities, cfg.overlap_threshold);
    if (cfg.keyphrases) r.keyphrases = year_keyphrases(corpus, cohort.corpus_index, r.model, cfg);
    return r;
}

void run_events(PipelineResult& res, const PipelineConfig& cfg) {
    for (std::size_t i = 0; i + 1 < res.years.size(); ++i) {
        const auto& a = res.years[i];
        const auto& b = res.years[i + 1];
        if (b.year != a.year + 1) continue;
        auto links = link_years(a.year, a.model.strong_centroids, b.model.strong_centroids, cfg.link_threshold);
        for (const auto& w : links.warnings) res.warnings.push_back(w);
        res.transitions[a.year] = classify(a.year, links.pairs, a.model.strong_centroids.size(),
                                           b.model.strong_centroids.size());
        res.links[a.year] = std::move(links);
    }
}

void run_features(PipelineResult& res, const PipelineConfig& cfg) {
    res.features.clear();
    for (const auto& y : res.years) {
        auto t = res.transitions.find(y.year);
        if (t == res.transitions.end()) continue;
        auto built = build_features(y.year, y.model, y.scores, t->second, cfg.features);
        for (auto& w : built.warnings) res.warnings.push_back(std::move(w));
        for (auto& row : built.rows) res.features.push_back(row);
    }
}

std::optional<PredictionResult> run_prediction(const std::vector<FeatureRow>& rows, const PipelineConfig& cfg,
                                               std::vector<std::string>& warnings) {
    std::set<int> years;
    for (const auto& r : rows) years.insert(r.year);
    if (years.size() < 2) {
        warnings.push_back("prediction skipped: features span fewer than 2 years");
        return std::nullopt;
    }
    PredictionResult p;
    p.test_year = cfg.test_year.value_or(*years.rbegin());
    std::set<int> train_years;
    for (int y : years) {
        if (y < p.test_year) train_years.insert(y);
    }
    auto split = split_by_year(rows, train_years, p.test_year);
    p.train = std::move(split.train);
    p.test = std::move(split.test);

    const auto train = to_dataset(p.train, cfg.feature_names);
    const auto test = to_dataset(p.test, cfg.feature_names);
    p.forest = fit_forest(train, cfg.seed, cfg.forest);
    std::vector<int> pred;
    for (std::size_t i = 0; i < test.size(); ++i) {
        const double prob = p.forest.probability(test.x[i]);
        const int label = prob > 0.5 ? 1 : 0;
        pred.push_back(label);
        p.predictions.push_back({p.test[i].cluster_id, p.test[i].year, label, prob});
    }
    p.forest_metrics = evaluate(test.y, pred);

    std::vector<std::string> logit_features;
    for (std::size_t j = 0; j < train.names.size(); ++j) {
        const double first = train.x.front()[j];
        const bool constant = std::all_of(train.x.begin(), train.x.end(), [&](const auto& x) { return x[j] == first; });
        if (constant) {
            warnings.push_back("logit: feature " + train.names[j] + " is constant in the training years; left out");
        } else {
            logit_features.push_back(train.names[j]);
        }
    }
    try {
        p.selection = purposeful_selection(p.train, logit_features, cfg.alpha);
        std::vector<int> lp;
        for (std::size_t i = 0; i < p.test.size(); ++i) {
            std::vector<double> x;
            for (const auto& f : p.selection->selected) x.push_back(p.test[i].get(f));
            lp.push_back(p.selection->final.probability(x) > 0.5 ? 1 : 0);
        }
        p.logit_metrics = evaluate(test.y, lp);
    } catch (const NumericalError& e) {
        warnings.push_back(std::string("logit skipped: ") + e.what());
    } catch (const DataError& e) {
        warnings.push_back(std::string("logit skipped: ") + e.what());
    }
    return p;
}

PipelineResult run_pipeline(const Corpus& corpus, const EmbeddingMatrix& embeddings, const PipelineConfig& cfg) {
    PipelineResult res;
    const auto view = align_embeddings(corpus, embeddings);
    for (int y : corpus.core_years()) res.years.push_back(run_year(corpus, embeddings, view, y, cfg, res.warnings));
    if (cfg.scoring.scope == ClusterCountScope::all_years) {
        auto opts = cfg.scoring;
        opts.all_years_cluster_count = 0;
        for (const auto& y : res.years) opts.all_years_cluster_count += y.model.n_clusters;
        for (auto& y : res.years) y.scores = score_year(y.year, y.ids, y.model, y.centrality, opts);
    }
    run_events(res, cfg);
    run_features(res, cfg);
    res.prediction = run_prediction(res.features, cfg, res.warnings);
    return res;
}

}  // namespace vesper
