#pragma once

#include "vesper/clusterer.hpp"
#include "vesper/compare.hpp"
#include "vesper/corpus.hpp"
#include "vesper/events.hpp"
#include "vesper/graph.hpp"
#include "vesper/keyphrases.hpp"
#include "vesper/predict.hpp"
#include "vesper/reducer.hpp"
#include "vesper/scoring.hpp"

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace vesper {

/// Embeds phrases for keyphrase ranking; rows follow the input order.
using PhraseEmbedder = std::function<Matrix(const std::vector<std::string>& phrases, std::size_t dims)>;

struct PipelineConfig {
    ReducerConfig reducer;
    HdbscanParams hdbscan;
    double link_threshold = kLinkThreshold;
    double overlap_threshold = kOverlapThreshold;
    double louvain_resolution = 1.0;
    CentralityOptions centrality;
    ScoringOptions scoring;
    bool keyphrases = true;
    CandidateOptions candidates;
    std::size_t keyphrase_k = 5;
    double mmr_lambda = 0.6;
    FeatureOptions features;
    std::vector<std::string> feature_names = default_features();
    double alpha = 0.05;
    ForestOptions forest;
    std::optional<int> test_year;  // default: the last year with features
    std::uint64_t seed = 42;
    std::uint64_t phrase_seed = 0;
    PhraseEmbedder phrase_embedder;  // default: stub vectors
};

struct YearResult {
    int year = 0;
    std::vector<std::string> ids;  // cohort, aligned with rows below
    Matrix reduced;
    ClusterModel model;
    YearGraph graph;
    CommunityAssignment communities;
    CentralityScores centrality;
    std::vector<InterdisciplinarityScore> scores;
    std::vector<KeyphraseSet> keyphrases;
    OverlapReport overlap;
};

struct PredictionResult {
    int test_year = 0;
    std::vector<FeatureRow> train, test;
    ForestFit forest;
    Metrics forest_metrics;
    std::vector<Prediction> predictions;
    std::optional<SelectionResult> selection;
    std::optional<Metrics> logit_metrics;
};

struct PipelineResult {
    std::vector<YearResult> years;
    std::map<int, LinkResult> links;        // keyed by t of t -> t+1
    std::map<int, Transition> transitions;
    std::vector<FeatureRow> features;
    std::optional<PredictionResult> prediction;
    std::vector<std::string> warnings;
};

struct Cohort {
    std::vector<std::string> ids;
    std::vector<std::size_t> corpus_index;
    Matrix embeddings;
};

/// Core papers of `win.year` with their embedding rows, in corpus order.
Cohort cohort_of(const Corpus& corpus, const EmbeddingMatrix& embeddings, const AlignedView& view,
                 const CorpusWindow& win);

/// Whether a cohort of n papers is large enough to reduce and cluster.
bool can_cluster(std::size_t n, const PipelineConfig& config);
ReducerConfig year_reducer(const PipelineConfig& config, int year);
std::uint64_t louvain_seed(const PipelineConfig& config, int year);

/// HDBSCAN on the reduced rows, soft membership, then weak assignment
/// against the full embeddings.
ClusterModel cluster_year(const Matrix& reduced, const Matrix& full, const PipelineConfig& config);
/// Degenerate model for cohorts too small to cluster: every paper weak.
ClusterModel all_weak_model(std::size_t n);

OverlapReport year_overlap(int year, const std::vector<std::string>& ids, const ClusterModel& model,
                           const YearGraph& graph, const CommunityAssignment& communities, double theta);
OverlapReport year_overlap(int year, const std::vector<std::string>& ids, const ClusterModel& model,
                           const std::vector<IdSet>& communities, double theta);

std::vector<KeyphraseSet> year_keyphrases(const Corpus& corpus, const std::vector<std::size_t>& corpus_index,
                                          const ClusterModel& model, const PipelineConfig& config);

/// Per-year reduce, cluster, graph and score stages for one year's cohort.
YearResult run_year(const Corpus& corpus, const EmbeddingMatrix& embeddings, const AlignedView& view, int year,
                    const PipelineConfig& config, std::vector<std::string>& warnings);

/// Event linking between consecutive processed years.
void run_events(PipelineResult& result, const PipelineConfig& config);

/// Feature assembly for every linked year.
void run_features(PipelineResult& result, const PipelineConfig& config);

/// Train/test split by year, forest and (when it fits) the logit.
std::optional<PredictionResult> run_prediction(const std::vector<FeatureRow>& rows, const PipelineConfig& config,
                                               std::vector<std::string>& warnings);

PipelineResult run_pipeline(const Corpus& corpus, const EmbeddingMatrix& embeddings, const PipelineConfig& config);

}  // namespace vesper
