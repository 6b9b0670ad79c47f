#pragma once

#include "vesper/common.hpp"

#include <iosfwd>
#include <set>
#include <string>
#include <vector>

namespace vesper {

struct CandidateOptions {
    int ngram_min = 1;
    int ngram_max = 3;
    int min_df = 2;
    std::size_t top = 100;
};

/// Pinned English stopword list.
const std::set<std::string, std::less<>>& english_stopwords();

/// Lowercased alphanumeric tokens.
std::vector<std::string> tokenize(std::string_view text);

struct Candidate {
    std::string phrase;
    int df = 0;
};

/// N-grams that contain no stopword, with document frequency >= min_df,
/// top `top` by frequency (ties lexicographic).
std::vector<Candidate> candidates(const std::vector<std::string>& texts, const CandidateOptions& options = {},
                                  const std::set<std::string, std::less<>>& stopwords = english_stopwords());

struct RankedPhrase {
    std::string phrase;
    double score = 0.0;  // cosine relevance to the centroid
};

struct KeyphraseSet {
    int cluster = 0;
    std::vector<RankedPhrase> phrases;  // selection order
};

/// Greedy maximal marginal relevance: the next phrase maximizes
/// lambda * cos(p, centroid) - (1 - lambda) * max_{s selected} cos(p, s).
/// Ties go to the lexicographically smaller phrase.
KeyphraseSet rank(int cluster, const std::vector<std::string>& phrases, const Matrix& phrase_embeddings,
                  std::span<const double> centroid, std::size_t k = 5, double lambda = 0.6);

struct KeyphraseRow {
    int year = 0;
    KeyphraseSet set;
};

void write_keyphrases_csv(std::ostream& out, const std::vector<KeyphraseRow>& rows);

}  // namespace vesper
