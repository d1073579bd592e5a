#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "textpsy/corpus.hpp"
#include "textpsy/embedding.hpp"
#include "textpsy/score_matrix.hpp"

namespace textpsy::scores {

// Dot product of a word's CCE with a document embedding; accumulates in double.
double contextual_score(const embedding::EmbeddingVector& cce, const embedding::EmbeddingVector& doc);

struct BuildOptions {
    embedding::RephrasingForm form = embedding::RephrasingForm::shipped(1);
    embedding::PoolingMethod pooling = embedding::PoolingMethod::Mean;
    std::size_t workers = 1;
};

// values(i, j) = contextual_score(CCE of words[j] given docs[i], embedding of docs[i]).
// The document embedding is fetched once per document; CCE requests for a
// document go out as one batch.
ScoreMatrix build_score_matrix(const std::vector<corpus::RawDocument>& docs, const std::vector<std::string>& words,
                               embedding::Backend& backend, const BuildOptions& options = {});

struct WordDiagnostics {
    std::string word;
    double skewness = 0.0;         // g1 = m3 / m2^1.5
    double excess_kurtosis = 0.0;  // g2 = m4 / m2^2 - 3
    double split_half_ks = 0.0;    // two-sample KS between random halves
    bool constant = false;
    bool skew_flag = false;        // |skewness| > 2
    bool kurtosis_flag = false;    // |excess kurtosis| > 7
};

struct ScoreDiagnostics {
    std::vector<WordDiagnostics> words;
    double mean_abs_pairwise_r = 0.0;  // over non-constant columns
    double mean_pairwise_r = 0.0;
    std::vector<std::string> constant_words;
};

inline constexpr double kSkewFlag = 2.0;
inline constexpr double kKurtosisFlag = 7.0;

ScoreDiagnostics diagnostics(const ScoreMatrix& y, std::uint64_t seed);

// sup |F_a - F_b| over the pooled sample.
double ks_statistic(std::vector<double> a, std::vector<double> b);

// Rows [0, N/2) and [N/2, N) of a seeded random permutation of 0..N-1.
std::pair<std::vector<Eigen::Index>, std::vector<Eigen::Index>> split_halves(Eigen::Index n, std::uint64_t seed);

std::string diagnostics_to_csv(const ScoreDiagnostics& d);

struct RemovedPair {
    std::string kept;
    std::string removed;
    double r = 0.0;
};

struct FilterReport {
    std::vector<RemovedPair> removed;
    double threshold = 0.8;
};

struct FilterResult {
    ScoreMatrix filtered;
    FilterReport report;
};

// Walks word pairs in descending |r|. When both words of a pair with
// |r| > threshold are still present, the one with fewer occurrences goes
// (ties: the lexicographically greater word).
FilterResult collinearity_filter(const ScoreMatrix& y, const corpus::KeywordSet& keywords, double threshold = 0.8);

// CSV `kept,removed,r`.
std::string filter_report_to_csv(const FilterReport& report);

}  // namespace textpsy::scores
