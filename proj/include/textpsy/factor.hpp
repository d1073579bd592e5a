#pragma once

// Exploratory factor analysis on correlation structure.
//
//   R = A C A' + V          first order (A: J x K pattern, C: factor correlations)
//   C = B O B' + U          second order on the first-order factors
//   R = Lg O Lg' + Lm Lm' + V,  Lg = A B,  Lm = A U^(1/2)   (Schmid-Leiman)
//
// Extraction is MINRES (iterated principal axes until the communalities
// settle), rotation is oblique gradient projection under geomin or oblimin.

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "textpsy/score_matrix.hpp"

namespace textpsy::factor {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr double kMinUniqueness = 0.001;

struct CorrelationMatrix {
    Matrix values;
    std::vector<std::string> words;

    Eigen::Index size() const { return values.rows(); }
};

// Pearson correlations with (N-1) denominators, exact unit diagonal,
// symmetrized. Throws DataError naming any constant column.
CorrelationMatrix correlation_matrix(const ScoreMatrix& y);
Matrix pearson(const Matrix& data);

struct EigenDecomposition {
    Vector values;   // descending
    Matrix vectors;  // orthonormal columns matching `values`
};

// Throws NumericalError when m is not symmetric to 1e-10.
EigenDecomposition eigen_sym(const Matrix& m);

// Squared multiple correlations 1 - 1/diag(R^-1). When R is singular, falls
// back to the largest absolute off-diagonal entry of each row.
Vector squared_multiple_correlations(const Matrix& r);

// ---------------------------------------------------------------------------
// Number of factors

enum class PaCriterion { Mean, P95 };

// Which eigenvalues of the observed matrix are compared with the random-data
// reference. Reduced puts squared multiple correlations on the diagonal
// (common-factor eigenvalues); Full uses R as is.
enum class PaObserved { Reduced, Full };

struct ParallelAnalysisOptions {
    int n_reps = 100;
    PaCriterion criterion = PaCriterion::Mean;
    PaObserved observed = PaObserved::Reduced;
    std::uint64_t seed = 0;
    std::size_t workers = 1;
};

struct ParallelAnalysis {
    int n_factors = 0;
    Vector observed;        // eigenvalues compared against the reference, descending
    Vector observed_full;   // eigenvalues of R, descending (scree)
    Vector reference;       // per-rank mean or 95th percentile of random-data eigenvalues
};

// Replication r draws an N x J standard-normal matrix from seed + r and takes
// the eigenvalues of its correlation matrix. K is the number of leading
// observed eigenvalues strictly above the reference at the same rank.
ParallelAnalysis parallel_analysis(Eigen::Index n_obs, const Matrix& r, const ParallelAnalysisOptions& options = {});

// ---------------------------------------------------------------------------
// Extraction and rotation

struct MinresOptions {
    double tolerance = 1e-6;
    int max_iterations = 1000;
};

struct Extraction {
    Matrix loadings;       // J x K, orthogonal factors
    Vector uniqueness;     // clamped to [kMinUniqueness, 1]
    bool converged = false;
    int iterations = 0;
    bool heywood = false;  // some uniqueness hit the clamp
};

Extraction extract_minres(const Matrix& r, int n_factors, const MinresOptions& options = {});

// Largest |off-diagonal| entry of r - implied.
double max_offdiag_residual(const Matrix& r, const Matrix& implied);

enum class RotationCriterion { Geomin, Oblimin };

struct RotationSpec {
    RotationCriterion criterion = RotationCriterion::Geomin;
    double epsilon = 0.01;  // geomin
    double gamma = 0.0;     // oblimin
    int n_starts = 10;      // random starts in addition to the identity start
    std::uint64_t seed = 0;
    double tolerance = 1e-6;
    int max_iterations = 10000;
};

std::string to_string(RotationCriterion c);
RotationCriterion rotation_from_string(const std::string& s);

struct Rotation {
    Matrix loadings;     // A = A0 (T')^-1
    Matrix phi;          // C = T'T, unit diagonal
    Matrix transform;    // T, unit-length columns
    double criterion_value = 0.0;
    bool converged = false;
    int iterations = 0;
    int best_start = 0;  // 0 = identity start
};

double rotation_criterion(const Matrix& loadings, const RotationSpec& spec);

// Gradient-projection oblique rotation, best of the identity start and
// `n_starts` random orthonormal starts. Columns are then flipped so each
// column's largest-|loading| entry is positive and ordered by descending sum
// of squared loadings. K = 1 returns the sign-normalized input and C = [1].
Rotation rotate(const Matrix& initial, const RotationSpec& spec);

// ---------------------------------------------------------------------------
// Solutions

struct FactorSolution {
    Matrix A;  // J x K
    Matrix C;  // K x K
    Vector V;  // J
    int K = 0;
    RotationSpec rotation;
    bool converged = false;
    int iterations = 0;
    bool heywood = false;
    double rotation_criterion = 0.0;
};

FactorSolution fit_efa(const Matrix& r, int n_factors, const RotationSpec& rotation,
                       const MinresOptions& minres = {});

struct HigherOrderSolution {
    Matrix B;  // K x L
    Matrix O;  // L x L
    Vector U;  // K
    int L = 0;
    bool converged = false;
    bool heywood = false;
    std::optional<ParallelAnalysis> parallel;  // present when L was chosen automatically
};

struct SecondOrderOptions {
    std::optional<int> n_factors;  // nullopt = parallel analysis on C
    Eigen::Index n_obs = 0;        // N used by parallel analysis
    ParallelAnalysisOptions parallel;
    RotationSpec rotation;
    MinresOptions minres;
};

// Throws NoSecondOrderStructure when parallel analysis retains nothing.
HigherOrderSolution second_order(const Matrix& c, const SecondOrderOptions& options);

struct BifactorSolution {
    Matrix general;  // Lambda_g, J x L
    Matrix minor;    // Lambda_m, J x K
    Matrix O;        // L x L
    Vector V;        // J
};

BifactorSolution schmid_leiman(const FactorSolution& first, const HigherOrderSolution& second);
BifactorSolution schmid_leiman(const Matrix& a, const Matrix& b, const Matrix& o, const Vector& u, const Vector& v);

// Lg O Lg' + Lm Lm' + diag(V).
Matrix implied_correlation(const BifactorSolution& s);

// ---------------------------------------------------------------------------
// Summaries

struct LoadingCounts {
    double cutoff = 0.0;
    std::vector<int> per_factor;  // # of |loading| > cutoff in each column
    double mean_per_factor = 0.0;
};

struct LoadingSummary {
    int n_items = 0;
    int n_factors = 0;
    double variance_ratio = 0.0;  // sum of common variances / items
    double mean_factor_correlation = 0.0;
    double mean_abs_factor_correlation = 0.0;
    std::vector<LoadingCounts> counts;
};

// Common variance of item j is (L Phi L')_jj.
LoadingSummary summarize_loadings(const Matrix& loadings, const Matrix& phi, const std::vector<double>& cutoffs);

LoadingSummary solution_summary(const FactorSolution& s, const std::vector<double>& cutoffs = {0.3, 0.5});

struct BifactorSummary {
    LoadingSummary general;
    LoadingSummary minor;
    double total_variance_ratio = 0.0;  // mean of (Lg O Lg' + Lm Lm')_jj
};

BifactorSummary solution_summary(const BifactorSolution& s, const std::vector<double>& cutoffs = {0.3, 0.5});

struct WordLoading {
    std::string word;
    double loading = 0.0;
};

// Top m entries of one column by |loading|, ties ascending by word.
std::vector<WordLoading> top_words(const Matrix& loadings, const std::vector<std::string>& words, Eigen::Index factor,
                                   std::size_t m = 30);

// Tucker congruence between two loading columns.
double congruence(const Vector& a, const Vector& b);

struct Alignment {
    std::vector<int> mapping;          // truth column k <-> estimate column mapping[k]
    std::vector<double> congruences;   // |congruence| per truth column, after sign alignment
};

// Matches estimate columns to truth columns maximizing total |congruence|.
// Exhaustive for up to 8 columns, greedy beyond.
Alignment align_factors(const Matrix& truth, const Matrix& estimate);

// ---------------------------------------------------------------------------
// Synthetic data

struct SyntheticSpec {
    Matrix general;  // J x L
    Matrix minor;    // J x K
    Matrix O;        // L x L
    Vector V;        // J
    Eigen::Index N = 0;
    std::uint64_t seed = 0;

    // Builds the bifactor form of a higher-order model; V completes the unit diagonal.
    static SyntheticSpec from_higher_order(const Matrix& a, const Matrix& b, const Matrix& o, const Vector& u,
                                           Eigen::Index n, std::uint64_t seed);

    Matrix implied_correlation() const;
    // Throws DataError unless the implied R has unit diagonal (1e-10) and is PSD.
    void validate() const;
};

// Y = G Lg' + M Lm' + E with G ~ N(0, O), M ~ N(0, I), E ~ N(0, diag V).
ScoreMatrix generate_bifactor_sample(const SyntheticSpec& spec);

}  // namespace textpsy::factor
