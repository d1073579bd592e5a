#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "textpsy/error.hpp"
#include "textpsy/factor.hpp"
#include "textpsy/util/log.hpp"

namespace textpsy::factor {

LoadingSummary summarize_loadings(const Matrix& loadings, const Matrix& phi, const std::vector<double>& cutoffs) {
    LoadingSummary s;
    s.n_items = static_cast<int>(loadings.rows());
    s.n_factors = static_cast<int>(loadings.cols());
    if (s.n_items > 0 && s.n_factors > 0) {
        const Vector common = (loadings * phi).cwiseProduct(loadings).rowwise().sum();
        s.variance_ratio = common.sum() / static_cast<double>(s.n_items);
    }
    double sum = 0.0, abs_sum = 0.0;
    int pairs = 0;
    for (Eigen::Index i = 0; i < phi.rows(); ++i)
        for (Eigen::Index j = i + 1; j < phi.cols(); ++j) {
            sum += phi(i, j);
            abs_sum += std::abs(phi(i, j));
            ++pairs;
        }
    if (pairs > 0) {
        s.mean_factor_correlation = sum / pairs;
        s.mean_abs_factor_correlation = abs_sum / pairs;
    }
    for (double cut : cutoffs) {
        LoadingCounts c;
        c.cutoff = cut;
        for (Eigen::Index k = 0; k < loadings.cols(); ++k)
            c.per_factor.push_back(static_cast<int>((loadings.col(k).array().abs() > cut).count()));
        if (!c.per_factor.empty())
            c.mean_per_factor = std::accumulate(c.per_factor.begin(), c.per_factor.end(), 0.0) /
                                static_cast<double>(c.per_factor.size());
        s.counts.push_back(std::move(c));
    }
    return s;
}

LoadingSummary solution_summary(const FactorSolution& s, const std::vector<double>& cutoffs) {
    return summarize_loadings(s.A, s.C, cutoffs);
}

BifactorSummary solution_summary(const BifactorSolution& s, const std::vector<double>& cutoffs) {
    BifactorSummary out;
    out.general = summarize_loadings(s.general, s.O, cutoffs);
    out.minor = summarize_loadings(s.minor, Matrix::Identity(s.minor.cols(), s.minor.cols()), cutoffs);
    out.total_variance_ratio = out.general.variance_ratio + out.minor.variance_ratio;
    return out;
}

std::vector<WordLoading> top_words(const Matrix& loadings, const std::vector<std::string>& words, Eigen::Index factor,
                                   std::size_t m) {
    if (factor < 0 || factor >= loadings.cols())
        throw DataError(fmt::format("top_words: factor {} out of range (have {})", factor, loadings.cols()));
    if (words.size() != static_cast<std::size_t>(loadings.rows()))
        throw DataError("top_words: word list does not match loading rows");
    if (m > words.size()) {
        log::warn(fmt::format("top_words: requested {} words but only {} exist", m, words.size()));
        m = words.size();
    }
    std::vector<WordLoading> all;
    all.reserve(words.size());
    for (std::size_t j = 0; j < words.size(); ++j)
        all.push_back({words[j], loadings(static_cast<Eigen::Index>(j), factor)});
    std::sort(all.begin(), all.end(), [](const WordLoading& a, const WordLoading& b) {
        const double x = std::abs(a.loading), y = std::abs(b.loading);
        if (x != y) return x > y;
        return a.word < b.word;
    });
    all.resize(m);
    return all;
}

double congruence(const Vector& a, const Vector& b) {
    const double denom = std::sqrt(a.squaredNorm() * b.squaredNorm());
    return denom > 0.0 ? a.dot(b) / denom : 0.0;
}

Alignment align_factors(const Matrix& truth, const Matrix& estimate) {
    if (truth.rows() != estimate.rows()) throw DataError("align_factors: row counts differ");
    const Eigen::Index k = truth.cols();
    const Eigen::Index m = estimate.cols();
    Matrix phi(k, m);
    for (Eigen::Index i = 0; i < k; ++i)
        for (Eigen::Index j = 0; j < m; ++j) phi(i, j) = std::abs(congruence(truth.col(i), estimate.col(j)));

    Alignment out;
    out.mapping.assign(static_cast<std::size_t>(k), -1);
    if (k <= 8 && m <= 8) {
        // Exhaustive over ordered selections of estimate columns.
        std::vector<int> cols(static_cast<std::size_t>(m));
        std::iota(cols.begin(), cols.end(), 0);
        double best = -1.0;
        do {
            double total = 0.0;
            for (Eigen::Index i = 0; i < std::min(k, m); ++i) total += phi(i, cols[static_cast<std::size_t>(i)]);
            if (total > best + 1e-15) {
                best = total;
                for (Eigen::Index i = 0; i < std::min(k, m); ++i)
                    out.mapping[static_cast<std::size_t>(i)] = cols[static_cast<std::size_t>(i)];
            }
        } while (std::next_permutation(cols.begin(), cols.end()));
    } else {
        std::vector<bool> used(static_cast<std::size_t>(m), false);
        for (Eigen::Index step = 0; step < std::min(k, m); ++step) {
            double best = -1.0;
            Eigen::Index bi = -1, bj = -1;
            for (Eigen::Index i = 0; i < k; ++i) {
                if (out.mapping[static_cast<std::size_t>(i)] >= 0) continue;
                for (Eigen::Index j = 0; j < m; ++j)
                    if (!used[static_cast<std::size_t>(j)] && phi(i, j) > best) {
                        best = phi(i, j);
                        bi = i;
                        bj = j;
                    }
            }
            out.mapping[static_cast<std::size_t>(bi)] = static_cast<int>(bj);
            used[static_cast<std::size_t>(bj)] = true;
        }
    }
    for (Eigen::Index i = 0; i < k; ++i) {
        const int j = out.mapping[static_cast<std::size_t>(i)];
        out.congruences.push_back(j >= 0 ? phi(i, j) : 0.0);
    }
    return out;
}

}  // namespace textpsy::factor
