#include <fmt/format.h>

#include <algorithm>
#include <cmath>

#include "textpsy/error.hpp"
#include "textpsy/factor.hpp"
#include "textpsy/util/parallel.hpp"
#include "textpsy/util/rng.hpp"

namespace textpsy::factor {

namespace {

// Linear interpolation between order statistics (Hyndman-Fan type 7).
double quantile(std::vector<double> xs, double p) {
    std::sort(xs.begin(), xs.end());
    const double h = (static_cast<double>(xs.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, xs.size() - 1);
    return xs[lo] + (h - static_cast<double>(lo)) * (xs[hi] - xs[lo]);
}

}  // namespace

ParallelAnalysis parallel_analysis(Eigen::Index n_obs, const Matrix& r, const ParallelAnalysisOptions& options) {
    const Eigen::Index j = r.rows();
    if (j < 2) throw DataError("parallel analysis needs at least 2 variables");
    if (options.n_reps < 10) throw ConfigError("parallel analysis needs n_reps >= 10");
    if (n_obs < 3) throw DataError("parallel analysis needs N >= 3");

    const auto reps = static_cast<std::size_t>(options.n_reps);
    std::vector<Vector> random_eigs(reps);
    parallel_for(reps, options.workers, [&](std::size_t rep) {
        Rng rng(options.seed + rep);
        Matrix noise(n_obs, j);
        // Row-major fill so the draw order does not depend on storage order.
        for (Eigen::Index i = 0; i < n_obs; ++i)
            for (Eigen::Index c = 0; c < j; ++c) noise(i, c) = rng.normal();
        random_eigs[rep] = eigen_sym(pearson(noise)).values;
    });

    ParallelAnalysis out;
    out.reference.resize(j);
    std::vector<double> column(reps);
    for (Eigen::Index k = 0; k < j; ++k) {
        for (std::size_t rep = 0; rep < reps; ++rep) column[rep] = random_eigs[rep](k);
        if (options.criterion == PaCriterion::Mean) {
            double sum = 0.0;
            for (double x : column) sum += x;
            out.reference(k) = sum / static_cast<double>(reps);
        } else {
            out.reference(k) = quantile(column, 0.95);
        }
    }

    out.observed_full = eigen_sym(r).values;
    if (options.observed == PaObserved::Full) {
        out.observed = out.observed_full;
    } else {
        Matrix reduced = r;
        reduced.diagonal() = squared_multiple_correlations(r);
        out.observed = eigen_sym(reduced).values;
    }

    int k = 0;
    while (k < j && out.observed(k) > out.reference(k)) ++k;
    out.n_factors = k;
    return out;
}

}  // namespace textpsy::factor
