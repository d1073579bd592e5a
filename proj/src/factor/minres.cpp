#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "textpsy/error.hpp"
#include "textpsy/factor.hpp"
#include "textpsy/util/log.hpp"

namespace textpsy::factor {

namespace {

// Flips each column so its largest-|entry| is positive.
void normalize_signs(Matrix& loadings) {
    for (Eigen::Index k = 0; k < loadings.cols(); ++k) {
        Eigen::Index at = 0;
        loadings.col(k).cwiseAbs().maxCoeff(&at);
        if (loadings(at, k) < 0.0) loadings.col(k) *= -1.0;
    }
}

}  // namespace

double max_offdiag_residual(const Matrix& r, const Matrix& implied) {
    Matrix diff = (r - implied).cwiseAbs();
    diff.diagonal().setZero();
    return diff.size() ? diff.maxCoeff() : 0.0;
}

Extraction extract_minres(const Matrix& r, int n_factors, const MinresOptions& options) {
    const Eigen::Index j = r.rows();
    if (n_factors < 1 || n_factors >= j)
        throw DataError(fmt::format("extract_minres: need 1 <= K < J, got K = {}, J = {}", n_factors, j));
    const Eigen::Index k = n_factors;
    Extraction out;

    // Fixed point h -> rowSumSq(loadings of R with h on the diagonal). Plain
    // iteration converges linearly and can stall well short of the residual
    // the tolerance suggests, so steps are Anderson-accelerated.
    auto step = [&](const Vector& h) {
        Matrix reduced = r;
        reduced.diagonal() = h;
        const auto eig = eigen_sym(reduced);
        const Vector scale = eig.values.head(k).cwiseMax(0.0).cwiseSqrt();
        out.loadings = eig.vectors.leftCols(k) * scale.asDiagonal();
        // Communalities may reach 1 while iterating; only the reported
        // uniquenesses are clamped.
        return Vector(out.loadings.rowwise().squaredNorm().cwiseMin(1.0));
    };

    constexpr int kDepth = 5;
    std::vector<Vector> dx, df;  // differences of iterates and of residuals
    Vector x = squared_multiple_correlations(r);
    Vector gx_prev, f_prev;
    for (int it = 1; it <= options.max_iterations; ++it) {
        const Vector gx = step(x);
        const Vector f = gx - x;
        out.iterations = it;
        if (f.cwiseAbs().maxCoeff() < options.tolerance) {
            out.converged = true;
            break;
        }
        if (it > 1) {
            dx.push_back(gx - gx_prev);
            df.push_back(f - f_prev);
            if (static_cast<int>(df.size()) > kDepth) {
                dx.erase(dx.begin());
                df.erase(df.begin());
            }
        }
        gx_prev = gx;
        f_prev = f;
        Vector next = gx;
        if (!df.empty()) {
            Matrix fm(j, static_cast<Eigen::Index>(df.size())), gm(j, fm.cols());
            for (std::size_t c = 0; c < df.size(); ++c) {
                fm.col(static_cast<Eigen::Index>(c)) = df[c];
                gm.col(static_cast<Eigen::Index>(c)) = dx[c];
            }
            const Vector gamma = fm.completeOrthogonalDecomposition().solve(f);
            next = gx - gm * gamma;
            if (!next.allFinite()) {
                next = gx;
                dx.clear();
                df.clear();
            }
        }
        x = next.cwiseMax(0.0).cwiseMin(1.0);
    }
    normalize_signs(out.loadings);

    const Vector raw = Vector::Ones(j) - out.loadings.rowwise().squaredNorm();
    out.uniqueness = raw.cwiseMax(kMinUniqueness).cwiseMin(1.0);
    out.heywood = (raw.array() < kMinUniqueness).any();
    if (out.heywood)
        log::warn(fmt::format("Heywood case: uniqueness clamped to {} for {} item(s)", kMinUniqueness,
                              (raw.array() < kMinUniqueness).count()));
    if (!out.converged)
        log::warn(fmt::format("MINRES did not converge in {} iterations", options.max_iterations));
    return out;
}

}  // namespace textpsy::factor
