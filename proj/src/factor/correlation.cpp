#include <fmt/format.h>

#include <algorithm>
#include <cmath>

#include "textpsy/error.hpp"
#include "textpsy/factor.hpp"

namespace textpsy::factor {

Matrix pearson(const Matrix& data) {
    const Eigen::Index n = data.rows();
    if (n < 2) throw DataError("correlation needs at least 2 observations");
    const Matrix centered = data.rowwise() - data.colwise().mean();
    Matrix cov = (centered.transpose() * centered) / static_cast<double>(n - 1);
    const Vector sd = cov.diagonal().cwiseSqrt();
    for (Eigen::Index j = 0; j < sd.size(); ++j)
        if (!(sd(j) > 0.0)) throw DataError(fmt::format("constant column {}", j));
    Matrix r = sd.cwiseInverse().asDiagonal() * cov * sd.cwiseInverse().asDiagonal();
    r = 0.5 * (r + r.transpose()).eval();
    r.diagonal().setOnes();
    return r;
}

CorrelationMatrix correlation_matrix(const ScoreMatrix& y) {
    if (y.n_docs() < 3) throw DataError("correlation_matrix needs N >= 3");
    const Vector mean = y.values.colwise().mean();
    for (Eigen::Index j = 0; j < y.n_words(); ++j) {
        const double ss = (y.values.col(j).array() - mean(j)).square().sum();
        if (!(ss > 0.0)) {
            const std::string name =
                static_cast<std::size_t>(j) < y.words.size() ? y.words[static_cast<std::size_t>(j)] : std::to_string(j);
            throw DataError(fmt::format("constant column \"{}\" has zero variance", name));
        }
    }
    return {pearson(y.values), y.words};
}

EigenDecomposition eigen_sym(const Matrix& m) {
    if (m.rows() != m.cols()) throw NumericalError("eigen_sym: matrix is not square");
    if (m.size() > 0 && (m - m.transpose()).cwiseAbs().maxCoeff() > 1e-10)
        throw NumericalError("eigen_sym: matrix is not symmetric");
    Eigen::SelfAdjointEigenSolver<Matrix> solver(m);
    if (solver.info() != Eigen::Success) throw NumericalError("eigen_sym: decomposition failed");
    // Eigen returns ascending order.
    EigenDecomposition out;
    out.values = solver.eigenvalues().reverse();
    out.vectors = solver.eigenvectors().rowwise().reverse();
    return out;
}

Vector squared_multiple_correlations(const Matrix& r) {
    const Eigen::Index j = r.rows();
    Eigen::LDLT<Matrix> ldlt(r);
    bool ok = ldlt.info() == Eigen::Success && ldlt.isPositive();
    if (ok) {
        const Vector d = ldlt.vectorD();
        ok = d.minCoeff() > 1e-10 * std::max(1.0, d.maxCoeff());
    }
    Vector smc(j);
    if (ok) {
        const Matrix inv = ldlt.solve(Matrix::Identity(j, j));
        for (Eigen::Index i = 0; i < j; ++i) smc(i) = 1.0 - 1.0 / inv(i, i);
        ok = smc.allFinite();
    }
    if (!ok) {
        for (Eigen::Index i = 0; i < j; ++i) {
            double best = 0.0;
            for (Eigen::Index k = 0; k < j; ++k)
                if (k != i) best = std::max(best, std::abs(r(i, k)));
            smc(i) = best;
        }
    }
    return smc.cwiseMax(0.0).cwiseMin(1.0);
}

}  // namespace textpsy::factor
