#include <fmt/format.h>

#include <cmath>

#include "textpsy/error.hpp"
#include "textpsy/factor.hpp"
#include "textpsy/util/rng.hpp"

namespace textpsy::factor {

namespace {

// Symmetric square root factor S with S S' = m; throws if m is not PSD.
Matrix psd_factor(const Matrix& m, const char* what) {
    if (m.rows() == 0) return m;
    const auto eig = eigen_sym(m);
    if (eig.values.minCoeff() < -1e-10) throw DataError(fmt::format("{} is not positive semidefinite", what));
    return eig.vectors * eig.values.cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

}  // namespace

SyntheticSpec SyntheticSpec::from_higher_order(const Matrix& a, const Matrix& b, const Matrix& o, const Vector& u,
                                               Eigen::Index n, std::uint64_t seed) {
    SyntheticSpec s;
    s.general = a * b;
    s.minor = a * u.cwiseSqrt().asDiagonal();
    s.O = o;
    const Matrix common = s.general * o * s.general.transpose() + s.minor * s.minor.transpose();
    s.V = Vector::Ones(a.rows()) - common.diagonal();
    s.N = n;
    s.seed = seed;
    return s;
}

Matrix SyntheticSpec::implied_correlation() const {
    Matrix r = general * O * general.transpose() + minor * minor.transpose();
    r.diagonal() += V;
    return r;
}

void SyntheticSpec::validate() const {
    const Eigen::Index j = V.size();
    if (general.rows() != j || minor.rows() != j || O.rows() != general.cols() || O.cols() != general.cols())
        throw DataError("synthetic spec: dimension mismatch");
    if (N < 1) throw DataError("synthetic spec: N must be positive");
    if ((V.array() < 0.0).any()) throw DataError("synthetic spec: negative uniqueness");
    psd_factor(O, "synthetic spec: O");
    const Matrix r = implied_correlation();
    if ((r.diagonal().array() - 1.0).abs().maxCoeff() > 1e-10)
        throw DataError("synthetic spec: implied correlation matrix lacks a unit diagonal");
    if (eigen_sym(0.5 * (r + r.transpose())).values.minCoeff() < -1e-8)
        throw DataError("synthetic spec: implied correlation matrix is not positive semidefinite");
}

ScoreMatrix generate_bifactor_sample(const SyntheticSpec& spec) {
    spec.validate();
    const Eigen::Index j = spec.V.size();
    const Eigen::Index l = spec.general.cols();
    const Eigen::Index k = spec.minor.cols();
    const Matrix o_root = psd_factor(spec.O, "O");
    const Vector sd = spec.V.cwiseSqrt();

    Rng rng(spec.seed);
    ScoreMatrix y;
    y.values.resize(spec.N, j);
    Vector z(l), g(l), m(k), e(j);
    for (Eigen::Index i = 0; i < spec.N; ++i) {
        for (Eigen::Index c = 0; c < l; ++c) z(c) = rng.normal();
        for (Eigen::Index c = 0; c < k; ++c) m(c) = rng.normal();
        for (Eigen::Index c = 0; c < j; ++c) e(c) = rng.normal();
        g = o_root * z;
        y.values.row(i) = (spec.general * g + spec.minor * m + sd.cwiseProduct(e)).transpose();
    }
    y.doc_ids.reserve(static_cast<std::size_t>(spec.N));
    for (Eigen::Index i = 0; i < spec.N; ++i) y.doc_ids.push_back(fmt::format("doc{:06d}", i + 1));
    for (Eigen::Index c = 0; c < j; ++c) y.words.push_back(fmt::format("item{:03d}", c + 1));
    return y;
}

}  // namespace textpsy::factor
