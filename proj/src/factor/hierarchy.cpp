#include <fmt/format.h>

#include <cmath>

#include "textpsy/error.hpp"
#include "textpsy/factor.hpp"

namespace textpsy::factor {

HigherOrderSolution second_order(const Matrix& c, const SecondOrderOptions& options) {
    const Eigen::Index k = c.rows();
    if (c.cols() != k) throw DataError("second_order: factor correlation matrix is not square");
    if (k < 2) throw NoSecondOrderStructure();

    HigherOrderSolution out;
    int l = 0;
    if (options.n_factors) {
        l = *options.n_factors;
    } else {
        if (options.n_obs < 3) throw ConfigError("second_order: automatic L needs the document count N");
        auto pa = parallel_analysis(options.n_obs, c, options.parallel);
        l = pa.n_factors;
        out.parallel = std::move(pa);
    }
    if (l == 0) throw NoSecondOrderStructure();
    if (l >= k)
        throw NumericalError(
            fmt::format("second_order: {} second-order factors requested for {} first-order factors", l, k));

    const auto extraction = extract_minres(c, l, options.minres);
    const auto rotated = rotate(extraction.loadings, options.rotation);
    out.B = rotated.loadings;
    out.O = rotated.phi;
    out.U = extraction.uniqueness;
    out.L = l;
    out.converged = extraction.converged && rotated.converged;
    out.heywood = extraction.heywood;
    return out;
}

BifactorSolution schmid_leiman(const Matrix& a, const Matrix& b, const Matrix& o, const Vector& u, const Vector& v) {
    if (a.cols() != b.rows() || u.size() != a.cols() || o.rows() != b.cols() || o.cols() != b.cols() ||
        v.size() != a.rows())
        throw DataError(fmt::format("schmid_leiman: dimension mismatch (A {}x{}, B {}x{}, O {}x{}, U {}, V {})",
                                    a.rows(), a.cols(), b.rows(), b.cols(), o.rows(), o.cols(), u.size(), v.size()));
    if ((u.array() < 0.0).any()) throw DataError("schmid_leiman: negative second-order uniqueness");
    BifactorSolution s;
    s.general = a * b;
    s.minor = a * u.cwiseSqrt().asDiagonal();
    s.O = o;
    s.V = v;
    return s;
}

BifactorSolution schmid_leiman(const FactorSolution& first, const HigherOrderSolution& second) {
    return schmid_leiman(first.A, second.B, second.O, second.U, first.V);
}

Matrix implied_correlation(const BifactorSolution& s) {
    Matrix r = s.general * s.O * s.general.transpose() + s.minor * s.minor.transpose();
    r.diagonal() += s.V;
    return r;
}

}  // namespace textpsy::factor
