#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "textpsy/error.hpp"
#include "textpsy/factor.hpp"
#include "textpsy/util/log.hpp"
#include "textpsy/util/rng.hpp"

namespace textpsy::factor {

namespace {

struct CriterionEval {
    double value = 0.0;
    Matrix gradient;  // d value / d loadings
};

CriterionEval evaluate(const Matrix& l, const RotationSpec& spec) {
    const Eigen::Index p = l.rows();
    const Eigen::Index k = l.cols();
    CriterionEval out;
    if (spec.criterion == RotationCriterion::Geomin) {
        const Matrix l2 = (l.array().square() + spec.epsilon).matrix();
        const Vector pro = (l2.array().log().rowwise().sum() / static_cast<double>(k)).exp().matrix();
        out.value = pro.sum();
        out.gradient = ((2.0 / static_cast<double>(k)) * l.array() / l2.array()).matrix();
        out.gradient = pro.asDiagonal() * out.gradient;
    } else {
        const Matrix l2 = l.array().square().matrix();
        Matrix offdiag = Matrix::Ones(k, k);
        offdiag.diagonal().setZero();
        Matrix x = l2 * offdiag;
        if (spec.gamma != 0.0) {
            const Eigen::RowVectorXd colsum = x.colwise().sum();
            x.rowwise() -= (spec.gamma / static_cast<double>(p)) * colsum;
        }
        out.value = (l2.array() * x.array()).sum() / 4.0;
        out.gradient = (l.array() * x.array()).matrix();
    }
    return out;
}

bool invert(const Matrix& t, Matrix& inverse) {
    Eigen::FullPivLU<Matrix> lu(t);
    if (!lu.isInvertible() || lu.rcond() < 1e-12) return false;
    inverse = lu.inverse();
    return true;
}

void normalize_columns(Matrix& x) {
    for (Eigen::Index c = 0; c < x.cols(); ++c) x.col(c) /= x.col(c).norm();
}

struct StartResult {
    bool ok = false;
    Rotation rotation;
};

// Oblique gradient projection with step halving, after Bernaards & Jennrich.
StartResult gradient_projection(const Matrix& a, Matrix t, const RotationSpec& spec) {
    StartResult out;
    Matrix t_inv;
    if (!invert(t, t_inv)) return out;
    Matrix l = a * t_inv.transpose();
    CriterionEval eval = evaluate(l, spec);
    Matrix g = -(l.transpose() * eval.gradient * t_inv).transpose();
    double step = 1.0;
    int iter = 0;
    bool converged = false;
    for (; iter <= spec.max_iterations; ++iter) {
        const Eigen::RowVectorXd dg = (t.array() * g.array()).colwise().sum();
        const Matrix gp = g - t * dg.asDiagonal();
        const double s = gp.norm();
        if (s < spec.tolerance) {
            converged = true;
            break;
        }
        step *= 2.0;
        Matrix t_new, t_new_inv, l_new;
        CriterionEval eval_new;
        bool have_candidate = false;
        for (int halving = 0; halving <= 10; ++halving) {
            Matrix x = t - step * gp;
            normalize_columns(x);
            Matrix x_inv;
            if (!x.allFinite() || !invert(x, x_inv)) {
                step /= 2.0;
                continue;
            }
            t_new = std::move(x);
            t_new_inv = std::move(x_inv);
            l_new = a * t_new_inv.transpose();
            eval_new = evaluate(l_new, spec);
            have_candidate = true;
            if (eval.value - eval_new.value > 0.5 * s * s * step) break;
            step /= 2.0;
        }
        if (!have_candidate) return out;  // singular everywhere along the search direction
        t = std::move(t_new);
        t_inv = std::move(t_new_inv);
        l = std::move(l_new);
        eval = std::move(eval_new);
        g = -(l.transpose() * eval.gradient * t_inv).transpose();
    }
    if (!l.allFinite()) return out;
    out.ok = true;
    out.rotation.loadings = l;
    out.rotation.transform = t;
    out.rotation.criterion_value = eval.value;
    out.rotation.converged = converged;
    out.rotation.iterations = iter;
    return out;
}

Matrix random_orthonormal(Eigen::Index k, std::uint64_t seed) {
    Rng rng(seed);
    Matrix z(k, k);
    for (Eigen::Index i = 0; i < k; ++i)
        for (Eigen::Index j = 0; j < k; ++j) z(i, j) = rng.normal();
    Eigen::HouseholderQR<Matrix> qr(z);
    Matrix q = qr.householderQ() * Matrix::Identity(k, k);
    return q;
}

}  // namespace

std::string to_string(RotationCriterion c) { return c == RotationCriterion::Geomin ? "geomin" : "oblimin"; }

RotationCriterion rotation_from_string(const std::string& s) {
    if (s == "geomin") return RotationCriterion::Geomin;
    if (s == "oblimin") return RotationCriterion::Oblimin;
    throw ConfigError("rotation must be geomin or oblimin, got \"" + s + "\"");
}

double rotation_criterion(const Matrix& loadings, const RotationSpec& spec) { return evaluate(loadings, spec).value; }

Rotation rotate(const Matrix& initial, const RotationSpec& spec) {
    const Eigen::Index k = initial.cols();
    if (k < 1) throw DataError("rotate: need at least one factor");
    if (spec.n_starts < 0) throw ConfigError("rotate: n_starts must be >= 0");

    Rotation best;
    if (k == 1) {
        best.loadings = initial;
        best.transform = Matrix::Ones(1, 1);
        best.converged = true;
    } else {
        bool have = false;
        for (int start = 0; start <= spec.n_starts; ++start) {
            const Matrix t0 = start == 0 ? Matrix::Identity(k, k)
                                         : random_orthonormal(k, spec.seed + static_cast<std::uint64_t>(start));
            auto result = gradient_projection(initial, t0, spec);
            if (!result.ok) continue;
            result.rotation.best_start = start;
            // Converged starts beat unconverged ones; otherwise lower criterion
            // wins and the first-found start keeps ties.
            const bool better =
                !have || (result.rotation.converged && !best.converged) ||
                (result.rotation.converged == best.converged &&
                 result.rotation.criterion_value <
                     best.criterion_value - 1e-12 * std::max(1.0, std::abs(best.criterion_value)));
            if (better) {
                best = std::move(result.rotation);
                have = true;
            }
        }
        if (!have) throw NumericalError("rotation failed from every start (singular transformation)");
        if (!best.converged)
            log::warn(fmt::format("{} rotation did not converge in {} iterations", to_string(spec.criterion),
                                  spec.max_iterations));
    }

    // Column signs, then order by descending sum of squares.
    for (Eigen::Index c = 0; c < k; ++c) {
        Eigen::Index at = 0;
        best.loadings.col(c).cwiseAbs().maxCoeff(&at);
        if (best.loadings(at, c) < 0.0) {
            best.loadings.col(c) *= -1.0;
            best.transform.col(c) *= -1.0;
        }
    }
    std::vector<Eigen::Index> order(static_cast<std::size_t>(k));
    std::iota(order.begin(), order.end(), 0);
    const Vector ss = best.loadings.colwise().squaredNorm();
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index x, Eigen::Index y) { return ss(x) > ss(y); });
    Matrix loadings(initial.rows(), k), transform(k, k);
    for (Eigen::Index c = 0; c < k; ++c) {
        loadings.col(c) = best.loadings.col(order[static_cast<std::size_t>(c)]);
        transform.col(c) = best.transform.col(order[static_cast<std::size_t>(c)]);
    }
    best.loadings = std::move(loadings);
    best.transform = std::move(transform);
    best.phi = best.transform.transpose() * best.transform;
    best.phi = 0.5 * (best.phi + best.phi.transpose()).eval();
    best.phi.diagonal().setOnes();
    best.criterion_value = rotation_criterion(best.loadings, spec);
    return best;
}

FactorSolution fit_efa(const Matrix& r, int n_factors, const RotationSpec& rotation, const MinresOptions& minres) {
    const auto extraction = extract_minres(r, n_factors, minres);
    const auto rotated = rotate(extraction.loadings, rotation);
    FactorSolution s;
    s.A = rotated.loadings;
    s.C = rotated.phi;
    s.V = extraction.uniqueness;
    s.K = n_factors;
    s.rotation = rotation;
    s.converged = extraction.converged && rotated.converged;
    s.iterations = extraction.iterations + rotated.iterations;
    s.heywood = extraction.heywood;
    s.rotation_criterion = rotated.criterion_value;
    return s;
}

}  // namespace textpsy::factor
