#include "textpsy/item_analysis.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "textpsy/error.hpp"
#include "textpsy/util/io.hpp"
#include "textpsy/util/log.hpp"

namespace textpsy::items {

namespace {

double sample_variance(const Eigen::VectorXd& x) {
    const double mean = x.mean();
    return (x.array() - mean).square().sum() / static_cast<double>(x.size() - 1);
}

// NaN when either side is constant.
double pearson(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    const Eigen::ArrayXd dx = x.array() - x.mean();
    const Eigen::ArrayXd dy = y.array() - y.mean();
    const double sxx = dx.square().sum(), syy = dy.square().sum();
    if (!(sxx > 0.0) || !(syy > 0.0)) return std::numeric_limits<double>::quiet_NaN();
    return std::clamp((dx * dy).sum() / std::sqrt(sxx * syy), -1.0, 1.0);
}

Eigen::VectorXd total(const ScoreMatrix& y, const std::vector<Eigen::Index>& items, Eigen::Index skip = -1) {
    Eigen::VectorXd t = Eigen::VectorXd::Zero(y.n_docs());
    for (auto j : items)
        if (j != skip) t += y.values.col(j);
    return t;
}

}  // namespace

void ScaleAssignment::validate(Eigen::Index n_columns) const {
    std::set<Eigen::Index> seen;
    for (const auto& s : scales) {
        if (s.items.size() < 2) throw DataError(fmt::format("scale \"{}\" needs at least 2 items", s.id));
        for (auto j : s.items) {
            if (j < 0 || j >= n_columns)
                throw DataError(fmt::format("scale \"{}\": item index {} out of range", s.id, j));
            if (!seen.insert(j).second)
                throw DataError(fmt::format("scale \"{}\": item {} already belongs to another scale", s.id, j));
        }
    }
}

ScaleAssignment scales_from_loadings(const Eigen::MatrixXd& loadings, const std::vector<std::string>& words,
                                     const std::vector<Eigen::Index>& factors, std::size_t m) {
    ScaleAssignment out;
    out.source = fmt::format("top-{} words by |loading|", m);
    std::set<Eigen::Index> used;
    for (auto f : factors) {
        if (f < 0 || f >= loadings.cols()) throw DataError(fmt::format("factor {} out of range", f));
        std::vector<Eigen::Index> order(static_cast<std::size_t>(loadings.rows()));
        for (Eigen::Index j = 0; j < loadings.rows(); ++j) order[static_cast<std::size_t>(j)] = j;
        std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
            const double x = std::abs(loadings(a, f)), z = std::abs(loadings(b, f));
            if (x != z) return x > z;
            return words[static_cast<std::size_t>(a)] < words[static_cast<std::size_t>(b)];
        });
        Scale s;
        s.id = fmt::format("F{}", f + 1);
        for (auto j : order) {
            if (s.items.size() >= m) break;
            if (used.insert(j).second) s.items.push_back(j);
        }
        out.scales.push_back(std::move(s));
    }
    return out;
}

ItemTotalReport item_total(const ScoreMatrix& y, const ScaleAssignment& scales, bool corrected) {
    if (y.n_docs() < 3) throw DataError("item_total needs N >= 3");
    scales.validate(y.n_words());
    const std::size_t n_scales = scales.scales.size();

    std::vector<Eigen::VectorXd> totals;
    for (const auto& s : scales.scales) totals.push_back(total(y, s.items));

    ItemTotalReport report;
    for (std::size_t s = 0; s < n_scales; ++s) {
        const auto& scale = scales.scales[s];
        const std::size_t other = (s + 1) % n_scales;
        ScaleStat stat;
        stat.scale = scale.id;
        stat.comparison_scale = n_scales > 1 ? scales.scales[other].id : std::string{};
        stat.constant_total = !(sample_variance(totals[s]) > 0.0);
        if (stat.constant_total)
            log::warn(fmt::format("scale \"{}\" has a constant total", scale.id));
        else
            stat.alpha = cronbach_alpha(y, scale.items);
        report.scales.push_back(stat);

        for (auto j : scale.items) {
            ItemStat item;
            item.scale = scale.id;
            item.word = y.words[static_cast<std::size_t>(j)];
            const Eigen::VectorXd col = y.values.col(j);
            item.within = corrected ? pearson(col, total(y, scale.items, j)) : pearson(col, totals[s]);
            if (n_scales > 1) item.between = pearson(col, totals[other]);
            report.items.push_back(std::move(item));
        }
    }
    return report;
}

double cronbach_alpha(const ScoreMatrix& y, const std::vector<Eigen::Index>& scale) {
    if (scale.size() < 2) throw DataError("cronbach_alpha needs at least 2 items");
    if (y.n_docs() < 3) throw DataError("cronbach_alpha needs N >= 3");
    double item_var = 0.0;
    for (auto j : scale) item_var += sample_variance(y.values.col(j));
    const double total_var = sample_variance(total(y, scale));
    if (!(total_var > 0.0)) throw DataError("cronbach_alpha: zero total variance");
    const double k = static_cast<double>(scale.size());
    return k / (k - 1.0) * (1.0 - item_var / total_var);
}

std::string report_to_csv(const ItemTotalReport& report) {
    auto fmt_opt = [](const std::optional<double>& x) {
        return x && std::isfinite(*x) ? io::format_real(*x) : std::string{};
    };
    std::string out = "scale,word,within,between\n";
    for (const auto& i : report.items)
        out += io::csv_row({i.scale, i.word, fmt_opt(std::optional<double>(i.within)), fmt_opt(i.between)});
    out += "\nscale,alpha\n";
    for (const auto& s : report.scales) out += io::csv_row({s.scale, fmt_opt(s.alpha)});
    return out;
}

}  // namespace textpsy::items
