#include "textpsy/plot.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "textpsy/error.hpp"

namespace textpsy::plot {

namespace {

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

std::string header(double w, double h, const std::string& title) {
    return fmt::format(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0:.0f}\" height=\"{1:.0f}\" viewBox=\"0 0 {0:.0f} {1:.0f}\" "
        "font-family=\"sans-serif\" font-size=\"11\">\n"
        "<title>{2}</title>\n"
        "<rect x=\"0\" y=\"0\" width=\"{0:.0f}\" height=\"{1:.0f}\" fill=\"white\"/>\n"
        "<text x=\"{3:.1f}\" y=\"18\" text-anchor=\"middle\" font-size=\"14\">{2}</text>\n",
        w, h, escape(title), w / 2);
}

struct Range {
    double lo = 0.0, hi = 1.0;

    static Range of(const std::vector<double>& v) {
        Range r{*std::min_element(v.begin(), v.end()), *std::max_element(v.begin(), v.end())};
        if (!(r.hi > r.lo)) {
            r.lo -= 0.5;
            r.hi += 0.5;
        }
        return r;
    }
    double at(double x, double p0, double p1) const { return p0 + (x - lo) / (hi - lo) * (p1 - p0); }
};

// Panel box in pixels.
struct Box {
    double x0, y0, x1, y1;
};

std::string polyline(const std::vector<double>& xs, const std::vector<double>& ys, const Range& rx, const Range& ry,
                     const Box& b, const char* color, const char* extra = "") {
    std::string pts;
    for (std::size_t i = 0; i < xs.size(); ++i)
        pts += fmt::format("{}{:.2f},{:.2f}", i ? " " : "", rx.at(xs[i], b.x0, b.x1), ry.at(ys[i], b.y1, b.y0));
    return fmt::format("<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\"{}/>\n", pts, color,
                       extra);
}

std::string frame(const Box& b) {
    return fmt::format("<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" fill=\"none\" "
                       "stroke=\"#444\"/>\n",
                       b.x0, b.y0, b.x1 - b.x0, b.y1 - b.y0);
}

std::string ticks(const Range& rx, const Range& ry, const Box& b) {
    std::string out;
    for (int i = 0; i <= 4; ++i) {
        const double fx = rx.lo + (rx.hi - rx.lo) * i / 4.0;
        const double fy = ry.lo + (ry.hi - ry.lo) * i / 4.0;
        const double px = rx.at(fx, b.x0, b.x1), py = ry.at(fy, b.y1, b.y0);
        out += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"middle\">{:.3g}</text>\n", px, b.y1 + 14,
                           fx);
        out += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"end\">{:.3g}</text>\n", b.x0 - 4, py + 4,
                           fy);
    }
    return out;
}

std::vector<double> linspace(double lo, double hi, std::size_t n) {
    std::vector<double> g(n);
    for (std::size_t i = 0; i < n; ++i) g[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    return g;
}

std::vector<double> density_grid(const std::vector<double>& sample) {
    const double h = silverman_bandwidth(sample);
    const auto r = Range::of(sample);
    return linspace(r.lo - 3 * h, r.hi + 3 * h, 200);
}

void require_values(const std::vector<double>& v, const char* what) {
    if (v.empty()) throw DataError(fmt::format("plot: empty {}", what));
    for (double x : v)
        if (!std::isfinite(x)) throw DataError(fmt::format("plot: non-finite value in {}", what));
}

}  // namespace

double silverman_bandwidth(const std::vector<double>& sample) {
    const auto n = static_cast<double>(sample.size());
    if (sample.size() < 2) return 1.0;
    double mean = 0.0;
    for (double x : sample) mean += x;
    mean /= n;
    double ss = 0.0;
    for (double x : sample) ss += (x - mean) * (x - mean);
    const double sd = std::sqrt(ss / (n - 1));
    auto sorted = sample;
    std::sort(sorted.begin(), sorted.end());
    auto quantile = [&](double p) {
        const double h = (n - 1) * p;
        const auto lo = static_cast<std::size_t>(std::floor(h));
        const auto hi = std::min(lo + 1, sorted.size() - 1);
        return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
    };
    const double iqr = quantile(0.75) - quantile(0.25);
    double spread = iqr > 0.0 ? std::min(sd, iqr / 1.34) : sd;
    if (!(spread > 0.0)) spread = 1.0;
    return 0.9 * spread * std::pow(n, -0.2);
}

std::vector<double> kde(const std::vector<double>& sample, const std::vector<double>& grid) {
    require_values(sample, "sample");
    const double h = silverman_bandwidth(sample);
    const double norm = 1.0 / (static_cast<double>(sample.size()) * h * std::sqrt(2.0 * std::numbers::pi));
    std::vector<double> out(grid.size(), 0.0);
    for (std::size_t g = 0; g < grid.size(); ++g) {
        double s = 0.0;
        for (double x : sample) {
            const double z = (grid[g] - x) / h;
            s += std::exp(-0.5 * z * z);
        }
        out[g] = s * norm;
    }
    return out;
}

std::string scree_svg(const std::vector<double>& observed, const std::vector<double>& reference,
                      const std::string& title) {
    require_values(observed, "observed eigenvalues");
    if (!reference.empty() && reference.size() != observed.size())
        throw DataError("plot: reference and observed eigenvalues differ in length");
    const double w = 640, h = 420;
    const Box b{60, 40, w - 20, h - 50};
    std::vector<double> ranks(observed.size());
    for (std::size_t i = 0; i < ranks.size(); ++i) ranks[i] = static_cast<double>(i + 1);
    std::vector<double> all = observed;
    all.insert(all.end(), reference.begin(), reference.end());
    all.push_back(0.0);
    const Range rx{1.0, std::max(2.0, static_cast<double>(observed.size()))};
    const auto ry = Range::of(all);

    std::string out = header(w, h, title) + frame(b) + ticks(rx, ry, b);
    out += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"middle\">rank</text>\n", (b.x0 + b.x1) / 2,
                       h - 12);
    out += fmt::format("<text x=\"14\" y=\"{:.1f}\" transform=\"rotate(-90 14 {:.1f})\" "
                       "text-anchor=\"middle\">eigenvalue</text>\n",
                       (b.y0 + b.y1) / 2, (b.y0 + b.y1) / 2);
    out += "<g id=\"observed\">\n" + polyline(ranks, observed, rx, ry, b, kPalette[0]);
    for (std::size_t i = 0; i < observed.size(); ++i)
        out += fmt::format("<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"2.5\" fill=\"{}\"/>\n",
                           rx.at(ranks[i], b.x0, b.x1), ry.at(observed[i], b.y1, b.y0), kPalette[0]);
    out += "</g>\n";
    if (!reference.empty())
        out += "<g id=\"reference\">\n" +
               polyline(ranks, reference, rx, ry, b, kPalette[1], " stroke-dasharray=\"5,3\"") + "</g>\n";
    out += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" fill=\"{}\">observed</text>\n", b.x1 - 110, b.y0 + 16,
                       kPalette[0]);
    if (!reference.empty())
        out += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" fill=\"{}\">parallel analysis</text>\n", b.x1 - 110,
                           b.y0 + 30, kPalette[1]);
    return out + "</svg>\n";
}

std::string scatter_density_svg(const Eigen::MatrixXd& data, const std::vector<std::string>& names,
                                const std::string& title) {
    const auto p = data.cols();
    if (p == 0 || data.rows() == 0) throw DataError("plot: empty data for scatter matrix");
    if (static_cast<std::size_t>(p) != names.size()) throw DataError("plot: one name per column required");
    if (!data.allFinite()) throw DataError("plot: non-finite value in scatter data");
    const double cell = 130, margin = 50;
    const double w = margin + cell * static_cast<double>(p) + 10, h = margin + cell * static_cast<double>(p) + 10;
    std::vector<std::vector<double>> cols(static_cast<std::size_t>(p));
    std::vector<Range> ranges;
    for (Eigen::Index c = 0; c < p; ++c) {
        cols[static_cast<std::size_t>(c)].assign(data.col(c).data(), data.col(c).data() + data.rows());
        ranges.push_back(Range::of(cols[static_cast<std::size_t>(c)]));
    }
    std::string out = header(w, h, title);
    for (Eigen::Index i = 0; i < p; ++i) {
        for (Eigen::Index j = 0; j <= i; ++j) {
            const Box b{margin + cell * static_cast<double>(j) + 4, margin + cell * static_cast<double>(i) + 4,
                        margin + cell * static_cast<double>(j + 1) - 4, margin + cell * static_cast<double>(i + 1) - 4};
            out += frame(b);
            const auto& rx = ranges[static_cast<std::size_t>(j)];
            if (i == j) {
                const auto& v = cols[static_cast<std::size_t>(i)];
                const auto grid = linspace(rx.lo, rx.hi, 100);
                const auto d = kde(v, grid);
                out += fmt::format("<g class=\"density\" id=\"density-{}\">\n", i) +
                       polyline(grid, d, rx, Range::of(d), b, kPalette[0]) + "</g>\n";
                out += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"middle\">{}</text>\n",
                                   (b.x0 + b.x1) / 2, b.y0 + 12, escape(names[static_cast<std::size_t>(i)]));
            } else {
                const auto& ry = ranges[static_cast<std::size_t>(i)];
                out += fmt::format("<g class=\"scatter\" id=\"scatter-{}-{}\" fill=\"{}\" fill-opacity=\"0.5\">\n", i,
                                   j, kPalette[0]);
                for (Eigen::Index r = 0; r < data.rows(); ++r)
                    out += fmt::format("<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"1.5\"/>\n",
                                       rx.at(data(r, j), b.x0, b.x1), ry.at(data(r, i), b.y1, b.y0));
                out += "</g>\n";
            }
        }
    }
    return out + "</svg>\n";
}

std::string density_overlay_svg(const std::vector<Series>& series, const std::string& title) {
    if (series.empty()) throw DataError("plot: no series for density overlay");
    std::vector<double> pooled;
    for (const auto& s : series) {
        require_values(s.values, "density series");
        pooled.insert(pooled.end(), s.values.begin(), s.values.end());
    }
    const auto grid = density_grid(pooled);
    std::vector<std::vector<double>> curves;
    std::vector<double> all_y{0.0};
    for (const auto& s : series) {
        curves.push_back(kde(s.values, grid));
        all_y.insert(all_y.end(), curves.back().begin(), curves.back().end());
    }
    const double w = 640, h = 420;
    const Box b{60, 40, w - 20, h - 50};
    const Range rx{grid.front(), grid.back()};
    const auto ry = Range::of(all_y);
    std::string out = header(w, h, title) + frame(b) + ticks(rx, ry, b);
    for (std::size_t k = 0; k < series.size(); ++k) {
        const char* color = kPalette[k % std::size(kPalette)];
        out += fmt::format("<g class=\"curve\" id=\"curve-{}\">\n", k) + polyline(grid, curves[k], rx, ry, b, color) +
               "</g>\n";
        out += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" fill=\"{}\">{}</text>\n", b.x1 - 140,
                           b.y0 + 16 + 14 * static_cast<double>(k), color, escape(series[k].name));
    }
    return out + "</svg>\n";
}

}  // namespace textpsy::plot
