// Report and plot stages: read the persisted artifacts, never recompute them.

#include <fmt/format.h>

#include <filesystem>
#include <map>

#include "artifacts.hpp"
#include "textpsy/error.hpp"
#include "textpsy/pipeline.hpp"
#include "textpsy/plot.hpp"
#include "textpsy/score_matrix.hpp"
#include "textpsy/scores.hpp"
#include "textpsy/util/io.hpp"

namespace textpsy::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string f3(double x) { return fmt::format("{:.3f}", x); }

std::string counts_line(const json& summary) {
    std::string out;
    for (const auto& c : summary.at("counts")) {
        if (!out.empty()) out += "; ";
        out += fmt::format("|loading| > {}: {:.1f} per factor", c.at("cutoff").get<double>(),
                           c.at("mean_per_factor").get<double>());
    }
    return out;
}

// factor -> [(word, loading)] in rank order.
std::map<std::string, std::vector<std::pair<std::string, double>>> read_top_words(const fs::path& p) {
    std::map<std::string, std::vector<std::pair<std::string, double>>> out;
    const auto rows = io::read_csv(p);
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].size() != 4) throw DataError(fmt::format("{}: malformed row {}", p.string(), i + 1));
        out[rows[i][0]].emplace_back(rows[i][2], std::stod(rows[i][3]));
    }
    return out;
}

// Factors in numeric order (G2 before G10).
std::vector<std::string> ordered_factors(const std::map<std::string, std::vector<std::pair<std::string, double>>>& m) {
    std::vector<std::string> keys;
    for (const auto& [k, v] : m) keys.push_back(k);
    std::sort(keys.begin(), keys.end(), [](const std::string& a, const std::string& b) {
        if (a.size() != b.size()) return a.size() < b.size();
        return a < b;
    });
    return keys;
}

std::string top_words_table(const std::map<std::string, std::vector<std::pair<std::string, double>>>& top,
                            std::size_t max_factors, std::size_t max_rows) {
    auto factors = ordered_factors(top);
    if (factors.size() > max_factors) factors.resize(max_factors);
    std::string out = "| rank |";
    std::string rule = "|---:|";
    for (const auto& f : factors) {
        out += fmt::format(" {} |", f);
        rule += "---|";
    }
    out += "\n" + rule + "\n";
    for (std::size_t r = 0; r < max_rows; ++r) {
        bool any = false;
        std::string line = fmt::format("| {} |", r + 1);
        for (const auto& f : factors) {
            const auto& list = top.at(f);
            if (r < list.size()) {
                line += fmt::format(" {} ({}) |", list[r].first, f3(list[r].second));
                any = true;
            } else {
                line += " |";
            }
        }
        if (any) out += line + "\n";
    }
    return out;
}

struct ParallelColumns {
    std::vector<double> observed, reference;
};

ParallelColumns read_parallel(const fs::path& p) {
    ParallelColumns out;
    const auto rows = io::read_csv(p);
    for (std::size_t i = 1; i < rows.size(); ++i) {
        out.observed.push_back(std::stod(rows[i].at(1)));
        out.reference.push_back(std::stod(rows[i].at(3)));
    }
    return out;
}

}  // namespace

Pipeline::Outputs Pipeline::run_report() {
    const auto ingest = artifacts::read_json(path("ingest/summary.json"));
    const auto keywords = corpus::keywords_from_csv(path("keywords/keywords.csv"));
    const auto fa1 = artifacts::read_json(path("fa1/summary.json"));

    std::string md = "# Contextual score analysis\n\n";
    md += "## Corpus\n\n";
    md += fmt::format("- documents ingested: {}\n", ingest.at("ingested").get<std::size_t>());
    md += fmt::format("- removed as too short / too long: {} / {}\n", ingest.at("too_short").get<std::size_t>(),
                      ingest.at("too_long").get<std::size_t>());
    md += fmt::format("- documents retained: {}\n", ingest.at("retained").get<std::size_t>());
    md += fmt::format("- common keywords (items): {}\n\n", keywords.size());

    if (fs::exists(path("diagnose/summary.json"))) {
        const auto d = artifacts::read_json(path("diagnose/summary.json"));
        md += "## Score diagnostics\n\n";
        md += fmt::format("- mean pairwise correlation: {}\n", f3(d.at("mean_pairwise_r").get<double>()));
        md += fmt::format("- mean absolute pairwise correlation: {}\n", f3(d.at("mean_abs_pairwise_r").get<double>()));
        md += fmt::format("- words flagged for |skewness| > 2: {}\n", d.at("skew_flags").get<std::size_t>());
        md += fmt::format("- words flagged for |excess kurtosis| > 7: {}\n", d.at("kurtosis_flags").get<std::size_t>());
        md += fmt::format("- constant words: {}\n\n", d.at("constant_words").size());
    }
    if (fs::exists(path("filter/removed.csv"))) {
        const auto rows = io::read_csv(path("filter/removed.csv"));
        md += "## Collinearity filter\n\n";
        md += fmt::format("- words removed at |r| > {}: {}\n\n", config_.filter_threshold, rows.size() - 1);
    }

    md += "## First-order factor analysis\n\n";
    md += fmt::format("- input: {} ({} documents x {} words)\n", config_.factor.input,
                      fa1.at("n_obs").get<long>(), fa1.at("n_items").get<int>());
    md += fmt::format("- factors: {}\n", fa1.at("n_factors").get<int>());
    md += fmt::format("- total variance ratio: {}\n", f3(fa1.at("variance_ratio").get<double>()));
    md += fmt::format("- mean factor correlation: {} (absolute {})\n",
                      f3(fa1.at("mean_factor_correlation").get<double>()),
                      f3(fa1.at("mean_abs_factor_correlation").get<double>()));
    md += fmt::format("- loadings: {}\n\n", counts_line(fa1));

    if (fs::exists(path("fa2/solution.json"))) {
        const auto fa2 = artifacts::read_json(path("fa2/solution.json"));
        md += "## Second-order factor analysis\n\n";
        md += fmt::format("- second-order factors: {} (from {} first-order factors)\n\n", fa2.at("L").get<int>(),
                          fa2.at("K").get<int>());
    }
    if (fs::exists(path("bifactor/summary.json"))) {
        const auto b = artifacts::read_json(path("bifactor/summary.json"));
        md += "## Bifactor solution\n\n";
        md += "| part | factors | variance ratio | loadings |\n|---|---:|---:|---|\n";
        for (const char* part : {"general", "minor"}) {
            const auto& s = b.at(part);
            md += fmt::format("| {} | {} | {} | {} |\n", part, s.at("n_factors").get<int>(),
                              f3(s.at("variance_ratio").get<double>()), counts_line(s));
        }
        md += fmt::format("| total | | {} | |\n\n", f3(b.at("total_variance_ratio").get<double>()));
    }
    if (fs::exists(path("bifactor/top_words.csv"))) {
        md += "### Top words of the general factors\n\n";
        md += top_words_table(read_top_words(path("bifactor/top_words.csv")), 6, 10) + "\n";
    } else {
        md += "### Top words of the first-order factors\n\n";
        md += top_words_table(read_top_words(path("fa1/top_words.csv")), 6, 10) + "\n";
    }

    if (fs::exists(path("items/item_total.csv"))) {
        const auto rows = io::read_csv(path("items/item_total.csv"));
        md += "## Item-total correlations\n\n| scale | word | within | between |\n|---|---|---:|---:|\n";
        std::string alphas = "\n| scale | alpha |\n|---|---:|\n";
        bool in_alpha = false;
        for (std::size_t i = 1; i < rows.size(); ++i) {
            const auto& r = rows[i];
            if (r.size() == 2 && r[0] == "scale" && r[1] == "alpha") {
                in_alpha = true;
                continue;
            }
            auto num = [](const std::string& s) { return s.empty() ? std::string("-") : f3(std::stod(s)); };
            if (in_alpha)
                alphas += fmt::format("| {} | {} |\n", r.at(0), num(r.size() > 1 ? r[1] : ""));
            else
                md += fmt::format("| {} | {} | {} | {} |\n", r.at(0), r.at(1), num(r.at(2)),
                                  num(r.size() > 3 ? r[3] : ""));
        }
        md += alphas + "\n";
    }
    return {{"report/report.md", md}};
}

Pipeline::Outputs Pipeline::run_plot() {
    Outputs out;
    const auto fa1 = read_parallel(path("fa1/parallel.csv"));
    out.emplace_back("plots/scree_fa1.svg",
                     plot::scree_svg(fa1.observed, fa1.reference, "First-order scree with parallel analysis"));
    if (fs::exists(path("fa2/parallel.csv"))) {
        const auto fa2 = read_parallel(path("fa2/parallel.csv"));
        out.emplace_back("plots/scree_fa2.svg",
                         plot::scree_svg(fa2.observed, fa2.reference, "Second-order scree with parallel analysis"));
    }

    const auto top_path = fs::exists(path("bifactor/top_words.csv")) ? path("bifactor/top_words.csv")
                                                                     : path("fa1/top_words.csv");
    const auto top = read_top_words(top_path);
    const auto factors = ordered_factors(top);
    if (factors.empty()) throw DataError(top_path.string() + ": no top words");
    const auto& lead = top.at(factors.front());

    const auto y = read_score_matrix(path(fa_input()));
    std::vector<Eigen::Index> cols;
    std::vector<std::string> names;
    for (std::size_t i = 0; i < lead.size() && cols.size() < 5; ++i) {
        const auto c = y.column_of(lead[i].first);
        if (c < 0) throw DataError(fmt::format("word \"{}\" missing from the score matrix", lead[i].first));
        cols.push_back(c);
        names.push_back(lead[i].first);
    }
    const auto sub = y.select_columns(cols);
    out.emplace_back("plots/scatter_density.svg",
                     plot::scatter_density_svg(sub.values, names,
                                               fmt::format("Top words of {}: scores and densities", factors.front())));

    const auto [first, second] = scores::split_halves(y.n_docs(), derive_seed(config_.seed, "diagnose.split"));
    const auto col = y.values.col(cols.front());
    std::vector<plot::Series> series{{"full data", {col.data(), col.data() + col.size()}}, {"half 1", {}},
                                     {"half 2", {}}};
    for (auto i : first) series[1].values.push_back(col(i));
    for (auto i : second) series[2].values.push_back(col(i));
    out.emplace_back("plots/density_overlay.svg",
                     plot::density_overlay_svg(series, fmt::format("Density of \"{}\": full and split data",
                                                                   names.front())));
    return out;
}

}  // namespace textpsy::pipeline
