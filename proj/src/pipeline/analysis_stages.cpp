// Factor-analytic and item-analysis stages.

#include <fmt/format.h>

#include "artifacts.hpp"
#include "textpsy/error.hpp"
#include "textpsy/item_analysis.hpp"
#include "textpsy/pipeline.hpp"
#include "textpsy/score_matrix.hpp"
#include "textpsy/util/io.hpp"

namespace textpsy::pipeline {

using nlohmann::json;
using artifacts::LabeledMatrix;

namespace {

json summary_json(const factor::LoadingSummary& s) {
    json counts = json::array();
    for (const auto& c : s.counts)
        counts.push_back({{"cutoff", c.cutoff}, {"per_factor", c.per_factor}, {"mean_per_factor", c.mean_per_factor}});
    return {{"n_items", s.n_items},
            {"n_factors", s.n_factors},
            {"variance_ratio", s.variance_ratio},
            {"mean_factor_correlation", s.mean_factor_correlation},
            {"mean_abs_factor_correlation", s.mean_abs_factor_correlation},
            {"counts", counts}};
}

json rotation_json(const factor::RotationSpec& r) {
    return {{"criterion", factor::to_string(r.criterion)},
            {"epsilon", r.epsilon},
            {"gamma", r.gamma},
            {"n_starts", r.n_starts},
            {"seed", r.seed},
            {"tolerance", r.tolerance},
            {"max_iterations", r.max_iterations}};
}

json parallel_json(const factor::ParallelAnalysisOptions& p, int retained) {
    return {{"n_reps", p.n_reps},
            {"criterion", p.criterion == factor::PaCriterion::Mean ? "mean" : "p95"},
            {"observed", p.observed == factor::PaObserved::Reduced ? "reduced" : "full"},
            {"seed", p.seed},
            {"retained", retained}};
}

std::string parallel_csv(const factor::ParallelAnalysis& pa) {
    std::string out = io::csv_row({"rank", "observed", "observed_full", "reference"});
    for (Eigen::Index i = 0; i < pa.observed.size(); ++i)
        out += io::csv_row({std::to_string(i + 1), io::format_real(pa.observed(i)),
                            io::format_real(pa.observed_full(i)), io::format_real(pa.reference(i))});
    return out;
}

std::string top_words_csv(const factor::Matrix& loadings, const std::vector<std::string>& words,
                          const std::vector<std::string>& factors, std::size_t m) {
    std::string out = io::csv_row({"factor", "rank", "word", "loading"});
    for (Eigen::Index f = 0; f < loadings.cols(); ++f) {
        const auto top = factor::top_words(loadings, words, f, std::min(m, words.size()));
        for (std::size_t r = 0; r < top.size(); ++r)
            out += io::csv_row({factors[static_cast<std::size_t>(f)], std::to_string(r + 1), top[r].word,
                                io::format_real(top[r].loading)});
    }
    return out;
}

factor::ParallelAnalysisOptions parallel_options(const PipelineConfig& c, const char* component) {
    factor::ParallelAnalysisOptions p;
    p.n_reps = c.factor.n_reps;
    p.criterion = c.factor.criterion;
    p.observed = c.factor.observed;
    p.seed = derive_seed(c.seed, component);
    p.workers = c.effective_workers();
    return p;
}

factor::RotationSpec rotation_spec(const PipelineConfig& c, const char* component) {
    factor::RotationSpec r;
    r.criterion = c.factor.rotation;
    r.epsilon = c.factor.epsilon;
    r.gamma = c.factor.gamma;
    r.n_starts = c.factor.n_starts;
    r.seed = derive_seed(c.seed, component);
    return r;
}

factor::Vector column(const LabeledMatrix& m, const std::filesystem::path& p) {
    if (m.values.cols() != 1) throw DataError(p.string() + ": expected a single value column");
    return m.values.col(0);
}

}  // namespace

Pipeline::Outputs Pipeline::run_fa1() {
    const auto y = read_score_matrix(path(fa_input()));
    const auto r = factor::correlation_matrix(y);
    const auto j = static_cast<int>(r.size());
    const auto pa_opts = parallel_options(config_, "fa1.parallel");
    const auto pa = factor::parallel_analysis(y.n_docs(), r.values, pa_opts);
    const int k = config_.factor.n_factors.value_or(pa.n_factors);
    if (k < 1) throw NumericalError("parallel analysis retained no first-order factors");
    if (k >= j) throw ConfigError(fmt::format("cannot extract {} factors from {} items", k, j));

    const auto rot = rotation_spec(config_, "fa1.rotation");
    const auto sol = factor::fit_efa(r.values, k, rot);
    const auto summary = factor::solution_summary(sol, config_.factor.cutoffs);
    const factor::Matrix implied = sol.A * sol.C * sol.A.transpose() + factor::Matrix(sol.V.asDiagonal());
    const auto labels = artifacts::factor_labels("F", k);

    json summary_doc = summary_json(summary);
    summary_doc["n_obs"] = y.n_docs();
    summary_doc["converged"] = sol.converged;
    summary_doc["heywood"] = sol.heywood;
    summary_doc["max_offdiag_residual"] = factor::max_offdiag_residual(r.values, implied);

    const json solution = {
        {"kind", "first_order"},
        {"input", fa_input()},
        {"n_obs", y.n_docs()},
        {"n_items", j},
        {"K", k},
        {"K_source", config_.factor.n_factors ? "fixed" : "parallel_analysis"},
        {"parallel", parallel_json(pa_opts, pa.n_factors)},
        {"rotation", rotation_json(rot)},
        {"rotation_criterion", sol.rotation_criterion},
        {"converged", sol.converged},
        {"heywood", sol.heywood},
        {"files",
         {{"loadings", "fa1/loadings.csv"},
          {"factor_correlations", "fa1/factor_correlations.csv"},
          {"uniqueness", "fa1/uniqueness.csv"},
          {"parallel", "fa1/parallel.csv"},
          {"top_words", "fa1/top_words.csv"}}}};

    return {{"fa1/parallel.csv", parallel_csv(pa)},
            {"fa1/loadings.csv", LabeledMatrix{"word", r.words, labels, sol.A}.to_csv()},
            {"fa1/factor_correlations.csv", LabeledMatrix{"factor", labels, labels, sol.C}.to_csv()},
            {"fa1/uniqueness.csv", artifacts::vector_csv("word", "uniqueness", r.words, sol.V)},
            {"fa1/top_words.csv", top_words_csv(sol.A, r.words, labels, config_.factor.top_words)},
            {"fa1/summary.json", artifacts::dump(summary_doc)},
            {"fa1/solution.json", artifacts::dump(solution)}};
}

Pipeline::Outputs Pipeline::run_fa2() {
    const auto c = LabeledMatrix::from_csv(path("fa1/factor_correlations.csv"));
    const auto first = artifacts::read_json(path("fa1/solution.json"));
    factor::SecondOrderOptions opts;
    opts.n_factors = config_.factor.n_second_order;
    opts.n_obs = first.at("n_obs").get<Eigen::Index>();
    opts.parallel = parallel_options(config_, "fa2.parallel");
    opts.rotation = rotation_spec(config_, "fa2.rotation");
    const auto h = factor::second_order(c.values, opts);
    const auto labels = artifacts::factor_labels("G", h.L);

    json solution = {{"kind", "second_order"},
                     {"n_obs", opts.n_obs},
                     {"K", c.values.rows()},
                     {"L", h.L},
                     {"L_source", opts.n_factors ? "fixed" : "parallel_analysis"},
                     {"rotation", rotation_json(opts.rotation)},
                     {"converged", h.converged},
                     {"heywood", h.heywood},
                     {"files",
                      {{"loadings", "fa2/loadings.csv"},
                       {"factor_correlations", "fa2/factor_correlations.csv"},
                       {"uniqueness", "fa2/uniqueness.csv"}}}};
    Outputs out{{"fa2/loadings.csv", LabeledMatrix{"factor", c.rows, labels, h.B}.to_csv()},
                {"fa2/factor_correlations.csv", LabeledMatrix{"factor", labels, labels, h.O}.to_csv()},
                {"fa2/uniqueness.csv", artifacts::vector_csv("factor", "uniqueness", c.rows, h.U)}};
    if (h.parallel) {
        solution["parallel"] = parallel_json(opts.parallel, h.parallel->n_factors);
        solution["files"]["parallel"] = "fa2/parallel.csv";
        out.emplace_back("fa2/parallel.csv", parallel_csv(*h.parallel));
    }
    out.emplace_back("fa2/solution.json", artifacts::dump(solution));
    return out;
}

Pipeline::Outputs Pipeline::run_bifactor() {
    const auto a = LabeledMatrix::from_csv(path("fa1/loadings.csv"));
    const auto v = LabeledMatrix::from_csv(path("fa1/uniqueness.csv"));
    const auto b = LabeledMatrix::from_csv(path("fa2/loadings.csv"));
    const auto o = LabeledMatrix::from_csv(path("fa2/factor_correlations.csv"));
    const auto u = LabeledMatrix::from_csv(path("fa2/uniqueness.csv"));
    if (b.rows != a.cols || u.rows != a.cols || v.rows != a.rows)
        throw DataError("first- and second-order artifacts do not match; rerun fa2");

    const auto sl = factor::schmid_leiman(a.values, b.values, o.values, column(u, path("fa2/uniqueness.csv")),
                                          column(v, path("fa1/uniqueness.csv")));
    const auto summary = factor::solution_summary(sl, config_.factor.cutoffs);
    const json summary_doc = {{"general", summary_json(summary.general)},
                              {"minor", summary_json(summary.minor)},
                              {"total_variance_ratio", summary.total_variance_ratio}};
    const json solution = {{"kind", "bifactor"},
                           {"L", sl.general.cols()},
                           {"K", sl.minor.cols()},
                           {"files",
                            {{"general", "bifactor/general.csv"},
                             {"minor", "bifactor/minor.csv"},
                             {"general_correlations", "fa2/factor_correlations.csv"},
                             {"uniqueness", "bifactor/uniqueness.csv"},
                             {"top_words", "bifactor/top_words.csv"}}}};
    return {{"bifactor/general.csv", LabeledMatrix{"word", a.rows, b.cols, sl.general}.to_csv()},
            {"bifactor/minor.csv", LabeledMatrix{"word", a.rows, a.cols, sl.minor}.to_csv()},
            {"bifactor/uniqueness.csv", artifacts::vector_csv("word", "uniqueness", a.rows, sl.V)},
            {"bifactor/top_words.csv", top_words_csv(sl.general, a.rows, b.cols, config_.factor.top_words)},
            {"bifactor/summary.json", artifacts::dump(summary_doc)},
            {"bifactor/solution.json", artifacts::dump(solution)}};
}

Pipeline::Outputs Pipeline::run_items() {
    const auto y = read_score_matrix(path(fa_input()));
    const bool general = config_.items.source == "general";
    const auto loadings = LabeledMatrix::from_csv(path(general ? "bifactor/general.csv" : "fa1/loadings.csv"));
    if (loadings.rows != y.words) throw DataError("loadings do not match the score matrix; rerun the factor stages");

    const auto n = std::min<std::size_t>(config_.items.n_scales, static_cast<std::size_t>(loadings.values.cols()));
    const auto m = std::min(config_.items.items_per_scale, y.words.size() / n);
    if (m < 2) throw DataError("too few words for the requested number of scales");
    std::vector<Eigen::Index> factors;
    for (std::size_t f = 0; f < n; ++f) factors.push_back(static_cast<Eigen::Index>(f));
    auto scales = items::scales_from_loadings(loadings.values, loadings.rows, factors, m);
    for (std::size_t s = 0; s < scales.scales.size(); ++s) scales.scales[s].id = loadings.cols[s];
    scales.source = fmt::format("top-{} words of the {} {} loadings", m, n, general ? "general" : "first-order");
    scales.validate(y.n_words());

    const auto report = items::item_total(y, scales, config_.items.corrected);
    std::string scale_csv = io::csv_row({"scale", "word", "loading"});
    for (std::size_t s = 0; s < scales.scales.size(); ++s)
        for (auto c : scales.scales[s].items)
            scale_csv += io::csv_row({scales.scales[s].id, y.words[static_cast<std::size_t>(c)],
                                      io::format_real(loadings.values(c, static_cast<Eigen::Index>(s)))});
    return {{"items/scales.csv", scale_csv}, {"items/item_total.csv", items::report_to_csv(report)}};
}

}  // namespace textpsy::pipeline
