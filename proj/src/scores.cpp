#include "textpsy/scores.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "textpsy/error.hpp"
#include "textpsy/factor.hpp"
#include "textpsy/util/io.hpp"
#include "textpsy/util/log.hpp"
#include "textpsy/util/parallel.hpp"
#include "textpsy/util/rng.hpp"

namespace textpsy::scores {

double contextual_score(const embedding::EmbeddingVector& cce, const embedding::EmbeddingVector& doc) {
    if (cce.dim() != doc.dim())
        throw DataError(fmt::format("contextual_score: dimension mismatch ({} vs {})", cce.dim(), doc.dim()));
    double sum = 0.0;
    for (std::size_t t = 0; t < cce.dim(); ++t)
        sum += static_cast<double>(cce.values[t]) * static_cast<double>(doc.values[t]);
    return sum;
}

ScoreMatrix build_score_matrix(const std::vector<corpus::RawDocument>& docs, const std::vector<std::string>& words,
                               embedding::Backend& backend, const BuildOptions& options) {
    if (words.empty()) throw DataError("build_score_matrix: empty keyword set");
    const auto info = backend.info();
    ScoreMatrix y;
    y.values.resize(static_cast<Eigen::Index>(docs.size()), static_cast<Eigen::Index>(words.size()));
    y.words = words;
    for (const auto& d : docs) y.doc_ids.push_back(d.id);

    parallel_for(docs.size(), options.workers, [&](std::size_t i) {
        const auto& doc = docs[i];
        embedding::EmbeddingVector h;
        try {
            h = embedding::fetch_doc_embedding(backend, doc.text, options.pooling);
        } catch (const BackendError& e) {
            throw BackendError(fmt::format("document \"{}\": {}", doc.id, e.what()));
        }
        std::vector<embedding::EmbedRequest> batch;
        batch.reserve(words.size());
        for (const auto& w : words) batch.push_back({options.form, w, doc.text, options.pooling});
        const auto responses = backend.embed_batch(batch);
        if (responses.size() != words.size()) throw BackendError("backend returned a malformed batch");
        for (std::size_t j = 0; j < words.size(); ++j) {
            const auto& r = responses[j];
            try {
                if (!r.ok()) throw BackendError(r.error);
                embedding::check_vector(r.cce, info, "cce");
            } catch (const BackendError& e) {
                throw BackendError(fmt::format("document \"{}\", word \"{}\": {}", doc.id, words[j], e.what()));
            }
            y.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = contextual_score(r.cce, h);
        }
    });
    y.validate();
    return y;
}

double ks_statistic(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) return 0.0;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        const double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= x) ++i;
        while (j < b.size() && b[j] <= x) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    return d;
}

std::pair<std::vector<Eigen::Index>, std::vector<Eigen::Index>> split_halves(Eigen::Index n, std::uint64_t seed) {
    std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng(seed);
    for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
    const auto half = perm.begin() + n / 2;
    return {{perm.begin(), half}, {half, perm.end()}};
}

ScoreDiagnostics diagnostics(const ScoreMatrix& y, std::uint64_t seed) {
    const Eigen::Index n = y.n_docs();
    if (n < 4) throw DataError("diagnostics needs N >= 4");
    const auto [first, second] = split_halves(n, seed);

    ScoreDiagnostics out;
    out.words.resize(static_cast<std::size_t>(y.n_words()));
    std::vector<Eigen::Index> varying;
    for (Eigen::Index j = 0; j < y.n_words(); ++j) {
        auto& w = out.words[static_cast<std::size_t>(j)];
        w.word = y.words[static_cast<std::size_t>(j)];
        const auto col = y.values.col(j);
        const double mean = col.mean();
        const double m2 = (col.array() - mean).square().mean();
        if (!(m2 > 0.0)) {
            w.constant = true;
            out.constant_words.push_back(w.word);
            log::warn(fmt::format("word \"{}\" has constant scores", w.word));
            continue;
        }
        const double m3 = (col.array() - mean).cube().mean();
        const double m4 = (col.array() - mean).square().square().mean();
        w.skewness = m3 / std::pow(m2, 1.5);
        w.excess_kurtosis = m4 / (m2 * m2) - 3.0;
        w.skew_flag = std::abs(w.skewness) > kSkewFlag;
        w.kurtosis_flag = std::abs(w.excess_kurtosis) > kKurtosisFlag;
        std::vector<double> a, b;
        for (auto i : first) a.push_back(col(i));
        for (auto i : second) b.push_back(col(i));
        w.split_half_ks = ks_statistic(std::move(a), std::move(b));
        varying.push_back(j);
    }

    if (varying.size() >= 2) {
        Eigen::MatrixXd sub(n, static_cast<Eigen::Index>(varying.size()));
        for (std::size_t k = 0; k < varying.size(); ++k) sub.col(static_cast<Eigen::Index>(k)) = y.values.col(varying[k]);
        const auto r = factor::pearson(sub);
        double sum = 0.0, abs_sum = 0.0;
        std::size_t pairs = 0;
        for (Eigen::Index i = 0; i < r.rows(); ++i)
            for (Eigen::Index j = i + 1; j < r.cols(); ++j) {
                sum += r(i, j);
                abs_sum += std::abs(r(i, j));
                ++pairs;
            }
        out.mean_pairwise_r = sum / static_cast<double>(pairs);
        out.mean_abs_pairwise_r = abs_sum / static_cast<double>(pairs);
    }
    return out;
}

std::string diagnostics_to_csv(const ScoreDiagnostics& d) {
    std::string out = "word,skewness,excess_kurtosis,split_half_ks,constant,skew_flag,kurtosis_flag\n";
    for (const auto& w : d.words)
        out += io::csv_row({w.word, io::format_real(w.skewness), io::format_real(w.excess_kurtosis),
                            io::format_real(w.split_half_ks), w.constant ? "1" : "0", w.skew_flag ? "1" : "0",
                            w.kurtosis_flag ? "1" : "0"});
    return out;
}

FilterResult collinearity_filter(const ScoreMatrix& y, const corpus::KeywordSet& keywords, double threshold) {
    const Eigen::Index j = y.n_words();
    std::vector<std::size_t> occ(static_cast<std::size_t>(j));
    {
        std::unordered_map<std::string, std::size_t> lookup;
        for (const auto& e : keywords.entries) lookup.emplace(e.word, e.occurrences);
        for (Eigen::Index c = 0; c < j; ++c) {
            const auto& w = y.words[static_cast<std::size_t>(c)];
            const auto it = lookup.find(w);
            if (it == lookup.end()) throw DataError(fmt::format("collinearity_filter: \"{}\" not in keyword set", w));
            occ[static_cast<std::size_t>(c)] = it->second;
        }
    }
    const auto r = factor::correlation_matrix(y).values;

    struct Pair {
        Eigen::Index a, b;
        double r;
    };
    std::vector<Pair> pairs;
    for (Eigen::Index a = 0; a < j; ++a)
        for (Eigen::Index b = a + 1; b < j; ++b)
            if (std::abs(r(a, b)) > threshold) pairs.push_back({a, b, r(a, b)});
    std::stable_sort(pairs.begin(), pairs.end(),
                     [](const Pair& x, const Pair& z) { return std::abs(x.r) > std::abs(z.r); });

    FilterResult out;
    out.report.threshold = threshold;
    std::vector<bool> removed(static_cast<std::size_t>(j), false);
    for (const auto& p : pairs) {
        const auto a = static_cast<std::size_t>(p.a), b = static_cast<std::size_t>(p.b);
        if (removed[a] || removed[b]) continue;
        std::size_t drop;
        if (occ[a] != occ[b])
            drop = occ[a] < occ[b] ? a : b;
        else
            drop = y.words[a] > y.words[b] ? a : b;
        const std::size_t keep = drop == a ? b : a;
        removed[drop] = true;
        out.report.removed.push_back({y.words[keep], y.words[drop], p.r});
    }
    std::vector<Eigen::Index> kept;
    for (Eigen::Index c = 0; c < j; ++c)
        if (!removed[static_cast<std::size_t>(c)]) kept.push_back(c);
    out.filtered = y.select_columns(kept);
    return out;
}

std::string filter_report_to_csv(const FilterReport& report) {
    std::string out = "kept,removed,r\n";
    for (const auto& p : report.removed) out += io::csv_row({p.kept, p.removed, io::format_real(p.r)});
    return out;
}

}  // namespace textpsy::scores
