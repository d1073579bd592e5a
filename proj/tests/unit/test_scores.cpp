#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "support.hpp"
#include "textpsy/error.hpp"
#include "textpsy/score_matrix.hpp"
#include "textpsy/scores.hpp"

using namespace textpsy;
using namespace textpsy::scores;
using embedding::EmbeddingVector;

namespace {

double pearson(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    const double mx = x.mean(), my = y.mean();
    double sxy = 0, sxx = 0, syy = 0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        sxy += (x(i) - mx) * (y(i) - my);
        sxx += (x(i) - mx) * (x(i) - mx);
        syy += (y(i) - my) * (y(i) - my);
    }
    return sxy / std::sqrt(sxx * syy);
}

ScoreMatrix labeled(Eigen::MatrixXd values, std::vector<std::string> words) {
    ScoreMatrix y;
    y.values = std::move(values);
    y.words = std::move(words);
    for (Eigen::Index i = 0; i < y.values.rows(); ++i) y.doc_ids.push_back("d" + std::to_string(i));
    return y;
}

// Replays the removal rule by repeatedly taking the strongest surviving pair.
std::set<std::string> brute_force_survivors(const ScoreMatrix& y, const corpus::KeywordSet& kw, double thr) {
    const auto j = y.n_words();
    std::vector<bool> alive(static_cast<std::size_t>(j), true);
    for (;;) {
        double best = -1;
        Eigen::Index ba = -1, bb = -1;
        for (Eigen::Index a = 0; a < j; ++a)
            for (Eigen::Index b = a + 1; b < j; ++b) {
                if (!alive[a] || !alive[b]) continue;
                const double r = std::abs(pearson(y.values.col(a), y.values.col(b)));
                if (r > thr && r > best + 1e-15) {
                    best = r;
                    ba = a;
                    bb = b;
                }
            }
        if (ba < 0) break;
        const auto oa = kw.occurrences(y.words[ba]), ob = kw.occurrences(y.words[bb]);
        Eigen::Index drop;
        if (oa != ob)
            drop = oa < ob ? ba : bb;
        else
            drop = y.words[ba] > y.words[bb] ? ba : bb;
        alive[drop] = false;
    }
    std::set<std::string> out;
    for (Eigen::Index c = 0; c < j; ++c)
        if (alive[c]) out.insert(y.words[c]);
    return out;
}

}  // namespace

TEST_SUITE("contextual score") {
    TEST_CASE("dot products") {
        CHECK(contextual_score({{1, 2}}, {{3, 4}}) == 11.0);
        CHECK(contextual_score({{1, 0}}, {{0, 5}}) == 0.0);
        const float h = static_cast<float>(std::sqrt(0.5));
        CHECK(contextual_score({{h, h}}, {{h, h}}) == doctest::Approx(1.0).epsilon(1e-6));
    }

    TEST_CASE("score matrix equals entrywise recomputation") {
        embedding::MockBackend m(21, 32);
        const std::vector<corpus::RawDocument> docs{{"a", "stars orbit the galaxy"}, {"b", "acid and zinc react"}};
        const std::vector<std::string> words{"star", "zinc"};
        BuildOptions opt;
        opt.form = embedding::RephrasingForm::shipped(3);
        const auto y = build_score_matrix(docs, words, m, opt);
        REQUIRE(y.n_docs() == 2);
        REQUIRE(y.n_words() == 2);
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) {
                const auto cce = embedding::fetch_cce(m, opt.form, words[j], docs[i].text);
                const auto doc = embedding::fetch_doc_embedding(m, docs[i].text, opt.pooling);
                CHECK(y.values(i, j) == contextual_score(cce, doc));
            }
    }

    TEST_CASE("document order permutes rows; worker count changes nothing") {
        embedding::MockBackend m(22, 16);
        std::vector<corpus::RawDocument> docs;
        for (int i = 0; i < 7; ++i) docs.push_back({"d" + std::to_string(i), "text number " + std::to_string(i * i)});
        const std::vector<std::string> words{"text", "number", "zeta"};
        const auto y = build_score_matrix(docs, words, m);
        auto reversed = docs;
        std::reverse(reversed.begin(), reversed.end());
        BuildOptions opt;
        opt.workers = 3;
        const auto r = build_score_matrix(reversed, words, m, opt);
        for (int i = 0; i < 7; ++i) CHECK(r.values.row(6 - i) == y.values.row(i));
        CHECK(r.doc_ids.front() == "d6");
    }

    TEST_CASE("a failing item names the document and word") {
        embedding::MockBackend m(23, 8, 30);
        std::string long_text;
        for (int i = 0; i < 40; ++i) long_text += "x ";
        try {
            build_score_matrix({{"ok", "fine"}, {"big", long_text}}, {"w"}, m);
            FAIL("expected BackendError");
        } catch (const BackendError& e) {
            CHECK(std::string(e.what()).find("\"big\"") != std::string::npos);
        }
    }
}

TEST_SUITE("score matrix io") {
    TEST_CASE("csv and binary round trips") {
        test::TempDir dir("sm");
        auto y = labeled(Eigen::MatrixXd{{1.5, -2.25}, {1e-12, 3.0}, {0.1, 7.0}}, {"alpha", "beta,gamma"});
        test::write(dir / "y.csv", to_csv(y));
        const auto c = score_matrix_from_csv(dir / "y.csv");
        CHECK(c.words == y.words);
        CHECK(c.doc_ids == y.doc_ids);
        CHECK(c.values.isApprox(y.values, 1e-8));
        test::write(dir / "y.bin", to_binary(y));
        const auto b = read_score_matrix(dir / "y.bin");
        CHECK(b.values == y.values);
        CHECK(b.words == y.words);
    }

    TEST_CASE("validation") {
        auto y = labeled(Eigen::MatrixXd::Zero(2, 2), {"a", "a"});
        CHECK_THROWS_AS(y.validate(), DataError);
        y.words = {"a", "b"};
        y.values(0, 0) = NAN;
        CHECK_THROWS_AS(y.validate(), DataError);
        y.values(0, 0) = 0;
        y.doc_ids.pop_back();
        CHECK_THROWS_AS(y.validate(), DataError);
    }
}

TEST_SUITE("diagnostics") {
    TEST_CASE("symmetric column has zero skewness; moments match a hand computation") {
        Eigen::MatrixXd v(8, 2);
        v.col(0) << -1, 0, 1, 0, -1, 0, 1, 0;
        v.col(1) << 0, 0, 0, 0, 0, 0, 0, 10;
        const auto d = diagnostics(labeled(v, {"sym", "spike"}), 1);
        CHECK(std::abs(d.words[0].skewness) < 1e-12);
        // One spike among n values: g1 = (n-2)/sqrt(n-1), g2 = (n^2-3n+3)/(n-1) - 3.
        const double n = 8;
        CHECK(d.words[1].skewness == doctest::Approx((n - 2) / std::sqrt(n - 1)).epsilon(1e-12));
        CHECK(d.words[1].excess_kurtosis == doctest::Approx((n * n - 3 * n + 3) / (n - 1) - 3).epsilon(1e-12));
        CHECK(d.words[1].skew_flag);
        CHECK_FALSE(d.words[0].skew_flag);
    }

    TEST_CASE("constant columns are reported and excluded from the pairwise mean") {
        Eigen::MatrixXd v(4, 3);
        v << 1, 5, 2, 2, 5, 4, 3, 5, 6, 4, 5, 8;
        const auto d = diagnostics(labeled(v, {"x", "flat", "y"}), 2);
        CHECK(d.constant_words == std::vector<std::string>{"flat"});
        CHECK(d.words[1].constant);
        CHECK(d.mean_pairwise_r == doctest::Approx(1.0));
        CHECK(d.mean_abs_pairwise_r == doctest::Approx(1.0));
    }

    TEST_CASE("ks statistic") {
        CHECK(ks_statistic({1, 2, 3, 3}, {3, 1, 3, 2}) == 0.0);
        CHECK(ks_statistic({1, 2}, {3, 4}) == 1.0);
        CHECK(ks_statistic({1, 2, 3, 4}, {3, 4, 5, 6}) == doctest::Approx(0.5));
    }

    TEST_CASE("split halves partition the rows and depend only on the seed") {
        const auto [a, b] = split_halves(11, 5);
        CHECK(a.size() == 5);
        CHECK(b.size() == 6);
        std::set<Eigen::Index> all(a.begin(), a.end());
        all.insert(b.begin(), b.end());
        CHECK(all.size() == 11);
        CHECK(split_halves(11, 5).first == a);
        CHECK(split_halves(11, 6).first != a);
    }

    TEST_CASE("a column whose halves are the same multiset has ks 0") {
        const Eigen::Index n = 10;
        const auto [first, second] = split_halves(n, 3);
        Eigen::MatrixXd v(n, 2);
        for (std::size_t k = 0; k < first.size(); ++k) {
            v(first[k], 0) = static_cast<double>(k);
            v(second[k], 0) = static_cast<double>(k);
        }
        for (Eigen::Index i = 0; i < n; ++i) v(i, 1) = static_cast<double>(i * i);
        const auto d = diagnostics(labeled(v, {"mirror", "other"}), 3);
        CHECK(d.words[0].split_half_ks == 0.0);
    }
}

TEST_SUITE("collinearity filter") {
    TEST_CASE("the rarer word of a strong pair goes") {
        Eigen::MatrixXd v(5, 2);
        v << 1, 1.1, 2, 2.3, 3, 2.9, 4, 4.2, 5, 4.8;
        const auto y = labeled(v, {"w1", "w2"});
        const corpus::KeywordSet kw{{{"w1", 20}, {"w2", 5}}};
        const auto res = collinearity_filter(y, kw, 0.8);
        CHECK(res.filtered.words == std::vector<std::string>{"w1"});
        REQUIRE(res.report.removed.size() == 1);
        CHECK(res.report.removed[0].removed == "w2");
        CHECK(res.report.removed[0].kept == "w1");

        // Equal occurrences: the lexicographically greater word goes.
        const corpus::KeywordSet tie{{{"w1", 7}, {"w2", 7}}};
        CHECK(collinearity_filter(y, tie, 0.8).filtered.words == std::vector<std::string>{"w1"});
    }

    TEST_CASE("pairs at or below the threshold survive") {
        // x = [1,2,3,4], y = [1,3,2,4] has r = 0.8.
        Eigen::MatrixXd v(4, 2);
        v << 1, 1, 2, 3, 3, 2, 4, 4;
        const auto y = labeled(v, {"a", "b"});
        const corpus::KeywordSet kw{{{"a", 3}, {"b", 2}}};
        CHECK(collinearity_filter(y, kw, 0.81).filtered.n_words() == 2);
        CHECK(collinearity_filter(y, kw, 0.79).filtered.n_words() == 1);
    }

    TEST_CASE("three mutually correlated words follow the greedy order") {
        std::mt19937_64 gen(31);
        std::normal_distribution<double> z;
        const int n = 300;
        Eigen::MatrixXd v(n, 3);
        for (int i = 0; i < n; ++i) {
            const double f = z(gen);
            v(i, 0) = f + 0.20 * z(gen);
            v(i, 1) = f + 0.25 * z(gen);
            v(i, 2) = f + 0.30 * z(gen);
        }
        const auto y = labeled(v, {"p", "q", "r"});
        const corpus::KeywordSet kw{{{"p", 10}, {"q", 10}, {"r", 3}}};
        for (Eigen::Index a = 0; a < 3; ++a)
            for (Eigen::Index b = a + 1; b < 3; ++b) REQUIRE(pearson(v.col(a), v.col(b)) > 0.8);
        const auto res = collinearity_filter(y, kw, 0.8);
        const auto expected = brute_force_survivors(y, kw, 0.8);
        CHECK(std::set<std::string>(res.filtered.words.begin(), res.filtered.words.end()) == expected);
        CHECK(expected.size() == 1);
    }

    TEST_CASE("matches the brute-force replay on random instances") {
        std::mt19937_64 gen(32);
        std::normal_distribution<double> z;
        std::uniform_int_distribution<int> occ(1, 6);
        for (int rep = 0; rep < 30; ++rep) {
            const int n = 60, j = 8;
            Eigen::MatrixXd v(n, j);
            for (int i = 0; i < n; ++i) {
                const double f = z(gen), g = z(gen);
                for (int c = 0; c < j; ++c) v(i, c) = (c % 2 ? f : g) + (0.2 + 0.1 * c) * z(gen);
            }
            std::vector<std::string> words;
            corpus::KeywordSet kw;
            for (int c = 0; c < j; ++c) {
                words.push_back(std::string(1, static_cast<char>('a' + c)));
                kw.entries.push_back({words.back(), static_cast<std::size_t>(occ(gen))});
            }
            const auto y = labeled(v, words);
            const auto res = collinearity_filter(y, kw, 0.8);
            CHECK(std::set<std::string>(res.filtered.words.begin(), res.filtered.words.end()) ==
                  brute_force_survivors(y, kw, 0.8));
        }
    }

    TEST_CASE("a word missing from the keyword set is a data error") {
        const auto y = labeled(Eigen::MatrixXd{{1, 2}, {2, 1}, {3, 5}}, {"a", "b"});
        CHECK_THROWS_AS(collinearity_filter(y, corpus::KeywordSet{{{"a", 1}}}, 0.8), DataError);
    }
}
