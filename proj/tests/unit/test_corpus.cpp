#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "support.hpp"
#include "textpsy/corpus.hpp"
#include "textpsy/error.hpp"

using namespace textpsy;
using namespace textpsy::corpus;

namespace {

TokenizedDocument doc(const std::string& id, std::vector<std::string> lemmas) {
    TokenizedDocument d;
    d.id = id;
    d.token_count = lemmas.size();
    d.tokens = lemmas;
    d.lemmas = std::move(lemmas);
    return d;
}

TokenizedDocument sized(const std::string& id, std::size_t n) {
    TokenizedDocument d;
    d.id = id;
    d.token_count = n;
    return d;
}

}  // namespace

TEST_SUITE("ingest") {
    TEST_CASE("records come back in file order") {
        std::istringstream in(R"({"id":"a","text":"one"}
{"id":"b","text":"two","extra":1}

{"id":"c","text":"three"}
)");
        const auto docs = ingest_stream(in, "mem");
        REQUIRE(docs.size() == 3);
        CHECK(docs[0].id == "a");
        CHECK(docs[1].text == "two");
        CHECK(docs[2].id == "c");
    }

    TEST_CASE("empty file warns and yields nothing") {
        test::TempDir dir("ingest");
        test::write(dir / "empty.jsonl", "");
        test::WarningCapture warnings;
        CHECK(ingest(dir / "empty.jsonl").empty());
        CHECK(warnings.messages.size() == 1);
    }

    TEST_CASE("duplicate id is named in the error") {
        std::istringstream in("{\"id\":\"d1\",\"text\":\"x\"}\n{\"id\":\"d1\",\"text\":\"y\"}\n");
        try {
            ingest_stream(in, "mem");
            FAIL("expected DataError");
        } catch (const DataError& e) {
            CHECK(std::string(e.what()).find("\"d1\"") != std::string::npos);
        }
    }

    TEST_CASE("malformed records are data errors") {
        for (const char* bad : {"not json", R"({"id":"a"})", R"({"id":"","text":"x"})", R"({"id":"a","text":""})",
                                R"({"id":3,"text":"x"})"}) {
            std::istringstream in(bad);
            CHECK_THROWS_AS(ingest_stream(in, "mem"), DataError);
        }
    }

    TEST_CASE("directory source reads .jsonl files in name order and rejects cross-file duplicates") {
        test::TempDir dir("ingest-dir");
        test::write(dir / "b.jsonl", R"({"id":"b1","text":"x"})" "\n");
        test::write(dir / "a.jsonl", R"({"id":"a1","text":"x"})" "\n" R"({"id":"a2","text":"y"})" "\n");
        test::write(dir / "notes.txt", "ignored");
        const auto docs = ingest(dir.path());
        REQUIRE(docs.size() == 3);
        CHECK(docs[0].id == "a1");
        CHECK(docs[2].id == "b1");

        test::write(dir / "c.jsonl", R"({"id":"a2","text":"z"})" "\n");
        CHECK_THROWS_AS(ingest(dir.path()), DataError);
    }
}

TEST_SUITE("preprocess") {
    TEST_CASE("stop words and lemma table") {
        const StopWords stop({"the", "are"});
        const LemmaTable lemmas({{"cats", "cat"}, {"running", "run"}});
        const auto d = preprocess({"x", "The cats are running"}, stop, lemmas);
        CHECK(d.lemmas == std::vector<std::string>{"cat", "run"});
        CHECK(d.token_count == 4);
    }

    TEST_CASE("empty and repeated input") {
        const StopWords stop;
        const LemmaTable lemmas;
        const auto empty = preprocess({"e", ""}, stop, lemmas);
        CHECK(empty.lemmas.empty());
        CHECK(empty.token_count == 0);
        const auto cats = preprocess({"c", "cat cat cat"}, stop, lemmas);
        CHECK(cats.lemmas == std::vector<std::string>{"cat", "cat", "cat"});
        CHECK(cats.token_count == 3);
    }

    TEST_CASE("tokenizer trims punctuation and folds ASCII case only") {
        CHECK(tokenize("Hello, World!  (it's) -- ok.") ==
              std::vector<std::string>{"hello", "world", "it's", "ok"});
        CHECK(tokenize("\tA\nB\r\nC") == std::vector<std::string>{"a", "b", "c"});
        CHECK(tokenize("Émile") == std::vector<std::string>{"Émile"});
    }

    TEST_CASE("parallel preprocessing matches serial") {
        std::vector<RawDocument> raw;
        for (int i = 0; i < 40; ++i) raw.push_back({"d" + std::to_string(i), "Stars and planets orbit " + std::to_string(i)});
        const StopWords stop({"and"});
        const LemmaTable lemmas({{"stars", "star"}, {"planets", "planet"}});
        const auto a = preprocess_all(raw, stop, lemmas, 1);
        const auto b = preprocess_all(raw, stop, lemmas, 4);
        REQUIRE(a.size() == b.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(a[i].id == b[i].id);
            CHECK(a[i].lemmas == b[i].lemmas);
        }
    }

    TEST_CASE("shipped data files load and the lemma table is a fixed point") {
        const auto stop = StopWords::load(std::filesystem::path(TEXTPSY_DATA_DIR) / "stopwords_en.txt");
        const auto lemmas = LemmaTable::load(std::filesystem::path(TEXTPSY_DATA_DIR) / "lemmas_en.tsv");
        CHECK(stop.contains("the"));
        CHECK(lemmas.lemmatize("galaxies") == "galaxy");
        for (const auto& [surface, lemma] : lemmas.entries()) CHECK(lemmas.lemmatize(lemma) == lemma);
    }
}

TEST_SUITE("filter_documents") {
    TEST_CASE("length bounds are inclusive") {
        const CorpusConfig cfg;
        const auto kept = filter_documents({sized("a", 40), sized("b", 60), sized("c", 600), sized("d", 50),
                                            sized("e", 500), sized("f", 501), sized("g", 49)},
                                           cfg);
        std::vector<std::string> ids;
        for (const auto& d : kept) ids.push_back(d.id);
        CHECK(ids == std::vector<std::string>{"b", "d", "e"});
    }

    TEST_CASE("first max_docs survivors are kept") {
        CorpusConfig cfg;
        cfg.max_docs = 3;
        std::vector<TokenizedDocument> docs;
        for (int i = 0; i < 6; ++i) docs.push_back(sized("d" + std::to_string(i), i == 1 ? 10 : 100));
        const auto kept = filter_documents(docs, cfg);
        REQUIRE(kept.size() == 3);
        CHECK(kept[0].id == "d0");
        CHECK(kept[1].id == "d2");
        CHECK(kept[2].id == "d3");
    }

    TEST_CASE("config invariants") {
        CorpusConfig cfg;
        cfg.min_tokens = 500;
        CHECK_THROWS_AS(cfg.validate(), ConfigError);
        cfg = {};
        cfg.top_n = 0;
        CHECK_THROWS_AS(cfg.validate(), ConfigError);
        cfg = {};
        cfg.min_occurrence = 0;
        CHECK_THROWS_AS(cfg.validate(), ConfigError);
        CHECK_NOTHROW(CorpusConfig{}.validate());
    }
}

TEST_SUITE("tfidf") {
    TEST_CASE("three-document example") {
        CorpusConfig cfg;
        cfg.top_n = 2;
        const auto lists =
            tfidf_keywords({doc("d1", {"cat", "sat", "mat"}), doc("d2", {"cat", "ran"}), doc("d3", {"dog", "bark"})},
                           cfg);
        const auto& d1 = lists.at("d1");
        REQUIRE(d1.size() == 2);
        CHECK(d1[0].word == "mat");
        CHECK(d1[1].word == "sat");
        CHECK(d1[0].score == doctest::Approx(std::log(3.0)).epsilon(1e-12));

        cfg.top_n = 10;
        const auto full = tfidf_keywords(
            {doc("d1", {"cat", "sat", "mat"}), doc("d2", {"cat", "ran"}), doc("d3", {"dog", "bark"})}, cfg);
        REQUIRE(full.at("d1").size() == 3);
        CHECK(full.at("d1")[2].word == "cat");
        CHECK(std::abs(full.at("d1")[2].score - std::log(1.5)) < 1e-12);
    }

    TEST_CASE("word in every document scores zero; single-document corpus is lexicographic") {
        const CorpusConfig cfg;
        const auto lists = tfidf_keywords({doc("a", {"x", "y", "y"}), doc("b", {"x"})}, cfg);
        for (const auto& s : lists.at("b")) CHECK(s.score == 0.0);

        const auto single = tfidf_keywords({doc("only", {"zeta", "alpha", "mid", "alpha"})}, cfg);
        const auto& l = single.at("only");
        REQUIRE(l.size() == 3);
        CHECK(l[0].word == "alpha");
        CHECK(l[1].word == "mid");
        CHECK(l[2].word == "zeta");
        for (const auto& s : l) CHECK(s.score == 0.0);
    }

    TEST_CASE("raw counts multiply the idf") {
        const CorpusConfig cfg;
        const auto lists = tfidf_keywords({doc("a", {"w", "w", "w", "v"}), doc("b", {"v"}), doc("c", {"u"})}, cfg);
        CHECK(std::abs(lists.at("a")[0].score - 3.0 * std::log(3.0)) < 1e-12);
    }

    TEST_CASE("adding a document without w never lowers score(w, d)") {
        const CorpusConfig cfg;
        std::vector<TokenizedDocument> docs{doc("a", {"w", "x", "y"}), doc("b", {"w", "z"}), doc("c", {"x", "y"})};
        const auto before = tfidf_keywords(docs, cfg);
        docs.push_back(doc("d", {"x", "q"}));
        const auto after = tfidf_keywords(docs, cfg);
        for (const auto& id : {"a", "b", "c"}) {
            std::map<std::string, double> old;
            for (const auto& s : before.at(id)) old[s.word] = s.score;
            for (const auto& s : after.at(id))
                if (s.word == "w") CHECK(s.score >= old.at("w"));
        }
    }

    TEST_CASE("results do not depend on the worker count") {
        std::vector<TokenizedDocument> docs;
        const std::vector<std::string> vocab{"a", "b", "c", "d", "e", "f", "g", "h"};
        for (int i = 0; i < 30; ++i) {
            std::vector<std::string> l;
            for (int k = 0; k < 12; ++k) l.push_back(vocab[(i * 7 + k * k) % vocab.size()]);
            docs.push_back(doc("d" + std::to_string(i), l));
        }
        CorpusConfig cfg;
        cfg.top_n = 3;
        const auto a = tfidf_keywords(docs, cfg, 1);
        const auto b = tfidf_keywords(docs, cfg, 3);
        for (const auto& [id, list] : a) {
            REQUIRE(list.size() == b.at(id).size());
            for (std::size_t i = 0; i < list.size(); ++i) {
                CHECK(list[i].word == b.at(id)[i].word);
                CHECK(list[i].score == b.at(id)[i].score);
            }
        }
    }
}

TEST_SUITE("common_keywords") {
    TEST_CASE("counting and threshold") {
        const std::map<std::string, std::vector<std::string>> lists{{"d1", {"a", "b"}}, {"d2", {"a", "c"}}, {"d3", {"a", "b"}}};
        CorpusConfig cfg;
        cfg.min_occurrence = 2;
        const auto set = common_keywords(lists, cfg);
        CHECK(set.entries == std::vector<KeywordEntry>{{"a", 3}, {"b", 2}});

        cfg.min_occurrence = 4;
        test::WarningCapture warnings;
        CHECK(common_keywords(lists, cfg).empty());
        CHECK(warnings.messages.size() == 1);
    }

    TEST_CASE("matches a brute-force count on random lists") {
        std::mt19937 gen(11);
        for (int rep = 0; rep < 20; ++rep) {
            std::map<std::string, std::vector<std::string>> lists;
            for (int d = 0; d < 25; ++d) {
                std::set<std::string> picked;
                while (picked.size() < 4) picked.insert(std::string(1, static_cast<char>('a' + gen() % 12)));
                lists["d" + std::to_string(d)] = {picked.begin(), picked.end()};
            }
            CorpusConfig cfg;
            cfg.min_occurrence = 1 + gen() % 10;

            std::map<std::string, std::size_t> counts;
            for (const auto& [id, l] : lists)
                for (const auto& w : l) ++counts[w];
            std::vector<KeywordEntry> expected;
            for (const auto& [w, c] : counts)
                if (c >= cfg.min_occurrence) expected.push_back({w, c});
            std::sort(expected.begin(), expected.end(), [](const auto& x, const auto& y) {
                return x.occurrences != y.occurrences ? x.occurrences > y.occurrences : x.word < y.word;
            });

            test::WarningCapture quiet;
            CHECK(common_keywords(lists, cfg).entries == expected);
        }
    }

    TEST_CASE("csv round trip") {
        test::TempDir dir("kw");
        const KeywordSet set{{{"alpha", 5}, {"beta", 3}}};
        test::write(dir / "k.csv", keywords_to_csv(set));
        const auto back = keywords_from_csv(dir / "k.csv");
        CHECK(back.entries == set.entries);
        CHECK(back.occurrences("beta") == 3);
        CHECK(back.occurrences("gamma") == 0);
    }
}
