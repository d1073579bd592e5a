#include <doctest.h>
#include <httplib.h>

#include <atomic>
#include <cmath>
#include <thread>

#include "support.hpp"
#include "textpsy/embedding.hpp"
#include "textpsy/error.hpp"

using namespace textpsy;
using namespace textpsy::embedding;
using nlohmann::json;

namespace {

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
    double ab = 0, aa = 0, bb = 0;
    for (std::size_t i = 0; i < a.dim(); ++i) {
        ab += double(a.values[i]) * b.values[i];
        aa += double(a.values[i]) * a.values[i];
        bb += double(b.values[i]) * b.values[i];
    }
    return ab / std::sqrt(aa * bb);
}

EmbedRequest req(std::string word, std::string document, PoolingMethod pooling = PoolingMethod::Mean, int form = 1) {
    return {RephrasingForm::shipped(form), std::move(word), std::move(document), pooling};
}

// An httplib server on an ephemeral port that forwards to wire::handle.
// `hook` may answer a request itself (to inject failures) by returning true.
class Server {
public:
    using Hook = std::function<bool(const httplib::Request&, httplib::Response&)>;

    explicit Server(Backend& backend, Hook hook = nullptr) : backend_(backend), hook_(std::move(hook)) {
        auto route = [this](const httplib::Request& rq, httplib::Response& rs) {
            ++calls;
            if (hook_ && hook_(rq, rs)) return;
            const auto reply = wire::handle(backend_, rq.method, rq.path, rq.body);
            rs.status = reply.status;
            rs.set_content(reply.body, "application/json");
        };
        server_.Get(".*", route);
        server_.Post(".*", route);
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~Server() {
        server_.stop();
        thread_.join();
    }

    std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }

    std::atomic<int> calls{0};

private:
    Backend& backend_;
    Hook hook_;
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
};

HttpOptions fast_options() {
    HttpOptions o;
    o.initial_backoff = std::chrono::milliseconds(1);
    o.timeout = std::chrono::seconds(5);
    return o;
}

}  // namespace

TEST_SUITE("rephrase") {
    TEST_CASE("shipped forms") {
        CHECK(rephrase(RephrasingForm::shipped(1), "bank", "He sat by the river") ==
              "find the contextual meaning of 'bank' given the following context: He sat by the river");
        CHECK(rephrase(RephrasingForm::shipped(6), "bank", "He sat by the river") ==
              "the word is 'bank' and the context is: He sat by the river");
        for (int f = 1; f <= RephrasingForm::kFormCount; ++f) {
            const auto text = RephrasingForm::shipped(f).template_text();
            CHECK(text.find("{word}") != std::string::npos);
            CHECK(text.find("{document}") != std::string::npos);
        }
        CHECK_THROWS_AS(RephrasingForm::shipped(0), ConfigError);
        CHECK_THROWS_AS(RephrasingForm::shipped(7), ConfigError);
    }

    TEST_CASE("custom template") {
        CHECK(rephrase(RephrasingForm::custom("X {word} Y {document}"), "a", "b") == "X a Y b");
        CHECK_THROWS_AS(RephrasingForm::custom("no placeholders"), ConfigError);
        CHECK_THROWS_AS(RephrasingForm::custom("{word} {word} {document}"), ConfigError);
    }

    TEST_CASE("substitution is literal and the span points at the word") {
        const auto r = rephrase_with_span(RephrasingForm::custom("<{document}> [{word}]"), "{document}", "{word}");
        CHECK(r.text == "<{word}> [{document}]");
        CHECK(r.text.substr(r.word_begin, r.word_end - r.word_begin) == "{document}");
    }
}

TEST_SUITE("mock backend") {
    TEST_CASE("determinism and seed dependence") {
        MockBackend a(1, 32), b(1, 32), c(2, 32);
        const auto ra = a.embed(req("bank", "money in the bank"));
        CHECK(ra.cce == b.embed(req("bank", "money in the bank")).cce);
        CHECK(ra.doc == b.embed(req("bank", "money in the bank")).doc);
        CHECK(a.info().dim == 32);

        // Different seeds give unrelated vectors: mean cosine over 100 words near 0.
        MockBackend big1(1, 256), big2(2, 256);
        double sum = 0;
        for (int i = 0; i < 100; ++i) {
            const std::string w = "w" + std::to_string(i);
            const auto x = big1.embed(req(w, "doc")).cce;
            const auto y = big2.embed(req(w, "doc")).cce;
            CHECK(x != y);
            sum += cosine(x, y);
        }
        // The shared template pieces add a common part within each seed but
        // not across seeds, so the mean stays near zero.
        CHECK(std::abs(sum / 100) < 0.1);
    }

    TEST_CASE("context changes the CCE") {
        MockBackend m(3, 64);
        const auto river = m.embed(req("bank", "He sat by the river")).cce;
        const auto money = m.embed(req("bank", "She deposited money")).cce;
        CHECK(river != money);
        CHECK(cosine(river, money) < 0.999);
    }

    TEST_CASE("document pooling") {
        MockBackend m(4, 48);
        const auto once = fetch_doc_embedding(m, "w", PoolingMethod::Mean);
        CHECK(once == fetch_doc_embedding(m, "w w", PoolingMethod::Mean));
        CHECK(once == fetch_doc_embedding(m, "W w w", PoolingMethod::Mean));
        CHECK(once != fetch_doc_embedding(m, "w", PoolingMethod::Cls));
        CHECK(once != fetch_doc_embedding(m, "v", PoolingMethod::Mean));
        // The document vector does not depend on the word or form of the request.
        CHECK(m.embed(req("x", "w", PoolingMethod::Mean, 4)).doc == once);
    }

    TEST_CASE("over-length prompts and unembeddable words fail per item") {
        MockBackend m(5, 8, 20);
        std::string doc;
        for (int i = 0; i < 30; ++i) doc += "tok ";
        const std::vector<EmbedRequest> batch{req("a", "short doc"), req("a", doc), req("   ", "short doc")};
        const auto out = m.embed_batch(batch);
        REQUIRE(out.size() == 3);
        CHECK(out[0].ok());
        CHECK(out[1].error.find("over-length") != std::string::npos);
        CHECK_FALSE(out[2].ok());
        CHECK_THROWS_AS(m.embed(batch[1]), BackendError);
    }

    TEST_CASE("check_vector") {
        const BackendInfo info{"m", 2, 10};
        CHECK_NOTHROW(check_vector({{1.0f, 2.0f}}, info, "v"));
        CHECK_THROWS_AS(check_vector({{1.0f}}, info, "v"), BackendError);
        CHECK_THROWS_AS(check_vector({{1.0f, NAN}}, info, "v"), BackendError);
    }
}

TEST_SUITE("wire") {
    TEST_CASE("request round trip") {
        const auto r = req("bank", "text", PoolingMethod::Cls, 3);
        const auto j = wire::to_json(r);
        CHECK(j.at("form_id") == 3);
        CHECK(j.at("doc_pooling") == "cls");
        CHECK_FALSE(j.contains("template"));
        const auto back = wire::request_from_json(j);
        CHECK(back.form == r.form);
        CHECK(back.word == "bank");
        CHECK(back.doc_pooling == PoolingMethod::Cls);

        const EmbedRequest custom{RephrasingForm::custom("{word}|{document}"), "a", "b", PoolingMethod::Mean};
        const auto jc = wire::to_json(custom);
        CHECK(jc.at("template") == "{word}|{document}");
        CHECK_FALSE(jc.contains("form_id"));
        CHECK(wire::request_from_json(jc).form == custom.form);
    }

    TEST_CASE("response shapes") {
        EmbedResponse ok;
        ok.cce.values = {1.0f, 2.0f};
        ok.doc.values = {3.0f, 4.0f};
        const auto j = wire::to_json(ok);
        CHECK(j.at("dim") == 2);
        const auto back = wire::response_from_json(j);
        CHECK(back.cce == ok.cce);
        CHECK(back.doc == ok.doc);

        EmbedResponse bad;
        bad.error = "boom";
        CHECK(wire::to_json(bad) == json{{"error", "boom"}});
        CHECK(wire::response_from_json(json{{"error", "boom"}}).error == "boom");

        CHECK_THROWS_AS(wire::response_from_json(json{{"cce", {1.0}}, {"doc", {1.0}}, {"dim", 2}}), BackendError);
        CHECK_THROWS_AS(wire::info_from_json(json{{"model", "m"}}), BackendError);
        CHECK(wire::info_from_json(json{{"model", "m"}, {"dim", 4}, {"max_tokens", 9}}).dim == 4);
    }

    TEST_CASE("handler routes and errors") {
        MockBackend m(6, 4);
        const auto info = wire::handle(m, "GET", "/v1/info", "");
        CHECK(info.status == 200);
        CHECK(json::parse(info.body).at("dim") == 4);
        CHECK(wire::handle(m, "POST", "/v1/info", "").status == 405);
        CHECK(wire::handle(m, "GET", "/v1/embed", "").status == 405);
        CHECK(wire::handle(m, "GET", "/nope", "").status == 404);
        CHECK(wire::handle(m, "POST", "/v1/embed", "{not json").status == 400);

        const auto one = wire::handle(m, "POST", "/v1/embed", wire::to_json(req("a", "b c")).dump());
        CHECK(one.status == 200);
        CHECK(json::parse(one.body).at("cce").size() == 4);

        json batch{{"items", {wire::to_json(req("a", "b")), json{{"form_id", 9}, {"word", "a"}, {"document", "b"}},
                              wire::to_json(req("c", "d"))}}};
        const auto reply = wire::handle(m, "POST", "/v1/embed_batch", batch.dump());
        CHECK(reply.status == 200);
        const auto results = json::parse(reply.body).at("results");
        REQUIRE(results.size() == 3);
        CHECK(results[0].contains("cce"));
        CHECK(results[1].contains("error"));
        CHECK(wire::response_from_json(results[2]).cce == m.embed(req("c", "d")).cce);
    }
}

TEST_SUITE("http client") {
    TEST_CASE("matches the backend behind the server, in item order and across chunks") {
        MockBackend m(7, 16);
        Server server(m);
        auto opt = fast_options();
        opt.batch_size = 2;
        HttpBackend client(server.url() + "/", opt);
        CHECK(client.info().dim == 16);
        CHECK(client.info().model_name == m.info().model_name);

        std::vector<EmbedRequest> batch;
        for (int i = 0; i < 5; ++i) batch.push_back(req("w" + std::to_string(i), "doc " + std::to_string(i)));
        const int before = server.calls.load();
        const auto out = client.embed_batch(batch);
        CHECK(server.calls.load() - before == 3);
        REQUIRE(out.size() == 5);
        for (std::size_t i = 0; i < batch.size(); ++i) {
            const auto direct = m.embed(batch[i]);
            CHECK(out[i].cce == direct.cce);
            CHECK(out[i].doc == direct.doc);
        }
        CHECK(fetch_cce(client, RephrasingForm::shipped(2), "w", "d") ==
              fetch_cce(m, RephrasingForm::shipped(2), "w", "d"));
    }

    TEST_CASE("per-item failures pass through") {
        MockBackend m(8, 8, 16);
        Server server(m);
        HttpBackend client(server.url(), fast_options());
        std::string doc;
        for (int i = 0; i < 40; ++i) doc += "x ";
        const std::vector<EmbedRequest> batch{req("a", "fine"), req("a", doc)};
        const auto out = client.embed_batch(batch);
        CHECK(out[0].ok());
        CHECK(out[1].error.find("over-length") != std::string::npos);
        CHECK_THROWS_AS(client.embed(batch[1]), BackendError);
    }

    TEST_CASE("transient server errors are retried with backoff") {
        MockBackend m(9, 8);
        std::atomic<int> failures{2};
        Server server(m, [&](const httplib::Request&, httplib::Response& rs) {
            if (failures-- > 0) {
                rs.status = 503;
                rs.set_content("busy", "text/plain");
                return true;
            }
            return false;
        });
        HttpBackend client(server.url(), fast_options());
        CHECK(client.info().dim == 8);
        CHECK(server.calls.load() == 3);
    }

    TEST_CASE("retries give up after the configured attempts; client errors are not retried") {
        MockBackend m(10, 8);
        Server always_down(m, [](const httplib::Request&, httplib::Response& rs) {
            rs.status = 500;
            return true;
        });
        HttpBackend a(always_down.url(), fast_options());
        CHECK_THROWS_AS(a.info(), BackendError);
        CHECK(always_down.calls.load() == 3);

        Server not_found(m, [](const httplib::Request&, httplib::Response& rs) {
            rs.status = 404;
            return true;
        });
        HttpBackend b(not_found.url(), fast_options());
        CHECK_THROWS_AS(b.info(), BackendError);
        CHECK(not_found.calls.load() == 1);
    }

    TEST_CASE("malformed replies and wrong dimensions are backend errors") {
        MockBackend m(11, 8);
        Server garbage(m, [](const httplib::Request& rq, httplib::Response& rs) {
            if (rq.path == "/v1/info") return false;
            rs.status = 200;
            rs.set_content(rq.path == "/v1/embed_batch" ? "{\"results\": [] }" : "nope", "application/json");
            return true;
        });
        HttpBackend client(garbage.url(), fast_options());
        const std::vector<EmbedRequest> one{req("a", "b")};
        CHECK_THROWS_AS(client.embed_batch(one), BackendError);

        MockBackend wide(11, 12);
        Server liar(wide, [](const httplib::Request& rq, httplib::Response& rs) {
            if (rq.path != "/v1/info") return false;
            rs.status = 200;
            rs.set_content(R"({"model":"m","dim":8,"max_tokens":512})", "application/json");
            return true;
        });
        HttpBackend lied_to(liar.url(), fast_options());
        CHECK_THROWS_AS(fetch_cce(lied_to, RephrasingForm::shipped(1), "a", "b"), BackendError);
    }

    TEST_CASE("unreachable server") {
        auto opt = fast_options();
        opt.attempts = 1;
        opt.timeout = std::chrono::seconds(1);
        HttpBackend client("http://127.0.0.1:1", opt);
        CHECK_THROWS_AS(client.info(), BackendError);
    }
}

TEST_SUITE("cache") {
    TEST_CASE("hits, misses and persistence") {
        test::TempDir dir("cache");
        auto inner = std::make_shared<MockBackend>(12, 8);
        const std::vector<EmbedRequest> batch{req("a", "doc one"), req("b", "doc one"), req("a", "doc one")};
        {
            CachingBackend cache(inner, dir.path());
            const auto first = cache.embed_batch(batch);
            CHECK(cache.misses() == 3);
            const auto second = cache.embed_batch(batch);
            CHECK(cache.hits() == 3);
            for (std::size_t i = 0; i < batch.size(); ++i) CHECK(first[i].cce == second[i].cce);
        }
        CachingBackend reopened(inner, dir.path());
        const auto again = reopened.embed_batch(batch);
        CHECK(reopened.hits() == 3);
        CHECK(again[1].cce == inner->embed(batch[1]).cce);
        CHECK(again[1].doc == inner->embed(batch[1]).doc);

        std::size_t bins = 0;
        for (const auto& e : std::filesystem::directory_iterator(dir.path()))
            if (e.path().extension() == ".bin") {
                ++bins;
                CHECK(std::filesystem::file_size(e.path()) == 8 * 8);
            }
        CHECK(bins == 2);
    }

    TEST_CASE("key covers form, pooling and document") {
        test::TempDir dir("cache-key");
        CachingBackend cache(std::make_shared<MockBackend>(13, 8), dir.path());
        const std::vector<EmbedRequest> batch{req("a", "d"), req("a", "d", PoolingMethod::Cls), req("a", "d", PoolingMethod::Mean, 2),
                                              req("a", "e")};
        cache.embed_batch(batch);
        CHECK(cache.misses() == 4);
        CHECK(cache.hits() == 0);
    }

    TEST_CASE("torn records are misses and failures are not cached") {
        test::TempDir dir("cache-torn");
        auto inner = std::make_shared<MockBackend>(14, 8, 24);
        CachingBackend cache(inner, dir.path());
        const std::vector<EmbedRequest> batch{req("a", "d")};
        cache.embed_batch(batch);
        for (const auto& e : std::filesystem::directory_iterator(dir.path()))
            if (e.path().extension() == ".bin") test::write(e.path(), "short");
        const auto out = cache.embed_batch(batch);
        CHECK(cache.misses() == 2);
        CHECK(out[0].cce == inner->embed(batch[0]).cce);

        const std::vector<EmbedRequest> too_long{req("a", "x x x x x x x x x x x x x x x")};
        CHECK_FALSE(cache.embed_batch(too_long)[0].ok());
        CHECK_FALSE(cache.embed_batch(too_long)[0].ok());
        CHECK(cache.hits() == 0);
    }
}
