#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fmt/format.h>

#include "support.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path kTestData = TEXTPSY_TEST_DATA;

struct Run {
    int code = -1;
    std::string out, err;
};

Run cli(const test::TempDir& dir, const std::string& args) {
    const auto out = dir / "stdout.txt", err = dir / "stderr.txt";
    const auto cmd = fmt::format("'{}' {} > '{}' 2> '{}'", TEXTPSY_CLI, args, out.string(), err.string());
    const int status = std::system(cmd.c_str());
    Run r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = textpsy::io::read_file(out);
    r.err = textpsy::io::read_file(err);
    return r;
}

// A config next to a copy of the toy corpus; `factor` is spliced in verbatim.
fs::path write_config(const test::TempDir& dir, const std::string& factor) {
    fs::copy_file(kTestData / "toy_corpus.jsonl", dir / "toy.jsonl", fs::copy_options::overwrite_existing);
    const auto p = dir / "cfg.json";
    test::write(p, fmt::format(R"({{"corpus": {{"source": "toy.jsonl"}},
 "backend": {{"mock": true, "mock_dim": 64}},
 "factor": {{"n_reps": 20{}}},
 "out": "out"}})",
                               factor));
    return p;
}

}  // namespace

TEST_SUITE("cli") {
    TEST_CASE("usage and config errors exit 1") {
        test::TempDir dir("cli-usage");
        CHECK(cli(dir, "").code == 1);
        CHECK(cli(dir, "frobnicate").code == 1);
        CHECK(cli(dir, "ingest --form 9").code == 1);
        CHECK(cli(dir, "ingest --pooling max").code == 1);
        CHECK(cli(dir, "--help").code == 0);

        test::write(dir / "bad.json", R"({"factor": {"rotate": "geomin"}})");
        const auto r = cli(dir, fmt::format("ingest --config '{}'", (dir / "bad.json").string()));
        CHECK(r.code == 1);
        CHECK(r.err.find("factor.rotate") != std::string::npos);
        CHECK(cli(dir, "ingest").code == 1);  // no corpus configured
    }

    TEST_CASE("data errors exit 2") {
        test::TempDir dir("cli-data");
        const auto cfg = write_config(dir, "");
        CHECK(cli(dir, fmt::format("ingest --config '{}' --corpus '{}'", cfg.string(), (dir / "none.jsonl").string()))
                  .code == 2);
        const auto r = cli(dir, fmt::format("bifactor --config '{}'", cfg.string()));
        CHECK(r.code == 2);
        CHECK(r.err.find("run `textpsy") != std::string::npos);
    }

    TEST_CASE("backend errors exit 3") {
        test::TempDir dir("cli-backend");
        const auto cfg = write_config(dir, "");
        CHECK(cli(dir, fmt::format("ingest -q --config '{}'", cfg.string())).code == 0);
        CHECK(cli(dir, fmt::format("keywords -q --config '{}'", cfg.string())).code == 0);
        const auto r = cli(dir, fmt::format("score --config '{}' --backend http://127.0.0.1:1", cfg.string()));
        CHECK(r.code == 3);
    }

    TEST_CASE("missing second-order structure exits 4") {
        test::TempDir dir("cli-numerical");
        const auto cfg = write_config(dir, R"(, "n_factors": 4)");
        for (const char* s : {"ingest", "keywords", "score", "fa1"})
            REQUIRE(cli(dir, fmt::format("{} -q --config '{}'", s, cfg.string())).code == 0);
        // Four nearly uncorrelated topic factors leave nothing for the second order.
        const auto r = cli(dir, fmt::format("fa2 --config '{}'", cfg.string()));
        CHECK(r.code == 4);
        CHECK(r.err.find("no second-order structure") != std::string::npos);
    }

    TEST_CASE("all runs every stage and a rerun skips them") {
        test::TempDir dir("cli-all");
        const auto cfg = write_config(dir, R"(, "n_factors": 6, "n_second_order": 2)");
        const auto first = cli(dir, fmt::format("all --config '{}'", cfg.string()));
        REQUIRE(first.code == 0);
        CHECK(first.out.find("plot: done") != std::string::npos);
        const auto second = cli(dir, fmt::format("all --config '{}'", cfg.string()));
        CHECK(second.code == 0);
        for (const char* s : {"ingest", "score", "fa1", "bifactor", "plot"})
            CHECK(second.out.find(fmt::format("{}: skipped (up-to-date)", s)) != std::string::npos);
        CHECK(fs::exists(dir / "out/report/report.md"));

        // Command-line overrides change the stage keys.
        const auto reseeded = cli(dir, fmt::format("diagnose --config '{}' --seed 9", cfg.string()));
        CHECK(reseeded.out.find("diagnose: done") != std::string::npos);
        const auto quiet = cli(dir, fmt::format("plot -q --config '{}'", cfg.string()));
        CHECK(quiet.code == 0);
        CHECK(quiet.out.empty());
    }
}
