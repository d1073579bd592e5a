// Command-line front end for the pipeline.
//
//   textpsy <stage|all|plot> [--config PATH] [--out DIR] [--seed INT]
//           [--backend URL | --mock-backend] [--form 1..6] [--pooling mean|cls]
//
// Exit codes: 0 ok, 1 usage/config, 2 data, 3 backend, 4 numerical.

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include <filesystem>
#include <iostream>
#include <optional>

#include "textpsy/error.hpp"
#include "textpsy/pipeline.hpp"
#include "textpsy/util/log.hpp"

namespace {

namespace tp = textpsy::pipeline;

struct Overrides {
    std::string config;
    std::string out;
    std::string corpus;
    std::optional<std::uint64_t> seed;
    std::string backend;
    bool mock = false;
    std::optional<int> form;
    std::string pooling;
    std::optional<std::size_t> workers;
    bool quiet = false;
};

tp::PipelineConfig build_config(const Overrides& o) {
    auto c = o.config.empty() ? tp::PipelineConfig::from_json(nlohmann::json::object(), std::filesystem::current_path())
                              : tp::load_config(o.config);
    if (!o.out.empty()) c.out = o.out;
    if (!o.corpus.empty()) c.corpus_source = o.corpus;
    if (o.seed) c.seed = *o.seed;
    if (!o.backend.empty()) {
        c.backend.url = o.backend;
        c.backend.mock = false;
    }
    if (o.mock) c.backend.mock = true;
    if (o.form) {
        c.backend.form = *o.form;
        c.backend.custom_template.clear();
    }
    if (!o.pooling.empty()) c.backend.pooling = textpsy::embedding::pooling_from_string(o.pooling);
    if (o.workers) c.workers = *o.workers;
    c.validate();
    return c;
}

void print(const tp::StageResult& r) {
    if (r.skipped)
        std::cout << fmt::format("{}: skipped (up-to-date)\n", tp::to_string(r.stage));
    else
        std::cout << fmt::format("{}: done ({} artifact(s), {:.2f} s)\n", tp::to_string(r.stage), r.outputs.size(),
                                 r.seconds);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Psychometric analysis of text corpora through contextual scores"};
    app.require_subcommand(1);
    Overrides o;
    app.add_option("--config", o.config, "JSON configuration file");
    app.add_option("--out", o.out, "output directory");
    app.add_option("--corpus", o.corpus, "corpus file or directory of .jsonl files");
    app.add_option("--seed", o.seed, "run seed");
    app.add_option("--backend", o.backend, "embedding backend base URL");
    app.add_flag("--mock-backend", o.mock, "use the deterministic in-process mock backend");
    app.add_option("--form", o.form, "rephrasing form")->check(CLI::Range(1, 6));
    app.add_option("--pooling", o.pooling, "document pooling")->check(CLI::IsMember({"mean", "cls"}));
    app.add_option("--workers", o.workers, "worker threads (0 = all cores)");
    app.add_flag("-q,--quiet", o.quiet, "suppress progress output");

    for (auto s : tp::all_stages()) {
        const auto name = tp::to_string(s);
        auto* sub = app.add_subcommand(name, fmt::format("run the {} stage", name));
        sub->fallthrough();
    }
    app.add_subcommand("all", "run every stage in order, skipping up-to-date ones")->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    textpsy::log::set_quiet(true);
    if (o.quiet) textpsy::log::set_warning_sink(nullptr);
    try {
        tp::Pipeline pipeline(build_config(o));
        const auto* sub = app.get_subcommands().front();
        if (sub->get_name() == "all") {
            for (auto s : tp::all_stages()) {
                const auto r = pipeline.run(s);
                if (!o.quiet) print(r);
            }
        } else {
            const auto r = pipeline.run(tp::stage_from_string(sub->get_name()));
            if (!o.quiet) print(r);
        }
    } catch (const textpsy::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return static_cast<int>(e.kind());
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return static_cast<int>(textpsy::ErrorKind::Data);
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return static_cast<int>(textpsy::ErrorKind::Data);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
