#include <fmt/format.h>

#include <cstdlib>
#include <set>

#include "textpsy/error.hpp"
#include "textpsy/pipeline.hpp"
#include "textpsy/util/hash.hpp"
#include "textpsy/util/io.hpp"
#include "textpsy/util/parallel.hpp"

#ifndef TEXTPSY_DATA_DIR
#define TEXTPSY_DATA_DIR "data"
#endif

namespace textpsy::pipeline {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

void check_keys(const json& j, const std::string& where, const std::set<std::string>& allowed) {
    if (!j.is_object()) throw ConfigError(fmt::format("config: {} must be an object", where.empty() ? "root" : where));
    for (const auto& [key, value] : j.items())
        if (!allowed.contains(key))
            throw ConfigError(fmt::format("config: unknown key \"{}{}\"", where.empty() ? "" : where + ".", key));
}

template <typename T>
void read(const json& j, const char* key, T& target, const std::string& where) {
    if (!j.contains(key)) return;
    try {
        target = j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(fmt::format("config: {}.{} has the wrong type", where, key));
    }
}

fs::path data_dir() {
    if (const char* env = std::getenv("TEXTPSY_DATA_DIR"); env != nullptr && *env != '\0') return env;
    return TEXTPSY_DATA_DIR;
}

fs::path resolve(const fs::path& p, const fs::path& base) {
    if (p.empty() || p.is_absolute() || base.empty()) return p;
    return base / p;
}

fs::path resolve_data_file(const std::string& id, const fs::path& base) {
    const fs::path as_given = resolve(id, base);
    if (fs::exists(as_given)) return as_given;
    return data_dir() / id;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::string_view component) {
    return hash64(fmt::format("{}/{}", seed, component));
}

PipelineConfig PipelineConfig::from_json(const json& j, const fs::path& base_dir) {
    PipelineConfig c;
    check_keys(j, "", {"corpus", "backend", "filter", "factor", "items", "seed", "workers", "out"});

    if (j.contains("corpus")) {
        const auto& s = j["corpus"];
        check_keys(s, "corpus",
                   {"source", "min_tokens", "max_tokens", "max_docs", "top_n", "min_occurrence", "stopwords",
                    "lemmas"});
        std::string source;
        read(s, "source", source, "corpus");
        c.corpus_source = resolve(source, base_dir);
        read(s, "min_tokens", c.corpus.min_tokens, "corpus");
        read(s, "max_tokens", c.corpus.max_tokens, "corpus");
        read(s, "max_docs", c.corpus.max_docs, "corpus");
        read(s, "top_n", c.corpus.top_n, "corpus");
        read(s, "min_occurrence", c.corpus.min_occurrence, "corpus");
        read(s, "stopwords", c.corpus.stopword_list_id, "corpus");
        read(s, "lemmas", c.corpus.lemma_table_id, "corpus");
    }
    c.stopwords = resolve_data_file(c.corpus.stopword_list_id, base_dir);
    c.lemmas = resolve_data_file(c.corpus.lemma_table_id, base_dir);

    if (j.contains("backend")) {
        const auto& s = j["backend"];
        check_keys(s, "backend",
                   {"url", "mock", "mock_dim", "mock_seed", "form", "template", "pooling", "cache_dir",
                    "batch_size"});
        read(s, "url", c.backend.url, "backend");
        read(s, "mock", c.backend.mock, "backend");
        read(s, "mock_dim", c.backend.mock_dim, "backend");
        read(s, "mock_seed", c.backend.mock_seed, "backend");
        read(s, "form", c.backend.form, "backend");
        read(s, "template", c.backend.custom_template, "backend");
        std::string pooling = "mean";
        read(s, "pooling", pooling, "backend");
        c.backend.pooling = embedding::pooling_from_string(pooling);
        std::string cache;
        read(s, "cache_dir", cache, "backend");
        c.backend.cache_dir = resolve(cache, base_dir);
        read(s, "batch_size", c.backend.batch_size, "backend");
    }

    if (j.contains("filter")) {
        check_keys(j["filter"], "filter", {"threshold"});
        read(j["filter"], "threshold", c.filter_threshold, "filter");
    }

    if (j.contains("factor")) {
        const auto& s = j["factor"];
        check_keys(s, "factor",
                   {"input", "n_reps", "criterion", "observed", "rotation", "epsilon", "gamma", "n_starts", "cutoffs",
                    "n_factors", "n_second_order", "top_words"});
        auto& f = c.factor;
        read(s, "input", f.input, "factor");
        read(s, "n_reps", f.n_reps, "factor");
        std::string crit = "mean";
        read(s, "criterion", crit, "factor");
        if (crit == "mean")
            f.criterion = factor::PaCriterion::Mean;
        else if (crit == "p95")
            f.criterion = factor::PaCriterion::P95;
        else
            throw ConfigError("config: factor.criterion must be mean or p95");
        std::string observed = "reduced";
        read(s, "observed", observed, "factor");
        if (observed == "reduced")
            f.observed = factor::PaObserved::Reduced;
        else if (observed == "full")
            f.observed = factor::PaObserved::Full;
        else
            throw ConfigError("config: factor.observed must be reduced or full");
        std::string rotation = "geomin";
        read(s, "rotation", rotation, "factor");
        f.rotation = factor::rotation_from_string(rotation);
        read(s, "epsilon", f.epsilon, "factor");
        read(s, "gamma", f.gamma, "factor");
        read(s, "n_starts", f.n_starts, "factor");
        read(s, "cutoffs", f.cutoffs, "factor");
        if (s.contains("n_factors") && !s["n_factors"].is_null()) {
            int k = 0;
            read(s, "n_factors", k, "factor");
            f.n_factors = k;
        }
        if (s.contains("n_second_order") && !s["n_second_order"].is_null()) {
            int l = 0;
            read(s, "n_second_order", l, "factor");
            f.n_second_order = l;
        }
        read(s, "top_words", f.top_words, "factor");
    }

    if (j.contains("items")) {
        const auto& s = j["items"];
        check_keys(s, "items", {"source", "n_scales", "items_per_scale", "corrected"});
        read(s, "source", c.items.source, "items");
        read(s, "n_scales", c.items.n_scales, "items");
        read(s, "items_per_scale", c.items.items_per_scale, "items");
        read(s, "corrected", c.items.corrected, "items");
    }

    read(j, "seed", c.seed, "root");
    read(j, "workers", c.workers, "root");
    std::string out;
    read(j, "out", out, "root");
    if (!out.empty()) c.out = resolve(out, base_dir);
    c.validate();
    return c;
}

json PipelineConfig::to_json() const {
    json f = {{"input", factor.input},
              {"n_reps", factor.n_reps},
              {"criterion", factor.criterion == factor::PaCriterion::Mean ? "mean" : "p95"},
              {"observed", factor.observed == factor::PaObserved::Reduced ? "reduced" : "full"},
              {"rotation", factor::to_string(factor.rotation)},
              {"epsilon", factor.epsilon},
              {"gamma", factor.gamma},
              {"n_starts", factor.n_starts},
              {"cutoffs", factor.cutoffs},
              {"n_factors", factor.n_factors ? json(*factor.n_factors) : json(nullptr)},
              {"n_second_order", factor.n_second_order ? json(*factor.n_second_order) : json(nullptr)},
              {"top_words", factor.top_words}};
    return {
        {"corpus",
         {{"source", corpus_source.string()},
          {"min_tokens", corpus.min_tokens},
          {"max_tokens", corpus.max_tokens},
          {"max_docs", corpus.max_docs},
          {"top_n", corpus.top_n},
          {"min_occurrence", corpus.min_occurrence},
          {"stopwords", stopwords.string()},
          {"lemmas", lemmas.string()}}},
        {"backend",
         {{"url", backend.url},
          {"mock", backend.mock},
          {"mock_dim", backend.mock_dim},
          {"mock_seed", backend.mock_seed},
          {"form", backend.form},
          {"template", backend.custom_template},
          {"pooling", embedding::to_string(backend.pooling)},
          {"cache_dir", backend.cache_dir.string()},
          {"batch_size", backend.batch_size}}},
        {"filter", {{"threshold", filter_threshold}}},
        {"factor", f},
        {"items",
         {{"source", items.source},
          {"n_scales", items.n_scales},
          {"items_per_scale", items.items_per_scale},
          {"corrected", items.corrected}}},
        {"seed", seed},
        {"workers", workers},
        {"out", out.string()},
    };
}

void PipelineConfig::validate() const {
    corpus.validate();
    if (backend.custom_template.empty()) {
        if (backend.form < 1 || backend.form > embedding::RephrasingForm::kFormCount)
            throw ConfigError(fmt::format("config: backend.form must be 1..6, got {}", backend.form));
    } else {
        (void)embedding::RephrasingForm::custom(backend.custom_template);
    }
    if (backend.mock && backend.mock_dim == 0) throw ConfigError("config: backend.mock_dim must be positive");
    if (backend.batch_size == 0) throw ConfigError("config: backend.batch_size must be positive");
    if (!(filter_threshold > 0.0 && filter_threshold <= 1.0))
        throw ConfigError("config: filter.threshold must be in (0, 1]");
    if (factor.input != "full" && factor.input != "filtered")
        throw ConfigError("config: factor.input must be full or filtered");
    if (factor.n_reps < 1) throw ConfigError("config: factor.n_reps must be >= 1");
    if (factor.n_starts < 0) throw ConfigError("config: factor.n_starts must be >= 0");
    if (!(factor.epsilon > 0.0)) throw ConfigError("config: factor.epsilon must be positive");
    if (factor.n_factors && *factor.n_factors < 1) throw ConfigError("config: factor.n_factors must be >= 1");
    if (factor.n_second_order && *factor.n_second_order < 1)
        throw ConfigError("config: factor.n_second_order must be >= 1");
    for (double c : factor.cutoffs)
        if (!(c >= 0.0 && c < 1.0)) throw ConfigError("config: factor.cutoffs must lie in [0, 1)");
    if (factor.top_words < 1) throw ConfigError("config: factor.top_words must be >= 1");
    if (items.source != "general" && items.source != "first_order")
        throw ConfigError("config: items.source must be general or first_order");
    if (items.n_scales < 1) throw ConfigError("config: items.n_scales must be >= 1");
    if (items.items_per_scale < 2) throw ConfigError("config: items.items_per_scale must be >= 2");
    if (out.empty()) throw ConfigError("config: out must be set");
}

std::size_t PipelineConfig::effective_workers() const { return workers == 0 ? default_workers() : workers; }

PipelineConfig load_config(const fs::path& path) {
    json j;
    try {
        j = json::parse(io::read_file(path));
    } catch (const json::parse_error& e) {
        throw ConfigError(fmt::format("{}: {}", path.string(), e.what()));
    } catch (const DataError& e) {
        throw ConfigError(e.what());
    }
    return PipelineConfig::from_json(j, path.parent_path());
}

}  // namespace textpsy::pipeline
