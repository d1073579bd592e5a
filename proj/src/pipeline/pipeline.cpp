#include "textpsy/pipeline.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <unordered_set>

#include "artifacts.hpp"
#include "textpsy/error.hpp"
#include "textpsy/score_matrix.hpp"
#include "textpsy/scores.hpp"
#include "textpsy/util/hash.hpp"
#include "textpsy/util/io.hpp"
#include "textpsy/util/log.hpp"

namespace textpsy::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kManifest = "manifest.json";

struct Need {
    std::string path;
    Stage producer;
    bool required = true;
};

std::vector<fs::path> corpus_files(const fs::path& source) {
    if (!fs::is_directory(source)) return {source};
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(source))
        if (e.is_regular_file() && e.path().extension() == ".jsonl") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    return files;
}

}  // namespace

const std::vector<Stage>& all_stages() {
    static const std::vector<Stage> stages{Stage::Ingest, Stage::Keywords, Stage::Score,    Stage::Diagnose,
                                           Stage::Filter, Stage::Fa1,      Stage::Fa2,      Stage::Bifactor,
                                           Stage::Items,  Stage::Report,   Stage::Plot};
    return stages;
}

std::string to_string(Stage s) {
    switch (s) {
        case Stage::Ingest: return "ingest";
        case Stage::Keywords: return "keywords";
        case Stage::Score: return "score";
        case Stage::Diagnose: return "diagnose";
        case Stage::Filter: return "filter";
        case Stage::Fa1: return "fa1";
        case Stage::Fa2: return "fa2";
        case Stage::Bifactor: return "bifactor";
        case Stage::Items: return "items";
        case Stage::Report: return "report";
        case Stage::Plot: return "plot";
    }
    return "?";
}

Stage stage_from_string(std::string_view s) {
    for (auto st : all_stages())
        if (to_string(st) == s) return st;
    throw ConfigError(fmt::format("unknown stage \"{}\"", s));
}

Pipeline::Pipeline(PipelineConfig config, std::shared_ptr<embedding::Backend> backend)
    : config_(std::move(config)), backend_(std::move(backend)) {
    config_.validate();
    load_manifest();
}

embedding::Backend& Pipeline::backend() {
    if (!backend_) {
        const auto& b = config_.backend;
        std::shared_ptr<embedding::Backend> inner;
        if (b.mock) {
            inner = std::make_shared<embedding::MockBackend>(b.mock_seed, b.mock_dim);
        } else if (!b.url.empty()) {
            embedding::HttpOptions opts;
            opts.batch_size = b.batch_size;
            inner = std::make_shared<embedding::HttpBackend>(b.url, opts);
        } else {
            throw ConfigError("no embedding backend configured: set backend.url or pass --mock-backend");
        }
        if (!b.cache_dir.empty())
            backend_ = std::make_shared<embedding::CachingBackend>(inner, b.cache_dir);
        else
            backend_ = inner;
    }
    return *backend_;
}

std::string Pipeline::fa_input() const {
    return config_.factor.input == "filtered" ? "filter/scores.bin" : "score/scores.bin";
}

json Pipeline::stage_config(Stage stage) const {
    const json all = config_.to_json();
    const auto& f = all["factor"];
    switch (stage) {
        case Stage::Ingest:
            return {{"min_tokens", config_.corpus.min_tokens},
                    {"max_tokens", config_.corpus.max_tokens},
                    {"max_docs", config_.corpus.max_docs}};
        case Stage::Keywords:
            return {{"top_n", config_.corpus.top_n}, {"min_occurrence", config_.corpus.min_occurrence}};
        case Stage::Score: {
            json b = all["backend"];
            b.erase("cache_dir");
            b.erase("batch_size");
            return b;
        }
        case Stage::Diagnose: return {{"seed", config_.seed}};
        case Stage::Filter: return {{"threshold", config_.filter_threshold}};
        case Stage::Fa1:
        case Stage::Fa2: return {{"factor", f}, {"seed", config_.seed}};
        case Stage::Bifactor: return {{"cutoffs", f["cutoffs"]}, {"top_words", f["top_words"]}};
        case Stage::Items: return {{"items", all["items"]}, {"input", f["input"]}};
        case Stage::Report: return {{"cutoffs", f["cutoffs"]}};
        case Stage::Plot: return {{"seed", config_.seed}, {"input", f["input"]}};
    }
    return {};
}

std::map<std::string, std::string> Pipeline::stage_inputs(Stage stage) const {
    std::vector<Need> needs;
    const Stage fa_producer = config_.factor.input == "filtered" ? Stage::Filter : Stage::Score;
    const std::string loadings_src =
        config_.items.source == "general" ? "bifactor/general.csv" : "fa1/loadings.csv";
    switch (stage) {
        case Stage::Ingest: break;
        case Stage::Keywords: needs = {{"ingest/lemmas.jsonl", Stage::Ingest}}; break;
        case Stage::Score:
            needs = {{"ingest/documents.jsonl", Stage::Ingest}, {"keywords/keywords.csv", Stage::Keywords}};
            break;
        case Stage::Diagnose: needs = {{"score/scores.bin", Stage::Score}}; break;
        case Stage::Filter:
            needs = {{"score/scores.bin", Stage::Score}, {"keywords/keywords.csv", Stage::Keywords}};
            break;
        case Stage::Fa1: needs = {{fa_input(), fa_producer}}; break;
        case Stage::Fa2:
            needs = {{"fa1/factor_correlations.csv", Stage::Fa1}, {"fa1/solution.json", Stage::Fa1}};
            break;
        case Stage::Bifactor:
            needs = {{"fa1/loadings.csv", Stage::Fa1},
                     {"fa1/uniqueness.csv", Stage::Fa1},
                     {"fa2/loadings.csv", Stage::Fa2},
                     {"fa2/factor_correlations.csv", Stage::Fa2},
                     {"fa2/uniqueness.csv", Stage::Fa2}};
            break;
        case Stage::Items:
            needs = {{fa_input(), fa_producer},
                     {loadings_src, config_.items.source == "general" ? Stage::Bifactor : Stage::Fa1}};
            break;
        case Stage::Report:
            needs = {{"ingest/summary.json", Stage::Ingest},
                     {"keywords/keywords.csv", Stage::Keywords},
                     {"fa1/summary.json", Stage::Fa1},
                     {"diagnose/summary.json", Stage::Diagnose, false},
                     {"filter/removed.csv", Stage::Filter, false},
                     {"fa2/solution.json", Stage::Fa2, false},
                     {"bifactor/summary.json", Stage::Bifactor, false},
                     {"bifactor/top_words.csv", Stage::Bifactor, false},
                     {"items/item_total.csv", Stage::Items, false}};
            break;
        case Stage::Plot:
            needs = {{fa_input(), fa_producer},
                     {"fa1/parallel.csv", Stage::Fa1},
                     {"fa1/top_words.csv", Stage::Fa1},
                     {"fa2/parallel.csv", Stage::Fa2, false},
                     {"bifactor/top_words.csv", Stage::Bifactor, false}};
            break;
    }

    std::map<std::string, std::string> inputs;
    if (stage == Stage::Ingest) {
        if (config_.corpus_source.empty())
            throw ConfigError("corpus.source is not set (config file or --corpus)");
        if (!fs::exists(config_.corpus_source))
            throw DataError("corpus source not found: " + config_.corpus_source.string());
        for (const auto& f : corpus_files(config_.corpus_source))
            inputs["external:" + f.string()] = sha256_file(f);
        inputs["external:" + config_.stopwords.string()] = sha256_file(config_.stopwords);
        inputs["external:" + config_.lemmas.string()] = sha256_file(config_.lemmas);
    }
    for (const auto& n : needs) {
        const auto p = path(n.path);
        if (!fs::exists(p)) {
            if (!n.required) continue;
            throw DataError(fmt::format("stage {} needs {} from stage {}; run `textpsy {}` first", to_string(stage),
                                        n.path, to_string(n.producer), to_string(n.producer)));
        }
        inputs[n.path] = sha256_file(p);
    }
    return inputs;
}

void Pipeline::load_manifest() {
    const auto p = path(kManifest);
    manifest_ = json::object();
    if (fs::exists(p)) {
        try {
            manifest_ = json::parse(io::read_file(p));
        } catch (const json::exception&) {
            log::warn("ignoring unreadable manifest " + p.string());
            manifest_ = json::object();
        }
    }
    if (!manifest_.contains("stages") || !manifest_["stages"].is_object()) manifest_["stages"] = json::object();
}

void Pipeline::save_manifest() {
    manifest_["tool"] = kToolVersion;
    manifest_["config"] = config_.to_json();
    json seeds = {{"run", config_.seed}};
    for (const char* c : {"diagnose.split", "fa1.parallel", "fa1.rotation", "fa2.parallel", "fa2.rotation"})
        seeds[c] = derive_seed(config_.seed, c);
    manifest_["seeds"] = seeds;
    json artifacts = json::object();
    for (const auto& [name, entry] : manifest_["stages"].items())
        for (const auto& [file, sha] : entry["outputs"].items()) artifacts[file] = sha;
    manifest_["artifacts"] = artifacts;
    io::write_file_atomic(path(kManifest), manifest_.dump(2) + "\n");
}

StageResult Pipeline::run(Stage stage) {
    const auto name = to_string(stage);
    const auto t0 = std::chrono::steady_clock::now();
    const auto inputs = stage_inputs(stage);
    const json key_doc = {{"stage", name}, {"tool", kToolVersion}, {"config", stage_config(stage)}, {"inputs", inputs}};
    const auto key = sha256_hex(key_doc.dump());

    StageResult result;
    result.stage = stage;
    auto& stages = manifest_["stages"];
    if (stages.contains(name) && stages[name].value("key", "") == key) {
        bool intact = true;
        for (const auto& [file, sha] : stages[name]["outputs"].items()) {
            const auto p = path(file);
            if (!fs::exists(p) || sha256_file(p) != sha.get<std::string>()) {
                intact = false;
                break;
            }
            result.outputs.push_back(file);
        }
        if (intact) {
            result.skipped = true;
            log::info(fmt::format("{}: skipped (up-to-date)", name));
            return result;
        }
        result.outputs.clear();
    }

    Outputs outputs;
    switch (stage) {
        case Stage::Ingest: outputs = run_ingest(); break;
        case Stage::Keywords: outputs = run_keywords(); break;
        case Stage::Score: outputs = run_score(); break;
        case Stage::Diagnose: outputs = run_diagnose(); break;
        case Stage::Filter: outputs = run_filter(); break;
        case Stage::Fa1: outputs = run_fa1(); break;
        case Stage::Fa2: outputs = run_fa2(); break;
        case Stage::Bifactor: outputs = run_bifactor(); break;
        case Stage::Items: outputs = run_items(); break;
        case Stage::Report: outputs = run_report(); break;
        case Stage::Plot: outputs = run_plot(); break;
    }

    json written = json::object();
    std::unordered_set<std::string> fresh;
    for (const auto& [file, contents] : outputs) {
        io::write_file_atomic(path(file), contents);
        written[file] = sha256_hex(contents);
        fresh.insert(file);
        result.outputs.push_back(file);
    }
    // Artifacts this stage produced last time but not now would otherwise
    // linger unlisted.
    if (stages.contains(name))
        for (const auto& [file, sha] : stages[name]["outputs"].items())
            if (!fresh.contains(file)) fs::remove(path(file));

    result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    stages[name] = {{"key", key}, {"inputs", inputs}, {"outputs", written}, {"seconds", result.seconds}};
    save_manifest();
    log::info(fmt::format("{}: wrote {} artifact(s) in {:.2f} s", name, outputs.size(), result.seconds));
    return result;
}

std::vector<StageResult> Pipeline::run_all() {
    std::vector<StageResult> out;
    for (auto s : all_stages()) out.push_back(run(s));
    return out;
}

// ---------------------------------------------------------------------------
// Corpus and score stages

Pipeline::Outputs Pipeline::run_ingest() {
    const auto raw = corpus::ingest(config_.corpus_source);
    const auto stop = corpus::StopWords::load(config_.stopwords);
    const auto lemmas = corpus::LemmaTable::load(config_.lemmas);
    const auto tokenized = corpus::preprocess_all(raw, stop, lemmas, config_.effective_workers());
    const auto kept = corpus::filter_documents(tokenized, config_.corpus);
    if (kept.empty()) throw DataError("no documents left after length filtering");

    std::size_t too_short = 0, too_long = 0;
    for (const auto& d : tokenized) {
        if (d.token_count < config_.corpus.min_tokens) ++too_short;
        if (d.token_count > config_.corpus.max_tokens) ++too_long;
    }
    std::unordered_set<std::string> kept_ids;
    for (const auto& d : kept) kept_ids.insert(d.id);
    std::vector<corpus::RawDocument> kept_raw;
    for (const auto& d : raw)
        if (kept_ids.contains(d.id)) kept_raw.push_back(d);

    const json summary = {{"ingested", raw.size()},
                          {"too_short", too_short},
                          {"too_long", too_long},
                          {"retained", kept.size()},
                          {"truncated", tokenized.size() - too_short - too_long - kept.size()}};
    return {{"ingest/documents.jsonl", artifacts::documents_jsonl(kept_raw)},
            {"ingest/lemmas.jsonl", artifacts::lemmas_jsonl(kept)},
            {"ingest/summary.json", artifacts::dump(summary)}};
}

Pipeline::Outputs Pipeline::run_keywords() {
    const auto docs = artifacts::read_lemmas_jsonl(path("ingest/lemmas.jsonl"));
    const auto lists = corpus::tfidf_keywords(docs, config_.corpus, config_.effective_workers());
    const auto set = corpus::common_keywords(lists, config_.corpus);

    std::string per_doc = io::csv_row({"doc_id", "rank", "word", "score"});
    for (const auto& d : docs) {
        const auto it = lists.find(d.id);
        if (it == lists.end()) continue;
        for (std::size_t r = 0; r < it->second.size(); ++r)
            per_doc += io::csv_row({d.id, std::to_string(r + 1), it->second[r].word,
                                    io::format_real(it->second[r].score)});
    }
    return {{"keywords/doc_keywords.csv", per_doc}, {"keywords/keywords.csv", corpus::keywords_to_csv(set)}};
}

Pipeline::Outputs Pipeline::run_score() {
    const auto docs = corpus::ingest(path("ingest/documents.jsonl"));
    const auto keywords = corpus::keywords_from_csv(path("keywords/keywords.csv"));
    if (keywords.empty()) throw DataError("keyword set is empty; lower corpus.min_occurrence");
    scores::BuildOptions opts;
    opts.form = config_.backend.custom_template.empty()
                    ? embedding::RephrasingForm::shipped(config_.backend.form)
                    : embedding::RephrasingForm::custom(config_.backend.custom_template);
    opts.pooling = config_.backend.pooling;
    opts.workers = config_.effective_workers();
    const auto y = scores::build_score_matrix(docs, keywords.words(), backend(), opts);
    return {{"score/scores.csv", to_csv(y)}, {"score/scores.bin", to_binary(y)}};
}

Pipeline::Outputs Pipeline::run_diagnose() {
    const auto y = read_score_matrix(path("score/scores.bin"));
    const auto d = scores::diagnostics(y, derive_seed(config_.seed, "diagnose.split"));
    std::size_t skew = 0, kurt = 0;
    for (const auto& w : d.words) {
        skew += w.skew_flag;
        kurt += w.kurtosis_flag;
    }
    const json summary = {{"n_docs", y.n_docs()},
                          {"n_words", y.n_words()},
                          {"mean_pairwise_r", d.mean_pairwise_r},
                          {"mean_abs_pairwise_r", d.mean_abs_pairwise_r},
                          {"skew_flags", skew},
                          {"kurtosis_flags", kurt},
                          {"constant_words", d.constant_words}};
    return {{"diagnose/diagnostics.csv", scores::diagnostics_to_csv(d)},
            {"diagnose/summary.json", artifacts::dump(summary)}};
}

Pipeline::Outputs Pipeline::run_filter() {
    const auto y = read_score_matrix(path("score/scores.bin"));
    const auto keywords = corpus::keywords_from_csv(path("keywords/keywords.csv"));
    const auto result = scores::collinearity_filter(y, keywords, config_.filter_threshold);
    return {{"filter/removed.csv", scores::filter_report_to_csv(result.report)},
            {"filter/scores.csv", to_csv(result.filtered)},
            {"filter/scores.bin", to_binary(result.filtered)}};
}

}  // namespace textpsy::pipeline
