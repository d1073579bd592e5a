#pragma once

// Batch pipeline: corpus -> keywords -> contextual scores -> factor analyses
// -> item analysis -> report and plots. Every stage reads its inputs from the
// output directory and writes its artifacts back atomically; a manifest keyed
// by content hashes lets unchanged stages be skipped.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "textpsy/corpus.hpp"
#include "textpsy/embedding.hpp"
#include "textpsy/factor.hpp"

namespace textpsy::pipeline {

inline constexpr const char* kToolVersion = "textpsy 0.1.0";

enum class Stage { Ingest, Keywords, Score, Diagnose, Filter, Fa1, Fa2, Bifactor, Items, Report, Plot };

// Execution order of `all`.
const std::vector<Stage>& all_stages();
std::string to_string(Stage s);
Stage stage_from_string(std::string_view s);

struct BackendConfig {
    std::string url;                 // HTTP backend base URL
    bool mock = false;               // in-process MockBackend instead
    std::size_t mock_dim = 64;
    std::uint64_t mock_seed = 0;
    int form = 1;                    // shipped template 1..6
    std::string custom_template;     // overrides `form` when set
    embedding::PoolingMethod pooling = embedding::PoolingMethod::Mean;
    std::filesystem::path cache_dir;  // empty = no response cache
    std::size_t batch_size = 64;
};

struct FactorConfig {
    std::string input = "full";  // "full" or "filtered" score matrix
    int n_reps = 100;
    factor::PaCriterion criterion = factor::PaCriterion::Mean;
    factor::PaObserved observed = factor::PaObserved::Reduced;
    factor::RotationCriterion rotation = factor::RotationCriterion::Geomin;
    double epsilon = 0.01;
    double gamma = 0.0;
    int n_starts = 10;
    std::vector<double> cutoffs{0.3, 0.5};
    std::optional<int> n_factors;        // fixed K instead of parallel analysis
    std::optional<int> n_second_order;   // fixed L
    std::size_t top_words = 30;
};

struct ItemsConfig {
    std::string source = "general";  // "general" (bifactor) or "first_order" loadings
    std::size_t n_scales = 3;
    std::size_t items_per_scale = 30;
    bool corrected = false;
};

struct PipelineConfig {
    std::filesystem::path corpus_source;
    corpus::CorpusConfig corpus;
    std::filesystem::path stopwords;  // resolved data files
    std::filesystem::path lemmas;
    BackendConfig backend;
    double filter_threshold = 0.8;
    FactorConfig factor;
    ItemsConfig items;
    std::uint64_t seed = 0;
    std::size_t workers = 0;  // 0 = hardware concurrency
    std::filesystem::path out = "textpsy_out";

    // Unknown keys and out-of-range values are ConfigErrors. Relative paths
    // resolve against `base_dir`; data file ids resolve against the shipped
    // data directory when no such file exists there.
    static PipelineConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
    nlohmann::json to_json() const;
    void validate() const;
    std::size_t effective_workers() const;
};

PipelineConfig load_config(const std::filesystem::path& path);

// Sub-seed for a named random component, derived from the run seed.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view component);

struct StageResult {
    Stage stage;
    bool skipped = false;
    std::vector<std::string> outputs;  // paths relative to the output directory
    double seconds = 0.0;
};

class Pipeline {
public:
    // Relative path -> contents of one stage's artifacts.
    using Outputs = std::vector<std::pair<std::string, std::string>>;

    // `backend` overrides the configured one (tests inject fakes here).
    explicit Pipeline(PipelineConfig config, std::shared_ptr<embedding::Backend> backend = nullptr);

    StageResult run(Stage stage);
    std::vector<StageResult> run_all();

    const PipelineConfig& config() const { return config_; }
    std::filesystem::path path(std::string_view relative) const { return config_.out / relative; }

private:
    embedding::Backend& backend();
    nlohmann::json stage_config(Stage stage) const;
    std::map<std::string, std::string> stage_inputs(Stage stage) const;
    std::string fa_input() const;  // score matrix consumed by the factor stages
    void load_manifest();
    void save_manifest();

    Outputs run_ingest();
    Outputs run_keywords();
    Outputs run_score();
    Outputs run_diagnose();
    Outputs run_filter();
    Outputs run_fa1();
    Outputs run_fa2();
    Outputs run_bifactor();
    Outputs run_items();
    Outputs run_report();
    Outputs run_plot();

    PipelineConfig config_;
    std::shared_ptr<embedding::Backend> backend_;
    nlohmann::json manifest_;
};

}  // namespace textpsy::pipeline
