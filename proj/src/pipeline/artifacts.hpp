#pragma once

// Artifact formats shared by the pipeline stages.

#include <Eigen/Dense>
#include <json.hpp>

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "textpsy/corpus.hpp"

namespace textpsy::pipeline::artifacts {

// Relative path -> contents, written together once a stage has finished.
using Outputs = std::vector<std::pair<std::string, std::string>>;

// CSV with a corner label, column labels in the header and row labels in the
// first column.
struct LabeledMatrix {
    std::string corner;
    std::vector<std::string> rows;
    std::vector<std::string> cols;
    Eigen::MatrixXd values;

    std::string to_csv() const;
    static LabeledMatrix from_csv(const std::filesystem::path& path);
};

std::vector<std::string> factor_labels(const char* prefix, Eigen::Index n);

// One column vector as `label,<name>` rows.
std::string vector_csv(const std::string& corner, const std::string& name, const std::vector<std::string>& labels,
                       const Eigen::VectorXd& v);

// {"id", "token_count", "lemmas"} per line.
std::string lemmas_jsonl(const std::vector<corpus::TokenizedDocument>& docs);
std::vector<corpus::TokenizedDocument> read_lemmas_jsonl(const std::filesystem::path& path);

std::string documents_jsonl(const std::vector<corpus::RawDocument>& docs);

nlohmann::json read_json(const std::filesystem::path& path);
std::string dump(const nlohmann::json& j);

}  // namespace textpsy::pipeline::artifacts
