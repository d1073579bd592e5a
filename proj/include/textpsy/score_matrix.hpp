#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <string>
#include <vector>

namespace textpsy {

/// Documents x keywords matrix of contextual scores (the response data).
struct ScoreMatrix {
    Eigen::MatrixXd values;            // N x J
    std::vector<std::string> doc_ids;  // length N
    std::vector<std::string> words;    // length J

    Eigen::Index n_docs() const { return values.rows(); }
    Eigen::Index n_words() const { return values.cols(); }

    // Throws DataError on shape mismatch, duplicate labels, or non-finite entries.
    void validate() const;

    // Column subset in the given order.
    ScoreMatrix select_columns(const std::vector<Eigen::Index>& columns) const;
    Eigen::Index column_of(const std::string& word) const;  // -1 if absent
};

// CSV: header `doc_id,<word1>,...`, values at 9 significant digits.
std::string to_csv(const ScoreMatrix& y);
ScoreMatrix score_matrix_from_csv(const std::filesystem::path& path);

// Binary companion: u64 LE header length, JSON header {"N","J","doc_ids",
// "words"}, then N*J little-endian float64 values in row-major order.
std::string to_binary(const ScoreMatrix& y);
ScoreMatrix score_matrix_from_binary(std::string_view bytes);
ScoreMatrix read_score_matrix(const std::filesystem::path& binary_path);

}  // namespace textpsy
