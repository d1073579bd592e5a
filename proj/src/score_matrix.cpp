#include "textpsy/score_matrix.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <bit>
#include <cmath>
#include <cstdint>
#include <unordered_set>

#include "textpsy/error.hpp"
#include "textpsy/util/io.hpp"

namespace textpsy {

namespace {

void check_unique(const std::vector<std::string>& labels, const char* what) {
    std::unordered_set<std::string> seen;
    for (const auto& l : labels)
        if (!seen.insert(l).second) throw DataError(fmt::format("score matrix: duplicate {} \"{}\"", what, l));
}

}  // namespace

void ScoreMatrix::validate() const {
    if (static_cast<std::size_t>(values.rows()) != doc_ids.size())
        throw DataError(fmt::format("score matrix: {} rows but {} doc ids", values.rows(), doc_ids.size()));
    if (static_cast<std::size_t>(values.cols()) != words.size())
        throw DataError(fmt::format("score matrix: {} columns but {} words", values.cols(), words.size()));
    check_unique(doc_ids, "doc id");
    check_unique(words, "word");
    if (!values.allFinite()) throw DataError("score matrix contains non-finite entries");
}

ScoreMatrix ScoreMatrix::select_columns(const std::vector<Eigen::Index>& columns) const {
    ScoreMatrix out;
    out.doc_ids = doc_ids;
    out.values.resize(values.rows(), static_cast<Eigen::Index>(columns.size()));
    for (std::size_t k = 0; k < columns.size(); ++k) {
        out.values.col(static_cast<Eigen::Index>(k)) = values.col(columns[k]);
        out.words.push_back(words.at(static_cast<std::size_t>(columns[k])));
    }
    return out;
}

Eigen::Index ScoreMatrix::column_of(const std::string& word) const {
    for (std::size_t j = 0; j < words.size(); ++j)
        if (words[j] == word) return static_cast<Eigen::Index>(j);
    return -1;
}

std::string to_csv(const ScoreMatrix& y) {
    std::vector<std::string> header{"doc_id"};
    header.insert(header.end(), y.words.begin(), y.words.end());
    std::string out = io::csv_row(header);
    std::vector<std::string> row;
    for (Eigen::Index i = 0; i < y.values.rows(); ++i) {
        row.clear();
        row.push_back(y.doc_ids[static_cast<std::size_t>(i)]);
        for (Eigen::Index j = 0; j < y.values.cols(); ++j) row.push_back(io::format_real(y.values(i, j)));
        out += io::csv_row(row);
    }
    return out;
}

ScoreMatrix score_matrix_from_csv(const std::filesystem::path& path) {
    const auto rows = io::read_csv(path);
    if (rows.empty() || rows[0].empty() || rows[0][0] != "doc_id")
        throw DataError(path.string() + ": expected header starting with doc_id");
    ScoreMatrix y;
    y.words.assign(rows[0].begin() + 1, rows[0].end());
    const auto n = static_cast<Eigen::Index>(rows.size() - 1);
    const auto j = static_cast<Eigen::Index>(y.words.size());
    y.values.resize(n, j);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& r = rows[static_cast<std::size_t>(i + 1)];
        if (static_cast<Eigen::Index>(r.size()) != j + 1)
            throw DataError(fmt::format("{}: row {} has {} fields", path.string(), i + 2, r.size()));
        y.doc_ids.push_back(r[0]);
        for (Eigen::Index c = 0; c < j; ++c) y.values(i, c) = std::stod(r[static_cast<std::size_t>(c + 1)]);
    }
    y.validate();
    return y;
}

std::string to_binary(const ScoreMatrix& y) {
    const nlohmann::json header = {
        {"N", y.values.rows()}, {"J", y.values.cols()}, {"doc_ids", y.doc_ids}, {"words", y.words}};
    const std::string h = header.dump();
    std::string out;
    out.reserve(8 + h.size() + 8 * static_cast<std::size_t>(y.values.size()));
    const auto hlen = static_cast<std::uint64_t>(h.size());
    for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((hlen >> (8 * b)) & 0xFF));
    out += h;
    for (Eigen::Index i = 0; i < y.values.rows(); ++i)
        for (Eigen::Index j = 0; j < y.values.cols(); ++j) {
            const auto bits = std::bit_cast<std::uint64_t>(y.values(i, j));
            for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xFF));
        }
    return out;
}

ScoreMatrix score_matrix_from_binary(std::string_view bytes) {
    auto read_u64 = [&](std::size_t offset) {
        std::uint64_t v = 0;
        for (int b = 0; b < 8; ++b)
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[offset + b])) << (8 * b);
        return v;
    };
    if (bytes.size() < 8) throw DataError("score matrix binary: truncated header");
    const auto hlen = read_u64(0);
    if (bytes.size() < 8 + hlen) throw DataError("score matrix binary: truncated header");
    ScoreMatrix y;
    std::size_t n = 0, j = 0;
    try {
        const auto header = nlohmann::json::parse(bytes.substr(8, hlen));
        n = header.at("N").get<std::size_t>();
        j = header.at("J").get<std::size_t>();
        y.doc_ids = header.at("doc_ids").get<std::vector<std::string>>();
        y.words = header.at("words").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("score matrix binary: bad header: ") + e.what());
    }
    const std::size_t payload = 8 + hlen;
    if (bytes.size() != payload + 8 * n * j) throw DataError("score matrix binary: payload size mismatch");
    y.values.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(j));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < j; ++c)
            y.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) =
                std::bit_cast<double>(read_u64(payload + 8 * (i * j + c)));
    y.validate();
    return y;
}

ScoreMatrix read_score_matrix(const std::filesystem::path& binary_path) {
    return score_matrix_from_binary(io::read_file(binary_path));
}

}  // namespace textpsy
