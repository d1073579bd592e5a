#include "artifacts.hpp"

#include <fmt/format.h>

#include <sstream>

#include "textpsy/error.hpp"
#include "textpsy/util/io.hpp"

namespace textpsy::pipeline::artifacts {

std::string LabeledMatrix::to_csv() const {
    std::vector<std::string> header{corner};
    header.insert(header.end(), cols.begin(), cols.end());
    std::string out = io::csv_row(header);
    for (Eigen::Index i = 0; i < values.rows(); ++i) {
        std::vector<std::string> row{rows[static_cast<std::size_t>(i)]};
        for (Eigen::Index j = 0; j < values.cols(); ++j) row.push_back(io::format_real(values(i, j)));
        out += io::csv_row(row);
    }
    return out;
}

LabeledMatrix LabeledMatrix::from_csv(const std::filesystem::path& path) {
    const auto table = io::read_csv(path);
    if (table.empty() || table[0].empty()) throw DataError(path.string() + ": empty matrix file");
    LabeledMatrix m;
    m.corner = table[0][0];
    m.cols.assign(table[0].begin() + 1, table[0].end());
    m.values.resize(static_cast<Eigen::Index>(table.size() - 1), static_cast<Eigen::Index>(m.cols.size()));
    for (std::size_t i = 1; i < table.size(); ++i) {
        const auto& r = table[i];
        if (r.size() != m.cols.size() + 1)
            throw DataError(fmt::format("{}: row {} has {} fields", path.string(), i + 1, r.size()));
        m.rows.push_back(r[0]);
        for (std::size_t j = 0; j < m.cols.size(); ++j) {
            try {
                m.values(static_cast<Eigen::Index>(i - 1), static_cast<Eigen::Index>(j)) = std::stod(r[j + 1]);
            } catch (const std::exception&) {
                throw DataError(fmt::format("{}: bad number \"{}\" on row {}", path.string(), r[j + 1], i + 1));
            }
        }
    }
    return m;
}

std::vector<std::string> factor_labels(const char* prefix, Eigen::Index n) {
    std::vector<std::string> out;
    for (Eigen::Index k = 0; k < n; ++k) out.push_back(fmt::format("{}{}", prefix, k + 1));
    return out;
}

std::string vector_csv(const std::string& corner, const std::string& name, const std::vector<std::string>& labels,
                       const Eigen::VectorXd& v) {
    std::string out = io::csv_row({corner, name});
    for (Eigen::Index i = 0; i < v.size(); ++i)
        out += io::csv_row({labels[static_cast<std::size_t>(i)], io::format_real(v(i))});
    return out;
}

std::string lemmas_jsonl(const std::vector<corpus::TokenizedDocument>& docs) {
    std::string out;
    for (const auto& d : docs) {
        const nlohmann::json rec = {{"id", d.id}, {"token_count", d.token_count}, {"lemmas", d.lemmas}};
        out += rec.dump() + "\n";
    }
    return out;
}

std::vector<corpus::TokenizedDocument> read_lemmas_jsonl(const std::filesystem::path& path) {
    std::istringstream in(io::read_file(path));
    std::vector<corpus::TokenizedDocument> docs;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.empty()) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            corpus::TokenizedDocument d;
            d.id = j.at("id").get<std::string>();
            d.token_count = j.at("token_count").get<std::size_t>();
            d.lemmas = j.at("lemmas").get<std::vector<std::string>>();
            docs.push_back(std::move(d));
        } catch (const nlohmann::json::exception& e) {
            throw DataError(fmt::format("{}: record {}: {}", path.string(), n, e.what()));
        }
    }
    return docs;
}

std::string documents_jsonl(const std::vector<corpus::RawDocument>& docs) {
    std::string out;
    for (const auto& d : docs) out += nlohmann::json{{"id", d.id}, {"text", d.text}}.dump() + "\n";
    return out;
}

nlohmann::json read_json(const std::filesystem::path& path) {
    try {
        return nlohmann::json::parse(io::read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw DataError(fmt::format("{}: {}", path.string(), e.what()));
    }
}

std::string dump(const nlohmann::json& j) { return j.dump(2) + "\n"; }

}  // namespace textpsy::pipeline::artifacts
