#include "textpsy/corpus.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "textpsy/error.hpp"
#include "textpsy/util/io.hpp"
#include "textpsy/util/log.hpp"
#include "textpsy/util/parallel.hpp"

namespace textpsy::corpus {

namespace {

bool entry_order(const KeywordEntry& a, const KeywordEntry& b) {
    if (a.occurrences != b.occurrences) return a.occurrences > b.occurrences;
    return a.word < b.word;
}

// Decodes one UTF-8 code point starting at text[pos]. Invalid bytes decode
// as themselves with length 1.
char32_t decode_utf8(std::string_view text, std::size_t pos, std::size_t& len) {
    const auto b0 = static_cast<unsigned char>(text[pos]);
    auto cont = [&](std::size_t k) -> int {
        if (pos + k >= text.size()) return -1;
        const auto b = static_cast<unsigned char>(text[pos + k]);
        return (b & 0xC0) == 0x80 ? (b & 0x3F) : -1;
    };
    if (b0 < 0x80) {
        len = 1;
        return b0;
    }
    if ((b0 & 0xE0) == 0xC0) {
        const int c1 = cont(1);
        if (c1 >= 0) {
            len = 2;
            return static_cast<char32_t>(((b0 & 0x1F) << 6) | c1);
        }
    } else if ((b0 & 0xF0) == 0xE0) {
        const int c1 = cont(1), c2 = cont(2);
        if (c1 >= 0 && c2 >= 0) {
            len = 3;
            return static_cast<char32_t>(((b0 & 0x0F) << 12) | (c1 << 6) | c2);
        }
    } else if ((b0 & 0xF8) == 0xF0) {
        const int c1 = cont(1), c2 = cont(2), c3 = cont(3);
        if (c1 >= 0 && c2 >= 0 && c3 >= 0) {
            len = 4;
            return static_cast<char32_t>(((b0 & 0x07) << 18) | (c1 << 12) | (c2 << 6) | c3);
        }
    }
    len = 1;
    return b0;
}

bool is_space(char32_t c) {
    return (c >= 0x09 && c <= 0x0D) || c == 0x20 || c == 0x85 || c == 0xA0 || c == 0x1680 ||
           (c >= 0x2000 && c <= 0x200A) || c == 0x2028 || c == 0x2029 || c == 0x202F || c == 0x205F ||
           c == 0x3000;
}

bool is_punct(char32_t c) {
    if (c < 0x80) return std::ispunct(static_cast<int>(c)) != 0;
    switch (c) {
        case 0x00A1: case 0x00AB: case 0x00B7: case 0x00BB: case 0x00BF:
        case 0x2010: case 0x2011: case 0x2012: case 0x2013: case 0x2014: case 0x2015:
        case 0x2018: case 0x2019: case 0x201A: case 0x201C: case 0x201D: case 0x201E:
        case 0x2020: case 0x2021: case 0x2022: case 0x2026: case 0x2032: case 0x2033:
        case 0x2039: case 0x203A: case 0x3001: case 0x3002:
            return true;
        default:
            return false;
    }
}

std::string trim_and_fold(std::string_view raw) {
    // Collect code point boundaries so trimming works on whole characters.
    std::vector<std::pair<std::size_t, std::size_t>> cps;  // (offset, length)
    std::vector<bool> punct;
    for (std::size_t pos = 0; pos < raw.size();) {
        std::size_t len = 1;
        const char32_t c = decode_utf8(raw, pos, len);
        cps.emplace_back(pos, len);
        punct.push_back(is_punct(c));
        pos += len;
    }
    std::size_t first = 0, last = cps.size();
    while (first < last && punct[first]) ++first;
    while (last > first && punct[last - 1]) --last;
    if (first == last) return {};
    const std::size_t begin = cps[first].first;
    const std::size_t end = cps[last - 1].first + cps[last - 1].second;
    std::string out(raw.substr(begin, end - begin));
    for (char& ch : out)
        if (ch >= 'A' && ch <= 'Z') ch = static_cast<char>(ch - 'A' + 'a');
    return out;
}

}  // namespace

std::vector<std::string> KeywordSet::words() const {
    std::vector<std::string> out;
    out.reserve(entries.size());
    for (const auto& e : entries) out.push_back(e.word);
    return out;
}

std::size_t KeywordSet::occurrences(std::string_view word) const {
    for (const auto& e : entries)
        if (e.word == word) return e.occurrences;
    return 0;
}

void CorpusConfig::validate() const {
    if (min_tokens == 0 || min_tokens >= max_tokens)
        throw ConfigError(fmt::format("corpus: need 0 < min_tokens < max_tokens (got {} and {})", min_tokens,
                                      max_tokens));
    if (top_n < 1) throw ConfigError("corpus: top_n must be >= 1");
    if (min_occurrence < 1) throw ConfigError("corpus: min_occurrence must be >= 1");
    if (max_docs < 1) throw ConfigError("corpus: max_docs must be >= 1");
}

StopWords StopWords::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read stop-word list " + path.string());
    std::unordered_set<std::string> words;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.front() == '#') continue;
        words.insert(trim_and_fold(line));
    }
    return StopWords(std::move(words));
}

LemmaTable LemmaTable::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read lemma table " + path.string());
    std::unordered_map<std::string, std::string> table;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.front() == '#') continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos)
            throw DataError(fmt::format("{}:{}: expected two tab-separated columns", path.string(), lineno));
        table[line.substr(0, tab)] = line.substr(tab + 1);
    }
    return LemmaTable(std::move(table));
}

const std::string& LemmaTable::lemmatize(const std::string& word) const {
    const auto it = table_.find(word);
    return it == table_.end() ? word : it->second;
}

std::vector<RawDocument> ingest_stream(std::istream& in, const std::string& source_name) {
    std::vector<RawDocument> docs;
    std::unordered_set<std::string> seen;
    std::string line;
    std::size_t record = 0;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        ++record;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw DataError(fmt::format("{}: malformed record {}: {}", source_name, record, e.what()));
        }
        if (!j.is_object() || !j.contains("id") || !j.contains("text") || !j["id"].is_string() ||
            !j["text"].is_string())
            throw DataError(fmt::format("{}: malformed record {}: need string fields \"id\" and \"text\"",
                                        source_name, record));
        RawDocument doc{j["id"].get<std::string>(), j["text"].get<std::string>()};
        if (doc.id.empty()) throw DataError(fmt::format("{}: malformed record {}: empty id", source_name, record));
        if (doc.text.empty())
            throw DataError(fmt::format("{}: malformed record {}: empty text", source_name, record));
        if (!seen.insert(doc.id).second)
            throw DataError(fmt::format("{}: duplicate document id \"{}\" at record {}", source_name, doc.id, record));
        docs.push_back(std::move(doc));
    }
    return docs;
}

std::vector<RawDocument> ingest(const std::filesystem::path& source) {
    namespace fs = std::filesystem;
    std::vector<fs::path> files;
    if (fs::is_directory(source)) {
        for (const auto& entry : fs::directory_iterator(source))
            if (entry.is_regular_file() && entry.path().extension() == ".jsonl") files.push_back(entry.path());
        std::sort(files.begin(), files.end());
    } else {
        files.push_back(source);
    }

    std::vector<RawDocument> docs;
    std::unordered_set<std::string> seen;
    for (const auto& file : files) {
        std::ifstream in(file);
        if (!in) throw DataError("cannot read corpus source " + file.string());
        for (auto& doc : ingest_stream(in, file.string())) {
            if (!seen.insert(doc.id).second)
                throw DataError(fmt::format("duplicate document id \"{}\" in {}", doc.id, file.string()));
            docs.push_back(std::move(doc));
        }
    }
    if (docs.empty()) log::warn("corpus source " + source.string() + " contains no documents");
    return docs;
}

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::size_t start = 0;
    bool in_token = false;
    auto flush = [&](std::size_t end) {
        if (!in_token) return;
        std::string tok = trim_and_fold(text.substr(start, end - start));
        if (!tok.empty()) tokens.push_back(std::move(tok));
        in_token = false;
    };
    for (std::size_t pos = 0; pos < text.size();) {
        std::size_t len = 1;
        const char32_t c = decode_utf8(text, pos, len);
        if (is_space(c)) {
            flush(pos);
        } else if (!in_token) {
            in_token = true;
            start = pos;
        }
        pos += len;
    }
    flush(text.size());
    return tokens;
}

TokenizedDocument preprocess(const RawDocument& doc, const StopWords& stop, const LemmaTable& lemmas) {
    TokenizedDocument out;
    out.id = doc.id;
    out.tokens = tokenize(doc.text);
    out.token_count = out.tokens.size();
    for (const auto& tok : out.tokens) {
        if (stop.contains(tok)) continue;
        const std::string& lemma = lemmas.lemmatize(tok);
        if (stop.contains(lemma)) continue;
        out.lemmas.push_back(lemma);
    }
    return out;
}

std::vector<TokenizedDocument> preprocess_all(const std::vector<RawDocument>& docs, const StopWords& stop,
                                              const LemmaTable& lemmas, std::size_t workers) {
    std::vector<TokenizedDocument> out(docs.size());
    parallel_for(docs.size(), workers, [&](std::size_t i) { out[i] = preprocess(docs[i], stop, lemmas); });
    return out;
}

std::vector<TokenizedDocument> filter_documents(const std::vector<TokenizedDocument>& docs,
                                                const CorpusConfig& config) {
    std::vector<TokenizedDocument> kept;
    for (const auto& d : docs) {
        if (kept.size() >= config.max_docs) break;
        if (d.token_count >= config.min_tokens && d.token_count <= config.max_tokens) kept.push_back(d);
    }
    return kept;
}

KeywordLists tfidf_keywords(const std::vector<TokenizedDocument>& docs, const CorpusConfig& config,
                            std::size_t workers) {
    if (docs.empty()) throw DataError("tfidf_keywords: empty corpus");

    std::unordered_map<std::string, std::size_t> df;
    for (const auto& d : docs) {
        std::unordered_set<std::string_view> distinct(d.lemmas.begin(), d.lemmas.end());
        for (auto w : distinct) ++df[std::string(w)];
    }
    const double n_docs = static_cast<double>(docs.size());

    std::vector<std::vector<ScoredWord>> lists(docs.size());
    parallel_for(docs.size(), workers, [&](std::size_t i) {
        std::map<std::string_view, std::size_t> tf;
        for (const auto& w : docs[i].lemmas) ++tf[w];
        std::vector<ScoredWord> scored;
        scored.reserve(tf.size());
        for (const auto& [w, count] : tf) {
            const double idf = std::log(n_docs / static_cast<double>(df.at(std::string(w))));
            scored.push_back({std::string(w), static_cast<double>(count) * idf});
        }
        std::sort(scored.begin(), scored.end(), [](const ScoredWord& a, const ScoredWord& b) {
            if (a.score != b.score) return a.score > b.score;
            return a.word < b.word;
        });
        if (scored.size() > config.top_n) scored.resize(config.top_n);
        lists[i] = std::move(scored);
    });

    KeywordLists out;
    for (std::size_t i = 0; i < docs.size(); ++i) out.emplace(docs[i].id, std::move(lists[i]));
    return out;
}

KeywordSet common_keywords(const std::map<std::string, std::vector<std::string>>& keyword_lists,
                           const CorpusConfig& config) {
    std::map<std::string, std::size_t> counts;
    for (const auto& [id, words] : keyword_lists) {
        // A word listed twice for one document still counts once.
        std::unordered_set<std::string_view> distinct(words.begin(), words.end());
        for (auto w : distinct) ++counts[std::string(w)];
    }
    KeywordSet set;
    for (const auto& [w, c] : counts)
        if (c >= config.min_occurrence) set.entries.push_back({w, c});
    std::sort(set.entries.begin(), set.entries.end(), entry_order);
    if (set.empty())
        log::warn(fmt::format("no keyword reaches min_occurrence = {}", config.min_occurrence));
    return set;
}

KeywordSet common_keywords(const KeywordLists& keyword_lists, const CorpusConfig& config) {
    std::map<std::string, std::vector<std::string>> plain;
    for (const auto& [id, scored] : keyword_lists) {
        auto& words = plain[id];
        for (const auto& s : scored) words.push_back(s.word);
    }
    return common_keywords(plain, config);
}

std::string keywords_to_csv(const KeywordSet& keywords) {
    std::string out = "word,occurrences\n";
    for (const auto& e : keywords.entries) out += io::csv_row({e.word, std::to_string(e.occurrences)});
    return out;
}

KeywordSet keywords_from_csv(const std::filesystem::path& path) {
    const auto rows = io::read_csv(path);
    if (rows.empty() || rows[0].size() != 2 || rows[0][0] != "word")
        throw DataError(path.string() + ": expected header word,occurrences");
    KeywordSet set;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].size() != 2) throw DataError(fmt::format("{}: bad row {}", path.string(), i + 1));
        set.entries.push_back({rows[i][0], static_cast<std::size_t>(std::stoull(rows[i][1]))});
    }
    return set;
}

}  // namespace textpsy::corpus
