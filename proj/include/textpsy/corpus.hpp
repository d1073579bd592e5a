#pragma once

// Corpus ingestion, preprocessing, and common-keyword selection.
//
// Documents become token lists (whitespace split, punctuation trimmed,
// lowercased), stop words are dropped and the remainder lemmatized through a
// lookup table. Each document's top-n TF-IDF words are then pooled, and words
// that rank among the top-n of enough documents form the item pool.

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace textpsy::corpus {

struct RawDocument {
    std::string id;
    std::string text;
};

struct TokenizedDocument {
    std::string id;
    std::vector<std::string> tokens;  // lowercase, punctuation trimmed
    std::vector<std::string> lemmas;  // stop words removed
    std::size_t token_count = 0;      // before stop-word removal
};

struct KeywordEntry {
    std::string word;
    std::size_t occurrences = 0;

    bool operator==(const KeywordEntry&) const = default;
};

/// Sorted by descending occurrences, then ascending word.
struct KeywordSet {
    std::vector<KeywordEntry> entries;

    std::size_t size() const { return entries.size(); }
    bool empty() const { return entries.empty(); }
    std::vector<std::string> words() const;
    // Occurrence count for a word; 0 when absent.
    std::size_t occurrences(std::string_view word) const;
};

struct CorpusConfig {
    std::size_t min_tokens = 50;
    std::size_t max_tokens = 500;
    std::size_t max_docs = 20000;
    std::size_t top_n = 10;
    std::size_t min_occurrence = 10;
    std::string stopword_list_id = "stopwords_en.txt";
    std::string lemma_table_id = "lemmas_en.tsv";

    // Throws ConfigError when an invariant is violated.
    void validate() const;
};

class StopWords {
public:
    StopWords() = default;
    explicit StopWords(std::unordered_set<std::string> words) : words_(std::move(words)) {}

    // One word per line; blank lines and lines starting with '#' are skipped.
    static StopWords load(const std::filesystem::path& path);

    bool contains(std::string_view w) const { return words_.contains(std::string(w)); }
    std::size_t size() const { return words_.size(); }

private:
    std::unordered_set<std::string> words_;
};

class LemmaTable {
public:
    LemmaTable() = default;
    explicit LemmaTable(std::unordered_map<std::string, std::string> table) : table_(std::move(table)) {}

    // Two tab-separated columns: surface form, lemma.
    static LemmaTable load(const std::filesystem::path& path);

    // Identity for words not in the table.
    const std::string& lemmatize(const std::string& word) const;

    const std::unordered_map<std::string, std::string>& entries() const { return table_; }

private:
    std::unordered_map<std::string, std::string> table_;
};

// Reads newline-delimited JSON records {"id": ..., "text": ...}. A directory
// source reads every *.jsonl file inside it in lexicographic filename order.
std::vector<RawDocument> ingest(const std::filesystem::path& source);

std::vector<RawDocument> ingest_stream(std::istream& in, const std::string& source_name);

// Splits on Unicode whitespace, trims leading/trailing punctuation, folds
// ASCII letters to lowercase. Tokens that are pure punctuation vanish.
std::vector<std::string> tokenize(std::string_view text);

TokenizedDocument preprocess(const RawDocument& doc, const StopWords& stop, const LemmaTable& lemmas);

std::vector<TokenizedDocument> preprocess_all(const std::vector<RawDocument>& docs, const StopWords& stop,
                                              const LemmaTable& lemmas, std::size_t workers = 1);

std::vector<TokenizedDocument> filter_documents(const std::vector<TokenizedDocument>& docs,
                                                const CorpusConfig& config);

struct ScoredWord {
    std::string word;
    double score = 0.0;
};

using KeywordLists = std::map<std::string, std::vector<ScoredWord>>;

// score(w, d) = count(w in d) * ln(N / df(w)); top_n per document.
KeywordLists tfidf_keywords(const std::vector<TokenizedDocument>& docs, const CorpusConfig& config,
                            std::size_t workers = 1);

KeywordSet common_keywords(const std::map<std::string, std::vector<std::string>>& keyword_lists,
                           const CorpusConfig& config);

KeywordSet common_keywords(const KeywordLists& keyword_lists, const CorpusConfig& config);

// CSV `word,occurrences`.
std::string keywords_to_csv(const KeywordSet& keywords);
KeywordSet keywords_from_csv(const std::filesystem::path& path);

}  // namespace textpsy::corpus
