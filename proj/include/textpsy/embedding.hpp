#pragma once

// Conditional contextual embeddings (CCEs) and document embeddings.
//
// A CCE is the embedding of a word computed inside a prompt that wraps the
// word and a full document in a rephrasing template. Backends answer batches
// of such requests over a small HTTP/JSON protocol; MockBackend answers them
// deterministically in-process.

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

namespace textpsy::embedding {

class RephrasingForm {
public:
    static constexpr int kFormCount = 6;

    // One of the six shipped templates, 1-based.
    static RephrasingForm shipped(int form_id);
    // A user template; must contain `{word}` and `{document}` exactly once each.
    static RephrasingForm custom(std::string template_text);

    int form_id() const { return form_id_; }  // 0 for custom templates
    const std::string& template_text() const { return template_; }
    bool is_custom() const { return form_id_ == 0; }

    bool operator==(const RephrasingForm&) const = default;

private:
    RephrasingForm(int id, std::string text) : form_id_(id), template_(std::move(text)) {}
    int form_id_;
    std::string template_;
};

struct Rephrased {
    std::string text;
    std::size_t word_begin = 0;  // byte span of the substituted word
    std::size_t word_end = 0;
};

std::string rephrase(const RephrasingForm& form, std::string_view word, std::string_view document);

// Same substitution, also reporting where the word landed.
Rephrased rephrase_with_span(const RephrasingForm& form, std::string_view word, std::string_view document);

struct EmbeddingVector {
    std::vector<float> values;

    std::size_t dim() const { return values.size(); }
    bool operator==(const EmbeddingVector&) const = default;
};

enum class PoolingMethod { Mean, Cls };

std::string to_string(PoolingMethod p);
PoolingMethod pooling_from_string(std::string_view s);

struct BackendInfo {
    std::string model_name;
    std::size_t dim = 0;
    std::size_t max_tokens = 0;
};

struct EmbedRequest {
    RephrasingForm form = RephrasingForm::shipped(1);
    std::string word;
    std::string document;
    PoolingMethod doc_pooling = PoolingMethod::Mean;
};

// Either vectors or a per-item error message.
struct EmbedResponse {
    EmbeddingVector cce;
    EmbeddingVector doc;
    std::string error;

    bool ok() const { return error.empty(); }
};

class Backend {
public:
    virtual ~Backend() = default;
    virtual BackendInfo info() = 0;
    // Results are in request order; a failed item carries `error`.
    virtual std::vector<EmbedResponse> embed_batch(std::span<const EmbedRequest> requests) = 0;

    // Single request; throws BackendError on a per-item failure.
    EmbedResponse embed(const EmbedRequest& request);
};

/// Deterministic in-process backend.
///
/// Text is split into word pieces (alphanumeric runs and single punctuation
/// characters, ASCII-lowercased). Each piece gets a base vector drawn from a
/// generator seeded by (seed, request kind, piece); a single uniform-attention
/// layer then adds half the sequence mean to every position. The CCE averages
/// the final vectors over the pieces of the templated word; mean pooling
/// averages over all document pieces and cls pooling reads the leading
/// classification position.
class MockBackend : public Backend {
public:
    MockBackend(std::uint64_t seed, std::size_t dim, std::size_t max_tokens = 512);

    BackendInfo info() override;
    std::vector<EmbedResponse> embed_batch(std::span<const EmbedRequest> requests) override;

    EmbedResponse respond(const EmbedRequest& request);

private:
    const std::vector<float>& base_vector(std::string_view kind, std::string_view piece);

    std::uint64_t seed_;
    std::size_t dim_;
    std::size_t max_tokens_;
    std::mutex memo_mutex_;
    std::unordered_map<std::string, std::unique_ptr<std::vector<float>>> memo_;
};

std::unique_ptr<Backend> mock_backend(std::uint64_t seed, std::size_t dim);

struct HttpOptions {
    int attempts = 3;
    std::chrono::milliseconds initial_backoff{200};
    std::chrono::seconds timeout{120};
    std::size_t batch_size = 64;
};

/// Client for the HTTP wire protocol (GET /v1/info, POST /v1/embed_batch).
class HttpBackend : public Backend {
public:
    explicit HttpBackend(std::string base_url, HttpOptions options = {});

    BackendInfo info() override;
    std::vector<EmbedResponse> embed_batch(std::span<const EmbedRequest> requests) override;

private:
    nlohmann::json get_json(const std::string& path);
    nlohmann::json post_json(const std::string& path, const nlohmann::json& body);

    std::string base_url_;
    HttpOptions options_;
    std::optional<BackendInfo> info_;
};

/// Wraps a backend with an on-disk response cache. One record per request
/// key: `<key>.bin` holds the CCE then the document vector as little-endian
/// float32, `<key>.json` is the sidecar with the key fields and dimensions.
/// Records are written by rename, so concurrent writers of the same key are
/// last-writer-wins.
class CachingBackend : public Backend {
public:
    CachingBackend(std::shared_ptr<Backend> inner, std::filesystem::path dir);

    BackendInfo info() override;
    std::vector<EmbedResponse> embed_batch(std::span<const EmbedRequest> requests) override;

    std::size_t hits() const { return hits_; }
    std::size_t misses() const { return misses_; }

private:
    std::string key_json(const EmbedRequest& r);
    std::optional<EmbedResponse> load(const std::string& key);
    void store(const std::string& key, const EmbedResponse& response);

    std::shared_ptr<Backend> inner_;
    std::filesystem::path dir_;
    std::optional<BackendInfo> info_;
    std::size_t hits_ = 0;
    std::size_t misses_ = 0;
};

// Validates dim and finiteness against `info`; throws BackendError.
void check_vector(const EmbeddingVector& v, const BackendInfo& info, std::string_view what);

EmbeddingVector fetch_cce(Backend& backend, const RephrasingForm& form, std::string_view word,
                          std::string_view document);

EmbeddingVector fetch_doc_embedding(Backend& backend, std::string_view document, PoolingMethod pooling);

// Wire-format helpers shared by the client and by in-process servers.
namespace wire {

nlohmann::json to_json(const BackendInfo& info);
BackendInfo info_from_json(const nlohmann::json& j);
nlohmann::json to_json(const EmbedRequest& request);
EmbedRequest request_from_json(const nlohmann::json& j);
nlohmann::json to_json(const EmbedResponse& response);
EmbedResponse response_from_json(const nlohmann::json& j);

struct HttpReply {
    int status = 200;
    std::string body;
};

// Serves one protocol call against `backend`. Paths: /v1/info (GET),
// /v1/embed and /v1/embed_batch (POST).
HttpReply handle(Backend& backend, std::string_view method, std::string_view path, std::string_view body);

}  // namespace wire

}  // namespace textpsy::embedding
