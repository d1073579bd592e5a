#include "textpsy/embedding.hpp"

#include <fmt/format.h>
#include <httplib.h>

#include <array>
#include <bit>
#include <cmath>
#include <fstream>
#include <thread>

#include "textpsy/error.hpp"
#include "textpsy/util/hash.hpp"
#include "textpsy/util/io.hpp"
#include "textpsy/util/rng.hpp"

namespace textpsy::embedding {

namespace {

constexpr std::array<std::string_view, RephrasingForm::kFormCount> kShippedTemplates = {
    "find the contextual meaning of '{word}' given the following context: {document}",
    "find the meaning of '{word}' given the following context: {document}",
    "find the embedding of '{word}' given the following context: {document}",
    "what is the meaning of '{word}' given the following context: {document}",
    "what is the embedding of '{word}' given the following context: {document}",
    "the word is '{word}' and the context is: {document}",
};

constexpr std::string_view kWordSlot = "{word}";
constexpr std::string_view kDocSlot = "{document}";

std::size_t count_occurrences(std::string_view text, std::string_view needle) {
    std::size_t n = 0;
    for (auto pos = text.find(needle); pos != std::string_view::npos; pos = text.find(needle, pos + needle.size()))
        ++n;
    return n;
}

// The word used when only the document half of a response is wanted; the
// document vector never depends on it.
constexpr std::string_view kDocProbeWord = "text";

}  // namespace

// ---------------------------------------------------------------------------
// Templates

RephrasingForm RephrasingForm::shipped(int form_id) {
    if (form_id < 1 || form_id > kFormCount)
        throw ConfigError(fmt::format("rephrasing form must be 1..{}, got {}", kFormCount, form_id));
    return RephrasingForm(form_id, std::string(kShippedTemplates[static_cast<std::size_t>(form_id - 1)]));
}

RephrasingForm RephrasingForm::custom(std::string template_text) {
    if (count_occurrences(template_text, kWordSlot) != 1 || count_occurrences(template_text, kDocSlot) != 1)
        throw ConfigError("template must contain {word} and {document} exactly once: \"" + template_text + "\"");
    return RephrasingForm(0, std::move(template_text));
}

Rephrased rephrase_with_span(const RephrasingForm& form, std::string_view word, std::string_view document) {
    if (word.empty()) throw DataError("rephrase: empty word");
    if (document.empty()) throw DataError("rephrase: empty document");
    const std::string& t = form.template_text();
    const auto wpos = t.find(kWordSlot);
    const auto dpos = t.find(kDocSlot);
    if (wpos == std::string::npos || dpos == std::string::npos)
        throw ConfigError("template is missing a placeholder: \"" + t + "\"");

    // Both slots are located in the template first so substituted text is
    // never rescanned for placeholders.
    Rephrased out;
    out.text.reserve(t.size() + word.size() + document.size());
    if (wpos < dpos) {
        out.text.append(t, 0, wpos);
        out.word_begin = out.text.size();
        out.text.append(word);
        out.word_end = out.text.size();
        out.text.append(t, wpos + kWordSlot.size(), dpos - wpos - kWordSlot.size());
        out.text.append(document);
        out.text.append(t, dpos + kDocSlot.size());
    } else {
        out.text.append(t, 0, dpos);
        out.text.append(document);
        out.text.append(t, dpos + kDocSlot.size(), wpos - dpos - kDocSlot.size());
        out.word_begin = out.text.size();
        out.text.append(word);
        out.word_end = out.text.size();
        out.text.append(t, wpos + kWordSlot.size());
    }
    return out;
}

std::string rephrase(const RephrasingForm& form, std::string_view word, std::string_view document) {
    return rephrase_with_span(form, word, document).text;
}

std::string to_string(PoolingMethod p) { return p == PoolingMethod::Mean ? "mean" : "cls"; }

PoolingMethod pooling_from_string(std::string_view s) {
    if (s == "mean") return PoolingMethod::Mean;
    if (s == "cls") return PoolingMethod::Cls;
    throw ConfigError(fmt::format("pooling must be mean or cls, got \"{}\"", s));
}

EmbedResponse Backend::embed(const EmbedRequest& request) {
    auto results = embed_batch(std::span<const EmbedRequest>(&request, 1));
    if (results.size() != 1) throw BackendError("backend returned a malformed batch");
    if (!results[0].ok()) throw BackendError(results[0].error);
    return std::move(results[0]);
}

void check_vector(const EmbeddingVector& v, const BackendInfo& info, std::string_view what) {
    if (v.dim() != info.dim)
        throw BackendError(fmt::format("{}: backend returned dim {}, advertised {}", what, v.dim(), info.dim));
    for (float x : v.values)
        if (!std::isfinite(x)) throw BackendError(fmt::format("{}: backend returned a non-finite value", what));
}

EmbeddingVector fetch_cce(Backend& backend, const RephrasingForm& form, std::string_view word,
                          std::string_view document) {
    EmbedRequest req{form, std::string(word), std::string(document), PoolingMethod::Mean};
    auto resp = backend.embed(req);
    check_vector(resp.cce, backend.info(), "cce");
    return std::move(resp.cce);
}

EmbeddingVector fetch_doc_embedding(Backend& backend, std::string_view document, PoolingMethod pooling) {
    EmbedRequest req{RephrasingForm::shipped(1), std::string(kDocProbeWord), std::string(document), pooling};
    auto resp = backend.embed(req);
    check_vector(resp.doc, backend.info(), "document embedding");
    return std::move(resp.doc);
}

// ---------------------------------------------------------------------------
// Mock backend

namespace {

struct Piece {
    std::string text;
    std::size_t begin;
    std::size_t end;
};

// Alphanumeric runs (non-ASCII bytes count as word characters) and single
// ASCII punctuation characters; whitespace separates.
std::vector<Piece> word_pieces(std::string_view text) {
    std::vector<Piece> out;
    std::size_t i = 0;
    auto is_word = [](unsigned char c) { return c >= 0x80 || std::isalnum(c) != 0; };
    while (i < text.size()) {
        const auto c = static_cast<unsigned char>(text[i]);
        if (std::isspace(c)) {
            ++i;
        } else if (is_word(c)) {
            const std::size_t start = i;
            while (i < text.size() && is_word(static_cast<unsigned char>(text[i]))) ++i;
            std::string piece(text.substr(start, i - start));
            for (char& ch : piece)
                if (ch >= 'A' && ch <= 'Z') ch = static_cast<char>(ch - 'A' + 'a');
            out.push_back({std::move(piece), start, i});
        } else {
            out.push_back({std::string(1, static_cast<char>(c)), i, i + 1});
            ++i;
        }
    }
    return out;
}

constexpr float kMix = 0.5f;

}  // namespace

MockBackend::MockBackend(std::uint64_t seed, std::size_t dim, std::size_t max_tokens)
    : seed_(seed), dim_(dim), max_tokens_(max_tokens) {
    if (dim_ < 1) throw ConfigError("mock backend: dim must be >= 1");
    if (max_tokens_ < 1) throw ConfigError("mock backend: max_tokens must be >= 1");
}

BackendInfo MockBackend::info() { return {fmt::format("mock-{}", dim_), dim_, max_tokens_}; }

const std::vector<float>& MockBackend::base_vector(std::string_view kind, std::string_view piece) {
    std::string key;
    key.reserve(kind.size() + piece.size() + 1);
    key.append(kind).push_back('\x1f');
    key.append(piece);
    std::lock_guard lock(memo_mutex_);
    auto it = memo_.find(key);
    if (it != memo_.end()) return *it->second;
    Rng rng(hash64(fmt::format("{}\x1f{}", seed_, key)));
    auto v = std::make_unique<std::vector<float>>(dim_);
    const double scale = 1.0 / std::sqrt(static_cast<double>(dim_));
    for (auto& x : *v) x = static_cast<float>(rng.normal() * scale);
    return *memo_.emplace(std::move(key), std::move(v)).first->second;
}

EmbedResponse MockBackend::respond(const EmbedRequest& request) {
    EmbedResponse resp;
    Rephrased prompt;
    try {
        prompt = rephrase_with_span(request.form, request.word, request.document);
    } catch (const Error& e) {
        resp.error = e.what();
        return resp;
    }
    const auto prompt_pieces = word_pieces(prompt.text);
    const auto doc_pieces = word_pieces(request.document);
    // +2 for the classification and separator positions.
    if (prompt_pieces.size() + 2 > max_tokens_) {
        resp.error = fmt::format("over-length input: {} tokens exceeds max_tokens {}", prompt_pieces.size() + 2,
                                 max_tokens_);
        return resp;
    }

    auto sequence_mean = [&](const std::vector<Piece>& pieces) {
        std::vector<double> acc(dim_, 0.0);
        for (const auto& p : pieces) {
            const auto& v = base_vector("tok", p.text);
            for (std::size_t t = 0; t < dim_; ++t) acc[t] += v[t];
        }
        if (!pieces.empty())
            for (auto& x : acc) x /= static_cast<double>(pieces.size());
        return acc;
    };

    // CCE: mean over the pieces overlapping the templated word's byte span.
    const auto prompt_ctx = sequence_mean(prompt_pieces);
    std::vector<double> word_acc(dim_, 0.0);
    std::size_t span = 0;
    for (const auto& p : prompt_pieces) {
        if (p.end <= prompt.word_begin || p.begin >= prompt.word_end) continue;
        const auto& v = base_vector("tok", p.text);
        for (std::size_t t = 0; t < dim_; ++t) word_acc[t] += v[t];
        ++span;
    }
    if (span == 0) {
        resp.error = "word has no embeddable characters";
        return resp;
    }
    resp.cce.values.resize(dim_);
    for (std::size_t t = 0; t < dim_; ++t)
        resp.cce.values[t] = static_cast<float>(word_acc[t] / static_cast<double>(span) + kMix * prompt_ctx[t]);

    const auto doc_ctx = sequence_mean(doc_pieces);
    resp.doc.values.resize(dim_);
    if (request.doc_pooling == PoolingMethod::Mean) {
        for (std::size_t t = 0; t < dim_; ++t) resp.doc.values[t] = static_cast<float>((1.0 + kMix) * doc_ctx[t]);
    } else {
        const auto& cls = base_vector("cls", "[CLS]");
        for (std::size_t t = 0; t < dim_; ++t) resp.doc.values[t] = static_cast<float>(cls[t] + kMix * doc_ctx[t]);
    }
    return resp;
}

std::vector<EmbedResponse> MockBackend::embed_batch(std::span<const EmbedRequest> requests) {
    std::vector<EmbedResponse> out;
    out.reserve(requests.size());
    for (const auto& r : requests) out.push_back(respond(r));
    return out;
}

std::unique_ptr<Backend> mock_backend(std::uint64_t seed, std::size_t dim) {
    return std::make_unique<MockBackend>(seed, dim);
}

// ---------------------------------------------------------------------------
// Wire format

namespace wire {

nlohmann::json to_json(const BackendInfo& info) {
    return {{"model", info.model_name}, {"dim", info.dim}, {"max_tokens", info.max_tokens}};
}

BackendInfo info_from_json(const nlohmann::json& j) {
    try {
        BackendInfo info{j.at("model").get<std::string>(), j.at("dim").get<std::size_t>(),
                         j.at("max_tokens").get<std::size_t>()};
        if (info.dim < 1 || info.max_tokens < 1) throw BackendError("backend info: dim and max_tokens must be >= 1");
        return info;
    } catch (const nlohmann::json::exception& e) {
        throw BackendError(std::string("malformed /v1/info reply: ") + e.what());
    }
}

nlohmann::json to_json(const EmbedRequest& r) {
    nlohmann::json j;
    if (r.form.is_custom())
        j["template"] = r.form.template_text();
    else
        j["form_id"] = r.form.form_id();
    j["word"] = r.word;
    j["document"] = r.document;
    j["doc_pooling"] = to_string(r.doc_pooling);
    return j;
}

EmbedRequest request_from_json(const nlohmann::json& j) {
    EmbedRequest r;
    if (j.contains("template"))
        r.form = RephrasingForm::custom(j.at("template").get<std::string>());
    else
        r.form = RephrasingForm::shipped(j.at("form_id").get<int>());
    r.word = j.at("word").get<std::string>();
    r.document = j.at("document").get<std::string>();
    r.doc_pooling = pooling_from_string(j.value("doc_pooling", std::string("mean")));
    return r;
}

namespace {

nlohmann::json vector_json(const EmbeddingVector& v) {
    auto arr = nlohmann::json::array();
    for (float x : v.values) arr.push_back(static_cast<double>(x));
    return arr;
}

EmbeddingVector vector_from_json(const nlohmann::json& j) {
    EmbeddingVector v;
    v.values.reserve(j.size());
    for (const auto& x : j) v.values.push_back(static_cast<float>(x.get<double>()));
    return v;
}

}  // namespace

nlohmann::json to_json(const EmbedResponse& r) {
    if (!r.ok()) return {{"error", r.error}};
    return {{"cce", vector_json(r.cce)}, {"doc", vector_json(r.doc)}, {"dim", r.cce.dim()}};
}

EmbedResponse response_from_json(const nlohmann::json& j) {
    EmbedResponse r;
    if (j.contains("error")) {
        r.error = j.at("error").get<std::string>();
        return r;
    }
    r.cce = vector_from_json(j.at("cce"));
    r.doc = vector_from_json(j.at("doc"));
    const auto dim = j.at("dim").get<std::size_t>();
    if (r.cce.dim() != dim || r.doc.dim() != dim)
        throw BackendError(fmt::format("response vectors disagree with declared dim {}", dim));
    return r;
}

HttpReply handle(Backend& backend, std::string_view method, std::string_view path, std::string_view body) {
    auto error_reply = [](int status, const std::string& msg) {
        return HttpReply{status, nlohmann::json{{"error", msg}}.dump()};
    };
    try {
        if (path == "/v1/info") {
            if (method != "GET") return error_reply(405, "use GET");
            return {200, to_json(backend.info()).dump()};
        }
        if (path == "/v1/embed" || path == "/v1/embed_batch") {
            if (method != "POST") return error_reply(405, "use POST");
            const auto j = nlohmann::json::parse(body);
            if (path == "/v1/embed") {
                const auto req = request_from_json(j);
                const auto resp = backend.embed_batch(std::span<const EmbedRequest>(&req, 1));
                return {200, to_json(resp.at(0)).dump()};
            }
            std::vector<EmbedRequest> reqs;
            std::vector<std::string> parse_errors;
            for (const auto& item : j.at("items")) {
                try {
                    reqs.push_back(request_from_json(item));
                    parse_errors.emplace_back();
                } catch (const std::exception& e) {
                    parse_errors.emplace_back(e.what());
                }
            }
            std::vector<EmbedRequest> valid;
            for (std::size_t i = 0, k = 0; i < parse_errors.size(); ++i)
                if (parse_errors[i].empty()) valid.push_back(reqs[k++]);
            const auto results = backend.embed_batch(valid);
            auto arr = nlohmann::json::array();
            for (std::size_t i = 0, k = 0; i < parse_errors.size(); ++i) {
                if (parse_errors[i].empty())
                    arr.push_back(to_json(results.at(k++)));
                else
                    arr.push_back({{"error", parse_errors[i]}});
            }
            return {200, nlohmann::json{{"results", arr}}.dump()};
        }
        return error_reply(404, "unknown path");
    } catch (const std::exception& e) {
        return error_reply(400, e.what());
    }
}

}  // namespace wire

// ---------------------------------------------------------------------------
// HTTP client

HttpBackend::HttpBackend(std::string base_url, HttpOptions options)
    : base_url_(std::move(base_url)), options_(options) {
    while (!base_url_.empty() && base_url_.back() == '/') base_url_.pop_back();
    if (options_.attempts < 1) options_.attempts = 1;
    if (options_.batch_size < 1) options_.batch_size = 1;
}

namespace {

template <typename Call>
nlohmann::json with_retry(const std::string& what, const HttpOptions& opt, Call&& call) {
    auto backoff = opt.initial_backoff;
    std::string last_error;
    for (int attempt = 1; attempt <= opt.attempts; ++attempt) {
        httplib::Result res = call();
        if (res && res->status == 200) {
            try {
                return nlohmann::json::parse(res->body);
            } catch (const nlohmann::json::parse_error& e) {
                throw BackendError(what + ": malformed JSON reply: " + e.what());
            }
        }
        if (res) {
            last_error = fmt::format("HTTP {}: {}", res->status, res->body);
            // Client errors are not transient.
            if (res->status >= 400 && res->status < 500) break;
        } else {
            last_error = httplib::to_string(res.error());
        }
        if (attempt < opt.attempts) {
            std::this_thread::sleep_for(backoff);
            backoff *= 2;
        }
    }
    throw BackendError(what + " failed: " + last_error);
}

}  // namespace

nlohmann::json HttpBackend::get_json(const std::string& path) {
    httplib::Client client(base_url_);
    client.set_connection_timeout(options_.timeout);
    client.set_read_timeout(options_.timeout);
    return with_retry("GET " + path, options_, [&] { return client.Get(path); });
}

nlohmann::json HttpBackend::post_json(const std::string& path, const nlohmann::json& body) {
    httplib::Client client(base_url_);
    client.set_connection_timeout(options_.timeout);
    client.set_read_timeout(options_.timeout);
    const std::string payload = body.dump();
    return with_retry("POST " + path, options_, [&] { return client.Post(path, payload, "application/json"); });
}

BackendInfo HttpBackend::info() {
    if (!info_) info_ = wire::info_from_json(get_json("/v1/info"));
    return *info_;
}

std::vector<EmbedResponse> HttpBackend::embed_batch(std::span<const EmbedRequest> requests) {
    std::vector<EmbedResponse> out;
    out.reserve(requests.size());
    for (std::size_t start = 0; start < requests.size(); start += options_.batch_size) {
        const auto chunk = requests.subspan(start, std::min(options_.batch_size, requests.size() - start));
        nlohmann::json body;
        body["items"] = nlohmann::json::array();
        for (const auto& r : chunk) body["items"].push_back(wire::to_json(r));
        const auto reply = post_json("/v1/embed_batch", body);
        try {
            const auto& results = reply.at("results");
            if (results.size() != chunk.size())
                throw BackendError(
                    fmt::format("embed_batch returned {} results for {} items", results.size(), chunk.size()));
            for (const auto& r : results) out.push_back(wire::response_from_json(r));
        } catch (const nlohmann::json::exception& e) {
            throw BackendError(std::string("malformed embed_batch reply: ") + e.what());
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Cache

namespace {

void append_le_floats(std::string& buf, const std::vector<float>& values) {
    for (float x : values) {
        auto bits = std::bit_cast<std::uint32_t>(x);
        for (int b = 0; b < 4; ++b) buf.push_back(static_cast<char>((bits >> (8 * b)) & 0xFF));
    }
}

std::vector<float> read_le_floats(std::string_view buf, std::size_t offset, std::size_t n) {
    std::vector<float> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::uint32_t bits = 0;
        for (int b = 0; b < 4; ++b)
            bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[offset + 4 * i + b])) << (8 * b);
        out[i] = std::bit_cast<float>(bits);
    }
    return out;
}

}  // namespace

CachingBackend::CachingBackend(std::shared_ptr<Backend> inner, std::filesystem::path dir)
    : inner_(std::move(inner)), dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
}

BackendInfo CachingBackend::info() {
    if (!info_) info_ = inner_->info();
    return *info_;
}

std::string CachingBackend::key_json(const EmbedRequest& r) {
    nlohmann::json key = {
        {"model", info().model_name},
        {"form", r.form.is_custom() ? nlohmann::json(r.form.template_text()) : nlohmann::json(r.form.form_id())},
        {"word", r.word},
        {"document_sha256", sha256_hex(r.document)},
        {"pooling", to_string(r.doc_pooling)},
    };
    return key.dump();
}

std::optional<EmbedResponse> CachingBackend::load(const std::string& key) {
    const std::string name = sha256_hex(key);
    const auto sidecar = dir_ / (name + ".json");
    const auto payload = dir_ / (name + ".bin");
    if (!std::filesystem::exists(sidecar) || !std::filesystem::exists(payload)) return std::nullopt;
    try {
        const auto meta = nlohmann::json::parse(io::read_file(sidecar));
        if (meta.at("key").get<std::string>() != key) return std::nullopt;
        const auto dim = meta.at("dim").get<std::size_t>();
        const std::string bytes = io::read_file(payload);
        if (bytes.size() != 8 * dim) return std::nullopt;
        EmbedResponse r;
        r.cce.values = read_le_floats(bytes, 0, dim);
        r.doc.values = read_le_floats(bytes, 4 * dim, dim);
        return r;
    } catch (const std::exception&) {
        return std::nullopt;  // a torn or foreign record is treated as a miss
    }
}

void CachingBackend::store(const std::string& key, const EmbedResponse& response) {
    const std::string name = sha256_hex(key);
    std::string bytes;
    bytes.reserve(8 * response.cce.dim());
    append_le_floats(bytes, response.cce.values);
    append_le_floats(bytes, response.doc.values);
    io::write_file_atomic(dir_ / (name + ".bin"), bytes);
    const nlohmann::json meta = {{"key", key}, {"dim", response.cce.dim()}, {"layout", "cce,doc float32 LE"}};
    io::write_file_atomic(dir_ / (name + ".json"), meta.dump(2));
}

std::vector<EmbedResponse> CachingBackend::embed_batch(std::span<const EmbedRequest> requests) {
    std::vector<EmbedResponse> out(requests.size());
    std::vector<std::string> keys(requests.size());
    std::vector<EmbedRequest> missing;
    std::vector<std::size_t> missing_index;
    for (std::size_t i = 0; i < requests.size(); ++i) {
        keys[i] = key_json(requests[i]);
        if (auto hit = load(keys[i])) {
            out[i] = std::move(*hit);
            ++hits_;
        } else {
            missing.push_back(requests[i]);
            missing_index.push_back(i);
        }
    }
    if (!missing.empty()) {
        auto fetched = inner_->embed_batch(missing);
        if (fetched.size() != missing.size()) throw BackendError("backend returned a malformed batch");
        for (std::size_t k = 0; k < missing.size(); ++k) {
            const std::size_t i = missing_index[k];
            if (fetched[k].ok() && fetched[k].cce.dim() == fetched[k].doc.dim()) store(keys[i], fetched[k]);
            out[i] = std::move(fetched[k]);
            ++misses_;
        }
    }
    return out;
}

}  // namespace textpsy::embedding
