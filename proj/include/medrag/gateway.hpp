#pragma once

#include <chrono>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "medrag/errors.hpp"
#include "medrag/util.hpp"

namespace medrag {

using EmbeddingVector = std::vector<double>;

enum class EndpointKind { text_embed, image_embed, rerank, generate };
std::string_view endpoint_kind_name(EndpointKind k);
std::optional<EndpointKind> endpoint_kind_from_name(std::string_view name);

struct ModelEndpoint {
    EndpointKind kind = EndpointKind::text_embed;
    std::string model_id;
    std::string base_url;  // http(s)://host[:port][/path] or mock://<name>[?k=v&...]
    std::size_t max_batch = 16;
    std::chrono::milliseconds timeout{60000};
    std::size_t max_retries = 2;
    std::size_t max_in_flight = 4;
    std::chrono::milliseconds backoff{100};
};

struct GenerationRequest {
    std::string prompt_text;
    std::vector<std::string> image_refs;  // paths, attached as base64
    double temperature = 0.0;
};

// ---------------------------------------------------------------------------
// Response cache

/// Content-addressed response store, keyed by a hash of
/// (endpoint kind, model_id, canonical payload). Values are deterministic,
/// so concurrent writers colliding on a key are benign.
class ResponseCache {
public:
    static std::shared_ptr<ResponseCache> disabled();
    static std::shared_ptr<ResponseCache> in_memory();
    static std::shared_ptr<ResponseCache> on_disk(const std::filesystem::path& dir);

    bool enabled() const { return enabled_; }
    std::optional<json> get(const std::string& key) const;
    void put(const std::string& key, const json& value);

private:
    bool enabled_ = false;
    bool persistent_ = false;
    std::filesystem::path dir_;
    mutable std::mutex mutex_;
    mutable std::unordered_map<std::string, std::string> memory_;
};

std::string cache_key(EndpointKind kind, const std::string& model_id, const json& payload);

// ---------------------------------------------------------------------------
// Transports

/// Retryable transport failure (connection refused, timeout, 5xx).
class TransportError : public Error {
public:
    using Error::Error;
};

class Transport {
public:
    virtual ~Transport() = default;
    virtual json post(const json& body) = 0;
};

/// Builds the transport an endpoint's base_url names: http(s):// wires an
/// HTTP client; mock://hash-embed, mock://token-overlap and mock://scripted
/// build the deterministic in-process models.
std::shared_ptr<Transport> make_transport(const ModelEndpoint& endpoint);

/// Deterministic embedder. If the content parses as a JSON array of finite
/// numbers it is used verbatim; otherwise dims values are drawn from a
/// splitmix64 stream seeded with fnv1a64(content) and mapped to [-1, 1).
/// Either way the vector is L2-normalized.
EmbeddingVector mock_hash_embedding(std::string_view content, std::size_t dims);

/// Deterministic reranker: |word_tokens(query) ∩ word_tokens(candidate)|
/// counted over unique tokens.
double mock_token_overlap(std::string_view query, std::string_view candidate);

/// Generate-endpoint mock that only answers prompts it was scripted for.
/// Exact prompt matches win over substring rules; anything else raises a
/// gateway error so tests cannot silently consume fabricated text.
class ScriptedTransport : public Transport {
public:
    ScriptedTransport() = default;
    static std::shared_ptr<ScriptedTransport> from_file(const std::filesystem::path& path);

    void script_exact(std::string prompt, std::string response);
    void script_contains(std::string needle, std::string response);

    json post(const json& body) override;

private:
    std::mutex mutex_;
    std::unordered_map<std::string, std::string> exact_;  // keyed by sha256(prompt)
    std::vector<std::pair<std::string, std::string>> contains_;
};

// ---------------------------------------------------------------------------
// Client

/// Wire-level client for one endpoint: batching, bounded retries with
/// exponential backoff, bounded in-flight requests, and transparent
/// response caching.
class ModelClient {
public:
    ModelClient(ModelEndpoint endpoint, std::shared_ptr<ResponseCache> cache,
                std::shared_ptr<Transport> transport = nullptr);

    const ModelEndpoint& endpoint() const { return endpoint_; }

    /// One vector per input text, order preserved. Cached per (model, text).
    std::vector<EmbeddingVector> embed_texts(const std::vector<std::string>& texts);

    EmbeddingVector embed_image(const std::string& image_ref);
    EmbeddingVector embed_image_bytes(std::string_view bytes);

    /// One finite score per candidate, order preserved.
    std::vector<double> rerank(const std::string& query,
                               const std::vector<std::string>& candidates);

    /// Returns the model text verbatim. Cached only at temperature 0.
    std::string generate(const GenerationRequest& request);

    std::size_t wire_calls() const;
    std::size_t attempts() const;
    std::size_t invocations() const;

private:
    json cached_post(const json& payload, bool use_cache);
    json wire_post(const json& payload);
    void require_kind(EndpointKind kind, const char* op) const;

    ModelEndpoint endpoint_;
    std::shared_ptr<ResponseCache> cache_;
    std::shared_ptr<Transport> transport_;
    std::unique_ptr<std::counting_semaphore<256>> in_flight_;
    mutable std::mutex mutex_;
    std::size_t wire_calls_ = 0;
    std::size_t attempts_ = 0;
    std::size_t invocations_ = 0;
    std::optional<std::size_t> dims_;  // embedding dims, pinned on first result
};

}  // namespace medrag
