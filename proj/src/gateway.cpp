#include "medrag/gateway.hpp"

#include <algorithm>
#include <cmath>
#include <thread>
#include <unordered_set>

#include <httplib.h>

#include "medrag/errors.hpp"

namespace medrag {

std::string_view endpoint_kind_name(EndpointKind k) {
    switch (k) {
        case EndpointKind::text_embed: return "text_embed";
        case EndpointKind::image_embed: return "image_embed";
        case EndpointKind::rerank: return "rerank";
        case EndpointKind::generate: return "generate";
    }
    return "unknown";
}

std::optional<EndpointKind> endpoint_kind_from_name(std::string_view name) {
    for (EndpointKind k : {EndpointKind::text_embed, EndpointKind::image_embed,
                           EndpointKind::rerank, EndpointKind::generate}) {
        if (endpoint_kind_name(k) == name) return k;
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Cache

std::shared_ptr<ResponseCache> ResponseCache::disabled() {
    return std::make_shared<ResponseCache>();
}

std::shared_ptr<ResponseCache> ResponseCache::in_memory() {
    auto cache = std::make_shared<ResponseCache>();
    cache->enabled_ = true;
    return cache;
}

std::shared_ptr<ResponseCache> ResponseCache::on_disk(const std::filesystem::path& dir) {
    auto cache = std::make_shared<ResponseCache>();
    cache->enabled_ = true;
    cache->persistent_ = true;
    cache->dir_ = dir;
    std::filesystem::create_directories(dir);
    return cache;
}

std::optional<json> ResponseCache::get(const std::string& key) const {
    if (!enabled_) return std::nullopt;
    {
        std::lock_guard lock(mutex_);
        auto it = memory_.find(key);
        if (it != memory_.end()) return json::parse(it->second);
    }
    if (persistent_) {
        const auto path = dir_ / (key + ".json");
        std::error_code ec;
        if (std::filesystem::exists(path, ec)) {
            auto text = read_file(path);
            std::lock_guard lock(mutex_);
            memory_[key] = text;
            return json::parse(text);
        }
    }
    return std::nullopt;
}

void ResponseCache::put(const std::string& key, const json& value) {
    if (!enabled_) return;
    const std::string text = value.dump();
    {
        std::lock_guard lock(mutex_);
        memory_[key] = text;
    }
    if (persistent_) {
        // Last writer wins; values for a key are identical by construction.
        const auto tmp = dir_ / (key + ".tmp");
        const auto final_path = dir_ / (key + ".json");
        write_file(tmp, text);
        std::error_code ec;
        std::filesystem::rename(tmp, final_path, ec);
    }
}

std::string cache_key(EndpointKind kind, const std::string& model_id, const json& payload) {
    std::string material(endpoint_kind_name(kind));
    material += '\n';
    material += model_id;
    material += '\n';
    material += payload.dump();
    return sha256_hex(material);
}

// ---------------------------------------------------------------------------
// Mock models

EmbeddingVector mock_hash_embedding(std::string_view content, std::size_t dims) {
    EmbeddingVector v;

    const std::string trimmed = trim(content);
    if (!trimmed.empty() && trimmed.front() == '[') {
        const auto parsed = nlohmann::json::parse(trimmed, nullptr, false);
        if (parsed.is_array() && !parsed.empty()) {
            bool numeric = true;
            for (const auto& x : parsed) {
                if (!x.is_number() || !std::isfinite(x.get<double>())) {
                    numeric = false;
                    break;
                }
            }
            if (numeric) {
                for (const auto& x : parsed) v.push_back(x.get<double>());
            }
        }
    }

    if (v.empty()) {
        std::uint64_t state = fnv1a64(content);
        v.reserve(dims);
        for (std::size_t i = 0; i < dims; ++i) {
            v.push_back(2.0 * unit_interval(splitmix64(state)) - 1.0);
        }
    }

    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm == 0.0) {
        v.assign(v.size(), 0.0);
        v[0] = 1.0;
    } else {
        for (double& x : v) x /= norm;
    }
    return v;
}

double mock_token_overlap(std::string_view query, std::string_view candidate) {
    const auto q = word_tokens(query);
    const auto c = word_tokens(candidate);
    std::unordered_set<std::string> qset(q.begin(), q.end());
    std::unordered_set<std::string> seen;
    double overlap = 0.0;
    for (const auto& tok : c) {
        if (qset.contains(tok) && seen.insert(tok).second) overlap += 1.0;
    }
    return overlap;
}

namespace {

class HashEmbedTransport : public Transport {
public:
    explicit HashEmbedTransport(std::size_t dims) : dims_(dims) {}

    json post(const json& body) override {
        if (body.contains("texts")) {
            json vectors = json::array();
            for (const auto& text : body.at("texts")) {
                vectors.push_back(mock_hash_embedding(text.get<std::string>(), dims_));
            }
            return json{{"vectors", vectors}};
        }
        if (body.contains("image_b64")) {
            const std::string bytes = base64_decode(body.at("image_b64").get<std::string>());
            return json{{"vector", mock_hash_embedding(bytes, dims_)}};
        }
        throw ProtocolError("hash-embed mock: unsupported payload");
    }

private:
    std::size_t dims_;
};

class TokenOverlapTransport : public Transport {
public:
    json post(const json& body) override {
        const std::string query = body.at("query").get<std::string>();
        json scores = json::array();
        for (const auto& cand : body.at("candidates")) {
            scores.push_back(mock_token_overlap(query, cand.get<std::string>()));
        }
        return json{{"scores", scores}};
    }
};

class HttpTransport : public Transport {
public:
    HttpTransport(const std::string& base_url, std::chrono::milliseconds timeout) {
        // split scheme://host[:port] from the optional path
        const auto scheme_end = base_url.find("://");
        if (scheme_end == std::string::npos) {
            throw ConfigError("endpoint url without scheme: " + base_url);
        }
        const auto path_start = base_url.find('/', scheme_end + 3);
        std::string origin = path_start == std::string::npos
                                 ? base_url
                                 : base_url.substr(0, path_start);
        path_ = path_start == std::string::npos ? "/" : base_url.substr(path_start);
        client_ = std::make_unique<httplib::Client>(origin);
        const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout);
        client_->set_connection_timeout(secs.count(), 0);
        client_->set_read_timeout(secs.count(), 0);
        client_->set_write_timeout(secs.count(), 0);
    }

    json post(const json& body) override {
        auto res = client_->Post(path_, body.dump(), "application/json");
        if (!res) {
            throw TransportError("transport failure: " + httplib::to_string(res.error()));
        }
        if (res->status >= 500) {
            throw TransportError("server error: HTTP " + std::to_string(res->status));
        }
        if (res->status != 200) {
            throw ProtocolError("unexpected HTTP status " + std::to_string(res->status) +
                                ": " + res->body);
        }
        const auto parsed = json::parse(res->body, nullptr, false);
        if (parsed.is_discarded()) throw ProtocolError("response is not valid JSON");
        return parsed;
    }

private:
    std::unique_ptr<httplib::Client> client_;
    std::string path_;
};

std::unordered_map<std::string, std::string> parse_url_params(const std::string& url) {
    std::unordered_map<std::string, std::string> params;
    const auto q = url.find('?');
    if (q == std::string::npos) return params;
    std::string rest = url.substr(q + 1);
    std::size_t pos = 0;
    while (pos < rest.size()) {
        auto amp = rest.find('&', pos);
        if (amp == std::string::npos) amp = rest.size();
        const std::string pair = rest.substr(pos, amp - pos);
        const auto eq = pair.find('=');
        if (eq != std::string::npos) {
            params[pair.substr(0, eq)] = pair.substr(eq + 1);
        }
        pos = amp + 1;
    }
    return params;
}

}  // namespace

std::shared_ptr<ScriptedTransport> ScriptedTransport::from_file(
    const std::filesystem::path& path) {
    auto transport = std::make_shared<ScriptedTransport>();
    for (const auto& row : read_jsonl(path)) {
        const std::string text = row.at("text").get<std::string>();
        if (row.contains("prompt")) {
            transport->script_exact(row.at("prompt").get<std::string>(), text);
        } else if (row.contains("prompt_sha256")) {
            std::lock_guard lock(transport->mutex_);
            transport->exact_[row.at("prompt_sha256").get<std::string>()] = text;
        } else if (row.contains("contains")) {
            transport->script_contains(row.at("contains").get<std::string>(), text);
        } else {
            throw InputError("script row needs prompt, prompt_sha256, or contains");
        }
    }
    return transport;
}

void ScriptedTransport::script_exact(std::string prompt, std::string response) {
    std::lock_guard lock(mutex_);
    exact_[sha256_hex(prompt)] = std::move(response);
}

void ScriptedTransport::script_contains(std::string needle, std::string response) {
    std::lock_guard lock(mutex_);
    contains_.emplace_back(std::move(needle), std::move(response));
}

json ScriptedTransport::post(const json& body) {
    const std::string prompt = body.at("prompt").get<std::string>();
    std::lock_guard lock(mutex_);
    auto it = exact_.find(sha256_hex(prompt));
    if (it != exact_.end()) return json{{"text", it->second}};
    for (const auto& [needle, response] : contains_) {
        if (prompt.find(needle) != std::string::npos) return json{{"text", response}};
    }
    throw GatewayError("scripted generator: unscripted prompt", 1);
}

std::shared_ptr<Transport> make_transport(const ModelEndpoint& endpoint) {
    const std::string& url = endpoint.base_url;
    if (url.rfind("mock://", 0) == 0) {
        const auto name_end = url.find('?', 7);
        const std::string name = url.substr(7, name_end == std::string::npos
                                                   ? std::string::npos
                                                   : name_end - 7);
        const auto params = parse_url_params(url);
        if (name == "hash-embed") {
            std::size_t dims = 64;
            if (auto it = params.find("dims"); it != params.end()) {
                dims = static_cast<std::size_t>(std::stoul(it->second));
            }
            if (dims == 0) throw ConfigError("hash-embed mock: dims must be >= 1");
            return std::make_shared<HashEmbedTransport>(dims);
        }
        if (name == "token-overlap") return std::make_shared<TokenOverlapTransport>();
        if (name == "scripted") {
            auto it = params.find("script");
            if (it == params.end()) {
                return std::make_shared<ScriptedTransport>();
            }
            return ScriptedTransport::from_file(it->second);
        }
        throw ConfigError("unknown mock endpoint: " + url);
    }
    if (url.rfind("http://", 0) == 0 || url.rfind("https://", 0) == 0) {
        return std::make_shared<HttpTransport>(url, endpoint.timeout);
    }
    throw ConfigError("unsupported endpoint url: " + url);
}

// ---------------------------------------------------------------------------
// Client

ModelClient::ModelClient(ModelEndpoint endpoint, std::shared_ptr<ResponseCache> cache,
                         std::shared_ptr<Transport> transport)
    : endpoint_(std::move(endpoint)),
      cache_(cache ? std::move(cache) : ResponseCache::disabled()),
      transport_(transport ? std::move(transport) : make_transport(endpoint_)) {
    if (endpoint_.max_batch < 1) throw ConfigError("endpoint max_batch must be >= 1");
    const auto bound = static_cast<std::ptrdiff_t>(
        std::clamp<std::size_t>(endpoint_.max_in_flight, 1, 256));
    in_flight_ = std::make_unique<std::counting_semaphore<256>>(bound);
}

void ModelClient::require_kind(EndpointKind kind, const char* op) const {
    if (endpoint_.kind != kind) {
        throw ParameterError(std::string(op) + ": endpoint kind is " +
                             std::string(endpoint_kind_name(endpoint_.kind)) +
                             ", expected " + std::string(endpoint_kind_name(kind)));
    }
}

json ModelClient::wire_post(const json& payload) {
    std::string last_error;
    for (std::size_t attempt = 0; attempt <= endpoint_.max_retries; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(endpoint_.backoff * (1u << (attempt - 1)));
        }
        {
            std::lock_guard lock(mutex_);
            ++attempts_;
        }
        try {
            in_flight_->acquire();
            struct Release {
                std::counting_semaphore<256>* s;
                ~Release() { s->release(); }
            } release{in_flight_.get()};
            json response = transport_->post(payload);
            std::lock_guard lock(mutex_);
            ++wire_calls_;
            return response;
        } catch (const TransportError& e) {
            last_error = e.what();
        }
    }
    throw GatewayError("gateway: " + last_error + " (after " +
                           std::to_string(endpoint_.max_retries + 1) + " attempts)",
                       endpoint_.max_retries + 1);
}

json ModelClient::cached_post(const json& payload, bool use_cache) {
    if (!use_cache) return wire_post(payload);
    const std::string key = cache_key(endpoint_.kind, endpoint_.model_id, payload);
    if (auto hit = cache_->get(key)) return *hit;
    json response = wire_post(payload);
    cache_->put(key, response);
    return response;
}

namespace {
EmbeddingVector parse_vector(const json& value) {
    EmbeddingVector v;
    v.reserve(value.size());
    for (const auto& x : value) {
        const double d = x.get<double>();
        if (!std::isfinite(d)) throw ProtocolError("embedding contains non-finite value");
        v.push_back(d);
    }
    return v;
}
}  // namespace

std::vector<EmbeddingVector> ModelClient::embed_texts(const std::vector<std::string>& texts) {
    require_kind(EndpointKind::text_embed, "embed_texts");
    {
        std::lock_guard lock(mutex_);
        ++invocations_;
    }
    std::vector<EmbeddingVector> out(texts.size());

    // Per-text cache probe; misses are batched onto the wire.
    std::vector<std::size_t> missing;
    std::vector<std::string> keys(texts.size());
    for (std::size_t i = 0; i < texts.size(); ++i) {
        json single{{"model", endpoint_.model_id}, {"texts", json::array({texts[i]})}};
        keys[i] = cache_key(endpoint_.kind, endpoint_.model_id, single);
        if (auto hit = cache_->get(keys[i])) {
            out[i] = parse_vector(hit->at("vectors").at(0));
        } else {
            missing.push_back(i);
        }
    }

    for (std::size_t start = 0; start < missing.size(); start += endpoint_.max_batch) {
        const std::size_t end = std::min(missing.size(), start + endpoint_.max_batch);
        json batch_texts = json::array();
        for (std::size_t i = start; i < end; ++i) batch_texts.push_back(texts[missing[i]]);
        json payload{{"model", endpoint_.model_id}, {"texts", batch_texts}};
        json response = wire_post(payload);
        const auto& vectors = response.at("vectors");
        if (!vectors.is_array() || vectors.size() != end - start) {
            throw ProtocolError("embed_texts: response size mismatch");
        }
        for (std::size_t i = start; i < end; ++i) {
            out[missing[i]] = parse_vector(vectors.at(i - start));
            cache_->put(keys[missing[i]],
                        json{{"vectors", json::array({vectors.at(i - start)})}});
        }
    }

    std::lock_guard lock(mutex_);
    for (const auto& v : out) {
        if (!dims_) dims_ = v.size();
        if (v.size() != *dims_) {
            throw ProtocolError("embed_texts: dimension mismatch across batch");
        }
    }
    return out;
}

EmbeddingVector ModelClient::embed_image(const std::string& image_ref) {
    return embed_image_bytes(read_file(image_ref));
}

EmbeddingVector ModelClient::embed_image_bytes(std::string_view bytes) {
    require_kind(EndpointKind::image_embed, "embed_image");
    {
        std::lock_guard lock(mutex_);
        ++invocations_;
    }
    json payload{{"model", endpoint_.model_id}, {"image_b64", base64_encode(bytes)}};
    json response = cached_post(payload, true);
    auto v = parse_vector(response.at("vector"));
    std::lock_guard lock(mutex_);
    if (!dims_) dims_ = v.size();
    if (v.size() != *dims_) throw ProtocolError("embed_image: dimension mismatch");
    return v;
}

std::vector<double> ModelClient::rerank(const std::string& query,
                                        const std::vector<std::string>& candidates) {
    require_kind(EndpointKind::rerank, "rerank");
    {
        std::lock_guard lock(mutex_);
        ++invocations_;
    }
    if (candidates.empty()) return {};
    json payload{{"model", endpoint_.model_id},
                 {"query", query},
                 {"candidates", candidates}};
    json response = cached_post(payload, true);
    const auto& scores = response.at("scores");
    if (!scores.is_array() || scores.size() != candidates.size()) {
        throw ProtocolError("rerank: score count mismatch");
    }
    std::vector<double> out;
    out.reserve(scores.size());
    for (const auto& s : scores) {
        const double d = s.get<double>();
        if (!std::isfinite(d)) throw ProtocolError("rerank: non-finite score");
        out.push_back(d);
    }
    return out;
}

std::string ModelClient::generate(const GenerationRequest& request) {
    require_kind(EndpointKind::generate, "generate");
    {
        std::lock_guard lock(mutex_);
        ++invocations_;
    }
    json images = json::array();
    for (const auto& ref : request.image_refs) {
        images.push_back(base64_encode(read_file(ref)));
    }
    json payload{{"model", endpoint_.model_id},
                 {"prompt", request.prompt_text},
                 {"images_b64", images},
                 {"temperature", request.temperature}};
    json response = cached_post(payload, request.temperature == 0.0);
    return response.at("text").get<std::string>();
}

std::size_t ModelClient::wire_calls() const {
    std::lock_guard lock(mutex_);
    return wire_calls_;
}

std::size_t ModelClient::attempts() const {
    std::lock_guard lock(mutex_);
    return attempts_;
}

std::size_t ModelClient::invocations() const {
    std::lock_guard lock(mutex_);
    return invocations_;
}

}  // namespace medrag
