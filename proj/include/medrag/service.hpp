#pragma once

#include <array>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include "medrag/config.hpp"
#include "medrag/query.hpp"

namespace medrag {

/// Sealed stores, indices, and model clients opened from a config; the
/// shared substrate of the retrieve subcommand and the HTTP service.
class RetrievalRuntime {
public:
    /// Opens whatever stores and indices exist under the configured
    /// directories. Endpoints text_embed / image_embed / rerank must be
    /// configured.
    static std::shared_ptr<RetrievalRuntime> open(const PipelineConfig& config);

    QueryExecutionContext context() const;
    const RetrievalParams& params() const { return params_; }
    const ReportStore* report_store() const {
        return reports_ ? &*reports_ : nullptr;
    }
    const DenseIndex* report_index(const std::string& modality) const;
    ModelClient& text_embedder() { return *text_embedder_; }
    ModelClient& image_embedder() { return *image_embedder_; }
    ModelClient& reranker() { return *reranker_; }
    std::shared_ptr<ResponseCache> cache() const { return cache_; }

    /// Parses raw generator output in execution mode and runs it.
    DocumentBundle retrieve_documents(const std::string& raw_query_set) const;

    /// Same-modality image-to-report retrieval.
    ReportBundle retrieve_reports_for(std::string_view image_bytes,
                                      const std::string& modality) const;

private:
    std::array<std::optional<ChunkStore>, 4> chunk_stores_;
    std::array<std::optional<DenseIndex>, 4> chunk_indices_;
    std::optional<GraphStore> graph_;
    std::optional<ReportStore> reports_;
    std::map<std::string, DenseIndex> report_indices_;  // keyed by modality name
    std::shared_ptr<ResponseCache> cache_;
    std::unique_ptr<ModelClient> text_embedder_;
    std::unique_ptr<ModelClient> image_embedder_;
    std::unique_ptr<ModelClient> reranker_;
    RetrievalParams params_;
};

/// HTTP facade: POST /retrieve and GET /healthz. Stateless between requests.
class RetrievalService {
public:
    explicit RetrievalService(std::shared_ptr<RetrievalRuntime> runtime);
    ~RetrievalService();

    /// Blocking listen on a fixed port.
    bool run(const std::string& host, int port);

    /// Binds an ephemeral port and serves from a background thread; returns
    /// the bound port. Used by tests.
    int start_background(const std::string& host);
    void stop();

    /// Pure request handler behind the wire surface; returns the response
    /// body and HTTP status.
    std::pair<json, int> handle_retrieve(const std::string& body) const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    std::shared_ptr<RetrievalRuntime> runtime_;
};

}  // namespace medrag
