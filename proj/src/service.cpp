#include "medrag/service.hpp"

#include <thread>

#include <httplib.h>

#include "medrag/errors.hpp"

namespace medrag {

std::shared_ptr<RetrievalRuntime> RetrievalRuntime::open(const PipelineConfig& config) {
    auto runtime = std::make_shared<RetrievalRuntime>();
    runtime->params_ = config.retrieval;
    runtime->cache_ = config.cache_dir.empty() ? ResponseCache::in_memory()
                                               : ResponseCache::on_disk(config.cache_dir);

    for (std::size_t i = 0; i < 4; ++i) {
        const Corpus corpus = kUnstructuredCorpora[i];
        const auto store_path =
            config.store_dir / ("chunks_" + std::string(corpus_name(corpus)) + ".jsonl");
        if (std::filesystem::exists(store_path)) {
            runtime->chunk_stores_[i] = ChunkStore::load(corpus, store_path);
        }
        const auto index_path =
            config.index_dir / (std::string(corpus_name(corpus)) + ".idx");
        if (std::filesystem::exists(index_path)) {
            runtime->chunk_indices_[i] = DenseIndex::load(index_path);
        }
    }
    const auto terms_path = config.store_dir / "graph_terms.jsonl";
    const auto relations_path = config.store_dir / "graph_relations.jsonl";
    if (std::filesystem::exists(terms_path) && std::filesystem::exists(relations_path)) {
        runtime->graph_ = GraphStore::load(terms_path, relations_path);
    }
    const auto reports_path = config.store_dir / "reports.jsonl";
    if (std::filesystem::exists(reports_path)) {
        runtime->reports_ = ReportStore::load(reports_path);
        for (Modality m : {Modality::radiology, Modality::ophthalmology,
                           Modality::pathology}) {
            const auto index_path =
                config.index_dir / ("reports_" + std::string(modality_name(m)) + ".idx");
            if (std::filesystem::exists(index_path)) {
                runtime->report_indices_.emplace(std::string(modality_name(m)),
                                                 DenseIndex::load(index_path));
            }
        }
    }

    runtime->text_embedder_ = std::make_unique<ModelClient>(
        config.endpoint("text_embed", EndpointKind::text_embed), runtime->cache_);
    runtime->image_embedder_ = std::make_unique<ModelClient>(
        config.endpoint("image_embed", EndpointKind::image_embed), runtime->cache_);
    runtime->reranker_ = std::make_unique<ModelClient>(
        config.endpoint("rerank", EndpointKind::rerank), runtime->cache_);
    return runtime;
}

QueryExecutionContext RetrievalRuntime::context() const {
    QueryExecutionContext ctx;
    for (std::size_t i = 0; i < 4; ++i) {
        ctx.chunk_stores[i] = chunk_stores_[i] ? &*chunk_stores_[i] : nullptr;
        ctx.chunk_indices[i] = chunk_indices_[i] ? &*chunk_indices_[i] : nullptr;
    }
    ctx.graph_store = graph_ ? &*graph_ : nullptr;
    ctx.text_embedder = text_embedder_.get();
    ctx.reranker = reranker_.get();
    ctx.params = params_;
    return ctx;
}

const DenseIndex* RetrievalRuntime::report_index(const std::string& modality) const {
    auto it = report_indices_.find(modality);
    return it == report_indices_.end() ? nullptr : &it->second;
}

DocumentBundle RetrievalRuntime::retrieve_documents(const std::string& raw_query_set) const {
    ParseLimits limits;
    limits.max_unstructured_total = params_.max_unstructured_queries;
    auto parsed = parse_query_output(raw_query_set, ParseMode::execution, limits);
    auto bundle = execute_queries(parsed.set, context());
    // parse-stage drops belong in the same diagnostic stream
    bundle.diagnostics.insert(bundle.diagnostics.begin(), parsed.diagnostics.begin(),
                              parsed.diagnostics.end());
    return bundle;
}

ReportBundle RetrievalRuntime::retrieve_reports_for(std::string_view image_bytes,
                                                    const std::string& modality) const {
    const DenseIndex* index = report_index(modality);
    if (index == nullptr || !reports_) {
        throw InputError("no report index for modality '" + modality + "'");
    }
    return retrieve_reports_bytes(image_bytes, *index, *reports_, *image_embedder_,
                                  params_.tau, params_.k_max);
}

// ---------------------------------------------------------------------------

namespace {
json diagnostic_to_json(const Diagnostic& d) {
    return json{{"kind", diagnostic_kind_name(d.kind)},
                {"corpus", corpus_name(d.corpus)},
                {"detail", d.detail}};
}
}  // namespace

struct RetrievalService::Impl {
    httplib::Server server;
    std::thread worker;
};

RetrievalService::RetrievalService(std::shared_ptr<RetrievalRuntime> runtime)
    : impl_(std::make_unique<Impl>()), runtime_(std::move(runtime)) {
    impl_->server.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
        res.set_content(json{{"status", "ok"}}.dump(), "application/json");
    });
    impl_->server.Post("/retrieve",
                       [this](const httplib::Request& req, httplib::Response& res) {
                           auto [body, status] = handle_retrieve(req.body);
                           res.status = status;
                           res.set_content(body.dump(), "application/json");
                       });
}

RetrievalService::~RetrievalService() { stop(); }

std::pair<json, int> RetrievalService::handle_retrieve(const std::string& body) const {
    json request = json::parse(body, nullptr, false);
    if (request.is_discarded() || !request.is_object()) {
        return {json{{"error", "request body must be a JSON object"}}, 400};
    }
    try {
        std::string question;
        if (request.contains("question")) {
            if (!request.at("question").is_string()) {
                return {json{{"error", "question must be a string"}}, 400};
            }
            question = request.at("question").get<std::string>();
        }

        json documents = json::array();
        json diagnostics = json::array();
        if (request.contains("query_set")) {
            if (!request.at("query_set").is_string()) {
                return {json{{"error", "query_set must be a string"}}, 400};
            }
            auto bundle =
                runtime_->retrieve_documents(request.at("query_set").get<std::string>());
            for (const auto& row : bundle_rows("", ReportBundle{}, bundle)) {
                json doc = row;
                doc.erase("sample_id");
                documents.push_back(std::move(doc));
            }
            for (const auto& d : bundle.diagnostics) {
                diagnostics.push_back(diagnostic_to_json(d));
            }
        }

        json reports = json::array();
        if (request.contains("image_b64")) {
            if (!request.at("image_b64").is_string() || !request.contains("modality") ||
                !request.at("modality").is_string()) {
                return {json{{"error", "image_b64 requires a string modality"}}, 400};
            }
            const std::string modality = request.at("modality").get<std::string>();
            if (!modality_from_name(modality)) {
                return {json{{"error", "unknown modality '" + modality + "'"}}, 400};
            }
            if (runtime_->report_index(modality) == nullptr) {
                return {json{{"error", "no report index for modality '" + modality + "'"}},
                        400};
            }
            std::string bytes;
            try {
                bytes = base64_decode(request.at("image_b64").get<std::string>());
            } catch (const Error&) {
                return {json{{"error", "image_b64 is not valid base64"}}, 400};
            }
            auto bundle = runtime_->retrieve_reports_for(bytes, modality);
            for (const auto& r : bundle.reports) {
                reports.push_back(json{{"report_id", r.report_id},
                                       {"text", r.text},
                                       {"score", r.score}});
            }
        }

        return {json{{"reports", reports},
                     {"documents", documents},
                     {"diagnostics", diagnostics}},
                200};
    } catch (const std::exception& e) {
        const std::string id = sha256_hex(e.what()).substr(0, 12);
        fprintf(stderr, "[retrieve %s] %s\n", id.c_str(), e.what());
        return {json{{"error", "internal retrieval failure"}, {"diagnostic_id", id}}, 500};
    }
}

bool RetrievalService::run(const std::string& host, int port) {
    return impl_->server.listen(host, port);
}

int RetrievalService::start_background(const std::string& host) {
    const int port = impl_->server.bind_to_any_port(host);
    if (port <= 0) throw Error("service: could not bind a port");
    impl_->worker = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    return port;
}

void RetrievalService::stop() {
    if (impl_ && impl_->server.is_running()) impl_->server.stop();
    if (impl_ && impl_->worker.joinable()) impl_->worker.join();
}

}  // namespace medrag
