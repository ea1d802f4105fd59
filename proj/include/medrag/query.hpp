#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "medrag/corpus.hpp"
#include "medrag/gateway.hpp"
#include "medrag/prompts.hpp"
#include "medrag/retrieval.hpp"

namespace medrag {

// ---------------------------------------------------------------------------
// Query sets

struct GraphQuery {
    std::string term;
    std::string relation;
    bool operator==(const GraphQuery&) const = default;
};

/// Either free text (unstructured corpora) or a (term, relation) pair (graph).
using CorpusQuery = std::variant<std::string, GraphQuery>;

struct QueryEntry {
    Corpus corpus = Corpus::research;
    int j = 1;  // 1-based, contiguous per corpus
    CorpusQuery query;
    bool operator==(const QueryEntry&) const = default;
};

struct QuerySet {
    std::vector<QueryEntry> entries;

    std::size_t unstructured_count() const;
    std::size_t graph_count() const;
    bool operator==(const QuerySet&) const = default;
};

enum class ParseMode { execution, exploration };

enum class DiagnosticKind {
    overflow_total,       // execution: beyond the 4-query unstructured budget
    overflow_corpus,      // exploration: beyond 6 queries for one corpus
    extra_graph,          // execution: beyond the single graph query
    malformed_graph,      // graph query without a comma
    unclosed_tag,         // opening tag without a closing tag
    term_not_found,       // graph lookup miss
    retrieval_failed,     // a sub-retrieval raised
};
std::string_view diagnostic_kind_name(DiagnosticKind k);

struct Diagnostic {
    DiagnosticKind kind;
    Corpus corpus = Corpus::research;
    std::string detail;
};

struct ParseResult {
    QuerySet set;
    std::vector<Diagnostic> diagnostics;
};

struct ParseLimits {
    std::size_t max_unstructured_total = 4;  // execution mode
    std::size_t max_per_corpus = 6;          // exploration mode
};

/// Extracts the five corpus tags from raw model output. Tolerates arbitrary
/// surrounding prose; the first occurrence of each tag wins; empty or missing
/// tags contribute nothing. Tag content splits on ';'. Graph queries split on
/// the first ','. Execution mode keeps at most `max_unstructured_total`
/// unstructured queries (corpus order, then position) and one graph query;
/// exploration mode keeps at most `max_per_corpus` per corpus. Every dropped
/// query is reported exactly once. Never throws on malformed text.
ParseResult parse_query_output(const std::string& raw, ParseMode mode,
                               const ParseLimits& limits = {});

/// Renders a query set in the tagged output grammar: all five corpus tags in
/// canonical order, one per line, queries joined by " ; ", graph queries as
/// "term , relation". parse_query_output inverts this rendering.
std::string serialize_query_set(const QuerySet& set);

// ---------------------------------------------------------------------------
// Bundles

struct BundleDocument {
    std::string chunk_id;
    Corpus corpus = Corpus::research;
    std::string text;
    double score = 0.0;
};

struct GraphFacts {
    bool found = false;
    std::string term;        // stored surface
    std::string definition;  // may be empty
    std::vector<ScoredHit> relations;       // scored against the query relation
    std::vector<std::string> relation_texts;  // aligned with relations
};

struct DocumentBundle {
    std::vector<BundleDocument> documents;
    std::optional<GraphFacts> graph;
    std::vector<Diagnostic> diagnostics;
};

struct ScoredReport {
    std::string report_id;
    std::string text;
    double score = 0.0;
};

struct ReportBundle {
    std::vector<ScoredReport> reports;
};

// ---------------------------------------------------------------------------
// Execution

struct RetrievalParams {
    double tau = 0.8;
    std::size_t k_max = 3;
    std::size_t k0 = 60;
    std::size_t top_n = 10;
    std::size_t top_m = 2;
    std::size_t max_unstructured_queries = 4;
    std::size_t graph_top_relations = 10;
};

/// Everything execute_queries needs to reach the sealed stores.
struct QueryExecutionContext {
    const ChunkStore* chunk_stores[4] = {};  // indexed by unstructured corpus order
    const DenseIndex* chunk_indices[4] = {};
    const GraphStore* graph_store = nullptr;
    ModelClient* text_embedder = nullptr;
    ModelClient* reranker = nullptr;
    RetrievalParams params;

    const ChunkStore* chunk_store(Corpus c) const;
    const DenseIndex* chunk_index(Corpus c) const;
};

/// Runs every query of the set: per unstructured query, kNN top_n over the
/// corpus index followed by rerank to top_m; per graph query, definition plus
/// reranked one-hop relations. Results merge with chunk-level dedup keeping
/// the highest reranker score. A failing query is recorded and never aborts
/// its siblings.
DocumentBundle execute_queries(const QuerySet& set, const QueryExecutionContext& ctx);

/// Definition and one-hop relations for a term, reranked against
/// `relation` and truncated to top_k. Unknown terms yield empty facts plus a
/// term-not-found diagnostic.
GraphFacts retrieve_graph(const std::string& term, const std::string& relation,
                          const GraphStore& store, ModelClient& reranker,
                          std::size_t top_k, std::vector<Diagnostic>& diagnostics);

/// Image-to-report retrieval: embeds the image, searches the modality index,
/// and applies adaptive ratio selection.
ReportBundle retrieve_reports(const std::string& image_ref, const DenseIndex& report_index,
                              const ReportStore& reports, ModelClient& image_embedder,
                              double tau, std::size_t k_max);
ReportBundle retrieve_reports_bytes(std::string_view image_bytes,
                                    const DenseIndex& report_index,
                                    const ReportStore& reports, ModelClient& image_embedder,
                                    double tau, std::size_t k_max);

// ---------------------------------------------------------------------------
// Rendering

/// "Document {i} ({corpus}): {text}" lines, graph facts last; empty bundle
/// renders as an empty string.
std::string render_text_doc(const DocumentBundle& bundle);

/// "Report {i}: {text}" lines.
std::string render_mm_doc(const ReportBundle& bundle);

/// Emits the full context prompt for a task with {text_doc}, {mm_doc}, and
/// {question_text} substituted.
std::string render_context_prompt(const std::string& question, const ReportBundle& k_r,
                                  const DocumentBundle& k_d, PromptTask task);

/// Flattens a bundle pair into serialization rows
/// {sample_id, kind, corpus, text, score}.
std::vector<json> bundle_rows(const std::string& sample_id, const ReportBundle& k_r,
                              const DocumentBundle& k_d);

}  // namespace medrag
