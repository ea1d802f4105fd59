#include "medrag/query.hpp"

#include <algorithm>
#include <map>
#include <unordered_map>

#include "medrag/errors.hpp"

namespace medrag {

std::size_t QuerySet::unstructured_count() const {
    std::size_t n = 0;
    for (const auto& e : entries) {
        if (std::holds_alternative<std::string>(e.query)) ++n;
    }
    return n;
}

std::size_t QuerySet::graph_count() const {
    return entries.size() - unstructured_count();
}

std::string_view diagnostic_kind_name(DiagnosticKind k) {
    switch (k) {
        case DiagnosticKind::overflow_total: return "overflow_total";
        case DiagnosticKind::overflow_corpus: return "overflow_corpus";
        case DiagnosticKind::extra_graph: return "extra_graph";
        case DiagnosticKind::malformed_graph: return "malformed_graph";
        case DiagnosticKind::unclosed_tag: return "unclosed_tag";
        case DiagnosticKind::term_not_found: return "term_not_found";
        case DiagnosticKind::retrieval_failed: return "retrieval_failed";
    }
    return "unknown";
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

std::vector<std::string> split_on(const std::string& text, char sep) {
    std::vector<std::string> parts;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto next = text.find(sep, pos);
        if (next == std::string::npos) next = text.size();
        parts.push_back(text.substr(pos, next - pos));
        pos = next + 1;
    }
    return parts;
}

/// First occurrence of <tag>...</tag>; nullopt when the tag never opens,
/// empty-marker when it opens but never closes.
struct TagContent {
    bool present = false;
    bool closed = false;
    std::string content;
};

TagContent extract_tag(const std::string& raw, std::string_view name) {
    TagContent out;
    const std::string open = "<" + std::string(name) + ">";
    const std::string close = "</" + std::string(name) + ">";
    const auto begin = raw.find(open);
    if (begin == std::string::npos) return out;
    out.present = true;
    const auto end = raw.find(close, begin + open.size());
    if (end == std::string::npos) return out;
    out.closed = true;
    out.content = raw.substr(begin + open.size(), end - begin - open.size());
    return out;
}

std::optional<GraphQuery> parse_graph_query(const std::string& piece) {
    const auto comma = piece.find(',');
    if (comma == std::string::npos) return std::nullopt;
    GraphQuery q;
    q.term = trim(piece.substr(0, comma));
    q.relation = trim(piece.substr(comma + 1));
    if (q.term.empty()) return std::nullopt;
    return q;
}

}  // namespace

ParseResult parse_query_output(const std::string& raw, ParseMode mode,
                               const ParseLimits& limits) {
    ParseResult result;
    std::size_t unstructured_kept = 0;
    bool graph_kept = false;

    for (Corpus corpus : kAllCorpora) {
        const auto tag = extract_tag(raw, corpus_name(corpus));
        if (!tag.present) continue;
        if (!tag.closed) {
            result.diagnostics.push_back(
                {DiagnosticKind::unclosed_tag, corpus, "tag never closed"});
            continue;
        }
        if (trim(tag.content).empty()) continue;

        int j = 0;
        std::size_t kept_for_corpus = 0;
        for (const auto& piece : split_on(tag.content, ';')) {
            const std::string text = trim(piece);
            if (text.empty()) continue;  // stray separators are not queries

            if (corpus == Corpus::graph) {
                const auto parsed = parse_graph_query(text);
                if (!parsed) {
                    result.diagnostics.push_back({DiagnosticKind::malformed_graph, corpus,
                                                  "no comma in '" + text + "'"});
                    continue;
                }
                if (mode == ParseMode::execution && graph_kept) {
                    result.diagnostics.push_back(
                        {DiagnosticKind::extra_graph, corpus, "'" + text + "'"});
                    continue;
                }
                if (mode == ParseMode::exploration &&
                    kept_for_corpus >= limits.max_per_corpus) {
                    result.diagnostics.push_back(
                        {DiagnosticKind::overflow_corpus, corpus, "'" + text + "'"});
                    continue;
                }
                result.set.entries.push_back(QueryEntry{corpus, ++j, *parsed});
                graph_kept = true;
                ++kept_for_corpus;
            } else {
                if (mode == ParseMode::execution &&
                    unstructured_kept >= limits.max_unstructured_total) {
                    result.diagnostics.push_back(
                        {DiagnosticKind::overflow_total, corpus, "'" + text + "'"});
                    continue;
                }
                if (mode == ParseMode::exploration &&
                    kept_for_corpus >= limits.max_per_corpus) {
                    result.diagnostics.push_back(
                        {DiagnosticKind::overflow_corpus, corpus, "'" + text + "'"});
                    continue;
                }
                result.set.entries.push_back(QueryEntry{corpus, ++j, text});
                ++unstructured_kept;
                ++kept_for_corpus;
            }
        }
    }
    return result;
}

std::string serialize_query_set(const QuerySet& set) {
    std::map<Corpus, std::vector<std::string>> per_corpus;
    for (const auto& entry : set.entries) {
        std::string rendered;
        if (const auto* text = std::get_if<std::string>(&entry.query)) {
            rendered = *text;
        } else {
            const auto& g = std::get<GraphQuery>(entry.query);
            rendered = g.term + " , " + g.relation;
        }
        per_corpus[entry.corpus].push_back(std::move(rendered));
    }

    std::string out;
    bool first = true;
    for (Corpus corpus : kAllCorpora) {
        if (!first) out += '\n';
        first = false;
        out += "<" + std::string(corpus_name(corpus)) + ">";
        const auto it = per_corpus.find(corpus);
        if (it != per_corpus.end()) {
            for (std::size_t i = 0; i < it->second.size(); ++i) {
                if (i > 0) out += " ; ";
                out += it->second[i];
            }
        }
        out += "</" + std::string(corpus_name(corpus)) + ">";
    }
    return out;
}

// ---------------------------------------------------------------------------
// Execution

const ChunkStore* QueryExecutionContext::chunk_store(Corpus c) const {
    for (std::size_t i = 0; i < 4; ++i) {
        if (kUnstructuredCorpora[i] == c) return chunk_stores[i];
    }
    return nullptr;
}

const DenseIndex* QueryExecutionContext::chunk_index(Corpus c) const {
    for (std::size_t i = 0; i < 4; ++i) {
        if (kUnstructuredCorpora[i] == c) return chunk_indices[i];
    }
    return nullptr;
}

GraphFacts retrieve_graph(const std::string& term, const std::string& relation,
                          const GraphStore& store, ModelClient& reranker,
                          std::size_t top_k, std::vector<Diagnostic>& diagnostics) {
    GraphFacts facts;
    const GraphTerm* stored = store.find_term(term);
    if (stored == nullptr) {
        diagnostics.push_back(
            {DiagnosticKind::term_not_found, Corpus::graph, "'" + term + "'"});
        return facts;
    }
    facts.found = true;
    facts.term = stored->surface;
    facts.definition = stored->definition;

    const auto relations = store.one_hop(stored->term_id);
    if (relations.empty()) return facts;

    std::vector<ScoredHit> hits;
    std::vector<std::string> texts;
    hits.reserve(relations.size());
    texts.reserve(relations.size());
    for (std::size_t i = 0; i < relations.size(); ++i) {
        const auto& rel = relations[i];
        const GraphTerm* head = store.find_term_by_id(rel.head);
        const GraphTerm* tail = store.find_term_by_id(rel.tail);
        std::string text = (head ? head->surface : rel.head) + " " + rel.relation_type +
                           " " + (tail ? tail->surface : rel.tail);
        hits.push_back(ScoredHit{std::to_string(i), 0.0, i + 1});
        texts.push_back(std::move(text));
    }

    const std::size_t keep = std::min(top_k, hits.size());
    auto reranked = rerank_topk(
        relation, hits, texts, keep,
        [&](const std::string& q, const std::vector<std::string>& cands) {
            return reranker.rerank(q, cands);
        });
    for (const auto& hit : reranked) {
        const auto idx = static_cast<std::size_t>(std::stoul(hit.item_id));
        facts.relations.push_back(hit);
        facts.relation_texts.push_back(texts[idx]);
    }
    return facts;
}

DocumentBundle execute_queries(const QuerySet& set, const QueryExecutionContext& ctx) {
    DocumentBundle bundle;
    std::unordered_map<std::string, std::size_t> doc_position;
    std::size_t unstructured_done = 0;
    bool graph_done = false;

    for (const auto& entry : set.entries) {
        if (const auto* text = std::get_if<std::string>(&entry.query)) {
            // execution budget is enforced again here so a hand-built set
            // cannot exceed the caps either
            if (unstructured_done >= ctx.params.max_unstructured_queries) {
                bundle.diagnostics.push_back(
                    {DiagnosticKind::overflow_total, entry.corpus, "'" + *text + "'"});
                continue;
            }
            ++unstructured_done;
            try {
                const DenseIndex* index = ctx.chunk_index(entry.corpus);
                const ChunkStore* store = ctx.chunk_store(entry.corpus);
                if (index == nullptr || store == nullptr) {
                    throw InputError("no index for corpus " +
                                     std::string(corpus_name(entry.corpus)));
                }
                if (index->size() == 0) continue;
                const auto query_vec = ctx.text_embedder->embed_texts({*text}).front();
                auto hits = knn_search(*index, query_vec,
                                       std::min(ctx.params.top_n, index->size()));

                std::vector<std::string> texts;
                texts.reserve(hits.size());
                for (const auto& hit : hits) {
                    const Chunk* chunk = store->find(hit.item_id);
                    texts.push_back(chunk ? chunk->text : std::string{});
                }
                const std::size_t m = std::min(ctx.params.top_m, hits.size());
                auto top = rerank_topk(
                    *text, hits, texts, m,
                    [&](const std::string& q, const std::vector<std::string>& cands) {
                        return ctx.reranker->rerank(q, cands);
                    });

                for (const auto& hit : top) {
                    const Chunk* chunk = store->find(hit.item_id);
                    auto it = doc_position.find(hit.item_id);
                    if (it != doc_position.end()) {
                        // seen through an earlier query; keep the best score
                        bundle.documents[it->second].score =
                            std::max(bundle.documents[it->second].score, hit.score);
                        continue;
                    }
                    doc_position.emplace(hit.item_id, bundle.documents.size());
                    bundle.documents.push_back(BundleDocument{
                        hit.item_id, entry.corpus, chunk ? chunk->text : std::string{},
                        hit.score});
                }
            } catch (const Error& e) {
                bundle.diagnostics.push_back(
                    {DiagnosticKind::retrieval_failed, entry.corpus, e.what()});
            }
        } else {
            const auto& g = std::get<GraphQuery>(entry.query);
            if (graph_done) {
                bundle.diagnostics.push_back(
                    {DiagnosticKind::extra_graph, Corpus::graph, "'" + g.term + "'"});
                continue;
            }
            graph_done = true;
            try {
                if (ctx.graph_store == nullptr) throw InputError("no graph store");
                bundle.graph = retrieve_graph(g.term, g.relation, *ctx.graph_store,
                                              *ctx.reranker,
                                              ctx.params.graph_top_relations,
                                              bundle.diagnostics);
            } catch (const Error& e) {
                bundle.diagnostics.push_back(
                    {DiagnosticKind::retrieval_failed, Corpus::graph, e.what()});
            }
        }
    }
    return bundle;
}

ReportBundle retrieve_reports_bytes(std::string_view image_bytes,
                                    const DenseIndex& report_index,
                                    const ReportStore& reports, ModelClient& image_embedder,
                                    double tau, std::size_t k_max) {
    ReportBundle bundle;
    if (report_index.size() == 0 || k_max == 0) return bundle;
    const auto query = image_embedder.embed_image_bytes(image_bytes);
    auto hits = knn_search(report_index, query, std::min(k_max, report_index.size()));
    auto selected = adaptive_select_reports(hits, tau, k_max);
    for (const auto& hit : selected) {
        const ReportEntry* entry = reports.find(hit.item_id);
        bundle.reports.push_back(ScoredReport{
            hit.item_id, entry ? entry->report_text : std::string{}, hit.score});
    }
    return bundle;
}

ReportBundle retrieve_reports(const std::string& image_ref, const DenseIndex& report_index,
                              const ReportStore& reports, ModelClient& image_embedder,
                              double tau, std::size_t k_max) {
    return retrieve_reports_bytes(read_file(image_ref), report_index, reports,
                                  image_embedder, tau, k_max);
}

// ---------------------------------------------------------------------------
// Rendering

std::string render_text_doc(const DocumentBundle& bundle) {
    std::string out;
    std::size_t i = 0;
    for (const auto& doc : bundle.documents) {
        if (!out.empty()) out += '\n';
        out += "Document " + std::to_string(++i) + " (" +
               std::string(corpus_name(doc.corpus)) + "): " + doc.text;
    }
    if (bundle.graph && bundle.graph->found) {
        if (!bundle.graph->definition.empty()) {
            if (!out.empty()) out += '\n';
            out += "Document " + std::to_string(++i) + " (graph): " + bundle.graph->term +
                   ": " + bundle.graph->definition;
        }
        for (const auto& text : bundle.graph->relation_texts) {
            if (!out.empty()) out += '\n';
            out += "Document " + std::to_string(++i) + " (graph): " + text;
        }
    }
    return out;
}

std::string render_mm_doc(const ReportBundle& bundle) {
    std::string out;
    std::size_t i = 0;
    for (const auto& report : bundle.reports) {
        if (!out.empty()) out += '\n';
        out += "Report " + std::to_string(++i) + ": " + report.text;
    }
    return out;
}

std::string render_context_prompt(const std::string& question, const ReportBundle& k_r,
                                  const DocumentBundle& k_d, PromptTask task) {
    const std::string text_doc = render_text_doc(k_d);
    const std::string mm_doc = render_mm_doc(k_r);
    if (task == PromptTask::vqa) return render_vqa_prompt(question, text_doc, mm_doc);
    return render_report_prompt(text_doc, mm_doc, task);
}

std::vector<json> bundle_rows(const std::string& sample_id, const ReportBundle& k_r,
                              const DocumentBundle& k_d) {
    std::vector<json> rows;
    for (const auto& report : k_r.reports) {
        rows.push_back(json{{"sample_id", sample_id},
                            {"kind", "report"},
                            {"corpus", ""},
                            {"text", report.text},
                            {"score", report.score},
                            {"id", report.report_id}});
    }
    for (const auto& doc : k_d.documents) {
        rows.push_back(json{{"sample_id", sample_id},
                            {"kind", "document"},
                            {"corpus", corpus_name(doc.corpus)},
                            {"text", doc.text},
                            {"score", doc.score},
                            {"id", doc.chunk_id}});
    }
    if (k_d.graph && k_d.graph->found) {
        if (!k_d.graph->definition.empty()) {
            rows.push_back(json{{"sample_id", sample_id},
                                {"kind", "graph_fact"},
                                {"corpus", "graph"},
                                {"text", k_d.graph->term + ": " + k_d.graph->definition},
                                {"score", 0.0},
                                {"id", k_d.graph->term}});
        }
        for (std::size_t i = 0; i < k_d.graph->relation_texts.size(); ++i) {
            rows.push_back(json{{"sample_id", sample_id},
                                {"kind", "graph_fact"},
                                {"corpus", "graph"},
                                {"text", k_d.graph->relation_texts[i]},
                                {"score", k_d.graph->relations[i].score},
                                {"id", k_d.graph->term}});
        }
    }
    return rows;
}

}  // namespace medrag
