#include "medrag/corpus.hpp"

#include <algorithm>

#include "medrag/errors.hpp"
#include "medrag/image.hpp"

namespace medrag {

std::string_view corpus_name(Corpus c) {
    switch (c) {
        case Corpus::research: return "research";
        case Corpus::wiki: return "wiki";
        case Corpus::book: return "book";
        case Corpus::guideline: return "guideline";
        case Corpus::graph: return "graph";
    }
    return "unknown";
}

std::optional<Corpus> corpus_from_name(std::string_view name) {
    for (Corpus c : kAllCorpora) {
        if (corpus_name(c) == name) return c;
    }
    return std::nullopt;
}

std::string_view modality_name(Modality m) {
    switch (m) {
        case Modality::radiology: return "radiology";
        case Modality::ophthalmology: return "ophthalmology";
        case Modality::pathology: return "pathology";
    }
    return "unknown";
}

std::optional<Modality> modality_from_name(std::string_view name) {
    for (Modality m : {Modality::radiology, Modality::ophthalmology, Modality::pathology}) {
        if (modality_name(m) == name) return m;
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------

std::vector<Chunk> chunk_document(Corpus corpus, std::string_view doc_id,
                                  std::string_view text, std::size_t max_len,
                                  std::size_t overlap) {
    if (max_len < 1 || overlap >= max_len) {
        throw ParameterError("chunk_document: require 1 <= max_len and overlap < max_len");
    }
    std::vector<Chunk> chunks;
    if (text.empty()) return chunks;

    const std::size_t stride = max_len - overlap;
    std::size_t offset = 0;
    for (;;) {
        const std::size_t len = std::min(max_len, text.size() - offset);
        Chunk chunk;
        chunk.corpus = corpus;
        chunk.source_doc = std::string(doc_id);
        chunk.char_offset = offset;
        chunk.text = std::string(text.substr(offset, len));
        chunk.chunk_id = std::string(doc_id) + ":" + std::to_string(offset);
        chunks.push_back(std::move(chunk));
        if (offset + max_len >= text.size()) break;
        offset += stride;
    }
    return chunks;
}

// ---------------------------------------------------------------------------

void ChunkStore::append(Chunk chunk) {
    if (sealed_) throw InputError("chunk store is sealed");
    if (by_id_.contains(chunk.chunk_id)) {
        throw InputError("duplicate chunk id: " + chunk.chunk_id);
    }
    by_id_.emplace(chunk.chunk_id, chunks_.size());
    chunks_.push_back(std::move(chunk));
}

const Chunk* ChunkStore::find(std::string_view chunk_id) const {
    auto it = by_id_.find(std::string(chunk_id));
    return it == by_id_.end() ? nullptr : &chunks_[it->second];
}

void ChunkStore::save(const std::filesystem::path& path) const {
    std::vector<json> rows;
    rows.reserve(chunks_.size());
    for (const auto& c : chunks_) {
        rows.push_back(json{{"chunk_id", c.chunk_id},
                            {"corpus", corpus_name(c.corpus)},
                            {"source_doc", c.source_doc},
                            {"char_offset", c.char_offset},
                            {"text", c.text}});
    }
    write_jsonl(path, rows);
}

ChunkStore ChunkStore::load(Corpus corpus, const std::filesystem::path& path) {
    ChunkStore store(corpus);
    for (const auto& row : read_jsonl(path)) {
        Chunk c;
        c.chunk_id = row.at("chunk_id").get<std::string>();
        const auto name = row.at("corpus").get<std::string>();
        const auto parsed = corpus_from_name(name);
        if (!parsed) throw InputError("chunk store: unknown corpus '" + name + "'");
        c.corpus = *parsed;
        c.source_doc = row.at("source_doc").get<std::string>();
        c.char_offset = row.at("char_offset").get<std::size_t>();
        c.text = row.at("text").get<std::string>();
        store.append(std::move(c));
    }
    store.seal();
    return store;
}

// ---------------------------------------------------------------------------

namespace {
std::string relation_key(const GraphRelation& r) {
    return r.head + "\x1f" + r.relation_type + "\x1f" + r.tail;
}
}  // namespace

GraphIngestStats GraphStore::ingest(const std::vector<GraphTerm>& terms,
                                    const std::vector<GraphRelation>& relations) {
    if (sealed_) throw InputError("graph store is sealed");
    GraphIngestStats stats;
    for (const auto& term : terms) {
        const std::string surface_key = normalize_term(term.surface);
        if (surface_key.empty() || term.term_id.empty() || by_id_.contains(term.term_id) ||
            by_surface_.contains(surface_key)) {
            ++stats.rejected;
            continue;
        }
        by_id_.emplace(term.term_id, terms_.size());
        by_surface_.emplace(surface_key, terms_.size());
        terms_.push_back(term);
        ++stats.terms;
    }
    for (const auto& rel : relations) {
        const std::string key = relation_key(rel);
        if (!by_id_.contains(rel.head) || !by_id_.contains(rel.tail) ||
            relation_seen_.contains(key)) {
            ++stats.rejected;
            continue;
        }
        relation_seen_.emplace(key, true);
        adjacency_[rel.head].push_back(relations_.size());
        if (rel.tail != rel.head) adjacency_[rel.tail].push_back(relations_.size());
        relations_.push_back(rel);
        ++stats.relations;
    }
    return stats;
}

const GraphTerm* GraphStore::find_term(std::string_view surface) const {
    auto it = by_surface_.find(normalize_term(surface));
    return it == by_surface_.end() ? nullptr : &terms_[it->second];
}

const GraphTerm* GraphStore::find_term_by_id(std::string_view term_id) const {
    auto it = by_id_.find(std::string(term_id));
    return it == by_id_.end() ? nullptr : &terms_[it->second];
}

std::vector<GraphRelation> GraphStore::one_hop(std::string_view term_id) const {
    std::vector<GraphRelation> out;
    auto it = adjacency_.find(std::string(term_id));
    if (it == adjacency_.end()) return out;
    out.reserve(it->second.size());
    for (std::size_t idx : it->second) out.push_back(relations_[idx]);
    return out;
}

void GraphStore::save(const std::filesystem::path& terms_path,
                      const std::filesystem::path& relations_path) const {
    std::vector<json> term_rows;
    term_rows.reserve(terms_.size());
    for (const auto& t : terms_) {
        term_rows.push_back(json{{"term_id", t.term_id},
                                 {"surface", t.surface},
                                 {"definition", t.definition}});
    }
    write_jsonl(terms_path, term_rows);

    std::vector<json> rel_rows;
    rel_rows.reserve(relations_.size());
    for (const auto& r : relations_) {
        rel_rows.push_back(json{{"head", r.head},
                                {"relation_type", r.relation_type},
                                {"tail", r.tail}});
    }
    write_jsonl(relations_path, rel_rows);
}

GraphStore GraphStore::load(const std::filesystem::path& terms_path,
                            const std::filesystem::path& relations_path) {
    std::vector<GraphTerm> terms;
    for (const auto& row : read_jsonl(terms_path)) {
        terms.push_back(GraphTerm{row.at("term_id").get<std::string>(),
                                  row.at("surface").get<std::string>(),
                                  row.value("definition", std::string{})});
    }
    std::vector<GraphRelation> relations;
    for (const auto& row : read_jsonl(relations_path)) {
        relations.push_back(GraphRelation{row.at("head").get<std::string>(),
                                          row.at("relation_type").get<std::string>(),
                                          row.at("tail").get<std::string>()});
    }
    GraphStore store;
    store.ingest(terms, relations);
    store.seal();
    return store;
}

// ---------------------------------------------------------------------------

DedupResult dedup_reports(const std::vector<ReportEntry>& entries, int hamming_threshold) {
    DedupResult result;
    for (const auto& entry : entries) {
        const ReportEntry* collapsed_into = nullptr;
        for (const auto& kept : result.kept) {
            if (hamming_distance(entry.phash, kept.phash) <= hamming_threshold) {
                collapsed_into = &kept;
                break;
            }
        }
        if (collapsed_into != nullptr) {
            result.duplicates.emplace(entry.report_id, collapsed_into->report_id);
        } else {
            result.kept.push_back(entry);
        }
    }
    return result;
}

void ReportStore::append(ReportEntry entry) {
    if (sealed_) throw InputError("report store is sealed");
    if (by_id_.contains(entry.report_id)) {
        throw InputError("duplicate report id: " + entry.report_id);
    }
    by_id_.emplace(entry.report_id, entries_.size());
    entries_.push_back(std::move(entry));
}

const ReportEntry* ReportStore::find(std::string_view report_id) const {
    auto it = by_id_.find(std::string(report_id));
    return it == by_id_.end() ? nullptr : &entries_[it->second];
}

std::vector<const ReportEntry*> ReportStore::by_modality(Modality m) const {
    std::vector<const ReportEntry*> out;
    for (const auto& e : entries_) {
        if (e.modality == m) out.push_back(&e);
    }
    return out;
}

void ReportStore::save(const std::filesystem::path& path) const {
    std::vector<json> rows;
    rows.reserve(entries_.size());
    for (const auto& e : entries_) {
        json row{{"report_id", e.report_id},
                 {"modality", modality_name(e.modality)},
                 {"image_path", e.image_ref},
                 {"report_text", e.report_text},
                 {"phash", e.phash}};
        rows.push_back(std::move(row));
    }
    write_jsonl(path, rows);
}

ReportStore ReportStore::load(const std::filesystem::path& path) {
    ReportStore store;
    for (const auto& row : read_jsonl(path)) {
        ReportEntry e;
        e.report_id = row.at("report_id").get<std::string>();
        const auto mod = modality_from_name(row.at("modality").get<std::string>());
        if (!mod) throw InputError("report store: unknown modality");
        e.modality = *mod;
        e.image_ref = row.at("image_path").get<std::string>();
        e.report_text = row.at("report_text").get<std::string>();
        e.phash = row.value("phash", std::uint64_t{0});
        store.append(std::move(e));
    }
    store.seal();
    return store;
}

}  // namespace medrag
