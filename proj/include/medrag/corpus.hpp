#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "medrag/util.hpp"

namespace medrag {

// ---------------------------------------------------------------------------
// Corpus identities

enum class Corpus { research, wiki, book, guideline, graph };

/// The four corpora that hold free text; graph is the only structured one.
inline constexpr Corpus kUnstructuredCorpora[] = {Corpus::research, Corpus::wiki,
                                                  Corpus::book, Corpus::guideline};
inline constexpr Corpus kAllCorpora[] = {Corpus::research, Corpus::wiki, Corpus::book,
                                         Corpus::guideline, Corpus::graph};

std::string_view corpus_name(Corpus c);
std::optional<Corpus> corpus_from_name(std::string_view name);

enum class Modality { radiology, ophthalmology, pathology };
std::string_view modality_name(Modality m);
std::optional<Modality> modality_from_name(std::string_view name);

// ---------------------------------------------------------------------------
// Chunking

struct Chunk {
    std::string chunk_id;
    Corpus corpus = Corpus::research;
    std::string source_doc;
    std::size_t char_offset = 0;
    std::string text;
};

/// Splits `text` into fixed-stride windows of at most `max_len` characters
/// where consecutive windows share exactly `overlap` characters. The final
/// window absorbs the tail, so a window is emitted at offset p only while
/// p + max_len < len. chunk ids are "<doc_id>:<offset>".
std::vector<Chunk> chunk_document(Corpus corpus, std::string_view doc_id,
                                  std::string_view text, std::size_t max_len = 1000,
                                  std::size_t overlap = 200);

// ---------------------------------------------------------------------------
// Chunk store

class ChunkStore {
public:
    explicit ChunkStore(Corpus corpus) : corpus_(corpus) {}

    void append(Chunk chunk);
    void seal() { sealed_ = true; }
    bool sealed() const { return sealed_; }

    Corpus corpus() const { return corpus_; }
    std::size_t size() const { return chunks_.size(); }
    const std::vector<Chunk>& chunks() const { return chunks_; }
    const Chunk* find(std::string_view chunk_id) const;

    void save(const std::filesystem::path& path) const;
    static ChunkStore load(Corpus corpus, const std::filesystem::path& path);

private:
    Corpus corpus_;
    bool sealed_ = false;
    std::vector<Chunk> chunks_;
    std::unordered_map<std::string, std::size_t> by_id_;
};

// ---------------------------------------------------------------------------
// Graph store

struct GraphTerm {
    std::string term_id;
    std::string surface;
    std::string definition;
};

struct GraphRelation {
    std::string head;
    std::string relation_type;
    std::string tail;
};

struct GraphIngestStats {
    std::size_t terms = 0;
    std::size_t relations = 0;
    std::size_t rejected = 0;
};

class GraphStore {
public:
    /// Adds records to the store. Terms whose normalized surface (or id)
    /// collides with a stored term are rejected; relations with endpoints
    /// that do not resolve, or that duplicate a stored triple, are rejected.
    /// Rejections are counted and ingestion continues, which also makes
    /// re-ingesting the same records a no-op.
    GraphIngestStats ingest(const std::vector<GraphTerm>& terms,
                            const std::vector<GraphRelation>& relations);

    void seal() { sealed_ = true; }

    std::size_t term_count() const { return terms_.size(); }
    std::size_t relation_count() const { return relations_.size(); }
    const std::vector<GraphTerm>& terms() const { return terms_; }
    const std::vector<GraphRelation>& relations() const { return relations_; }

    /// Exact lookup on the normalized surface.
    const GraphTerm* find_term(std::string_view surface) const;
    const GraphTerm* find_term_by_id(std::string_view term_id) const;

    /// One-hop relations where the term appears as head or tail, in
    /// ingestion order.
    std::vector<GraphRelation> one_hop(std::string_view term_id) const;

    void save(const std::filesystem::path& terms_path,
              const std::filesystem::path& relations_path) const;
    static GraphStore load(const std::filesystem::path& terms_path,
                           const std::filesystem::path& relations_path);

private:
    bool sealed_ = false;
    std::vector<GraphTerm> terms_;
    std::vector<GraphRelation> relations_;
    std::unordered_map<std::string, std::size_t> by_surface_;  // normalized surface
    std::unordered_map<std::string, std::size_t> by_id_;
    std::unordered_map<std::string, std::vector<std::size_t>> adjacency_;
    std::unordered_map<std::string, bool> relation_seen_;
};

// ---------------------------------------------------------------------------
// Report store

struct ReportEntry {
    std::string report_id;
    Modality modality = Modality::radiology;
    std::string image_ref;
    std::string report_text;
    std::uint64_t phash = 0;
    std::optional<std::vector<double>> embedding;
};

struct DedupResult {
    std::vector<ReportEntry> kept;
    /// removed report_id -> kept report_id it collapsed into.
    std::map<std::string, std::string> duplicates;
};

/// Greedy first-seen dedup: an entry is dropped when its hash is within
/// `hamming_threshold` of an already kept entry, so any two kept entries
/// are strictly further apart than the threshold.
DedupResult dedup_reports(const std::vector<ReportEntry>& entries,
                          int hamming_threshold);

class ReportStore {
public:
    void append(ReportEntry entry);
    void seal() { sealed_ = true; }

    std::size_t size() const { return entries_.size(); }
    const std::vector<ReportEntry>& entries() const { return entries_; }
    const ReportEntry* find(std::string_view report_id) const;
    std::vector<const ReportEntry*> by_modality(Modality m) const;

    void save(const std::filesystem::path& path) const;
    static ReportStore load(const std::filesystem::path& path);

private:
    bool sealed_ = false;
    std::vector<ReportEntry> entries_;
    std::unordered_map<std::string, std::size_t> by_id_;
};

}  // namespace medrag
