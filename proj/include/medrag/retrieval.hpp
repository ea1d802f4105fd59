#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "medrag/gateway.hpp"

namespace medrag {

struct ScoredHit {
    std::string item_id;
    double score = 0.0;
    std::size_t rank = 0;  // 1-based
};

/// Immutable exact-search index over unit-normalized vectors.
class DenseIndex {
public:
    /// Normalizes every row; rejects zero vectors, duplicate ids, and
    /// dimension mismatches.
    static DenseIndex build(std::string model_id, std::size_t dims,
                            const std::vector<std::pair<std::string, EmbeddingVector>>& items);

    const std::string& model_id() const { return model_id_; }
    std::size_t dims() const { return dims_; }
    std::size_t size() const { return ids_.size(); }
    const std::vector<std::string>& ids() const { return ids_; }
    const double* row(std::size_t i) const { return data_.data() + i * dims_; }

    void save(const std::filesystem::path& path) const;
    static DenseIndex load(const std::filesystem::path& path);

private:
    DenseIndex() = default;
    std::string model_id_;
    std::size_t dims_ = 0;
    std::vector<std::string> ids_;
    std::vector<double> data_;  // row-major, unit rows
};

/// Exhaustive cosine search. Returns min(k, |index|) hits ordered by score
/// descending, ties broken by ascending item id.
std::vector<ScoredHit> knn_search(const DenseIndex& index, const EmbeddingVector& query,
                                  std::size_t k);

/// Scores candidate texts against `query` and keeps the top m by score
/// descending; ties keep the original retrieval order. Ranks are rewritten
/// 1..m and scores are the reranker scores.
using RerankFn =
    std::function<std::vector<double>(const std::string&, const std::vector<std::string>&)>;
std::vector<ScoredHit> rerank_topk(const std::string& query,
                                   const std::vector<ScoredHit>& hits,
                                   const std::vector<std::string>& texts, std::size_t m,
                                   const RerankFn& rerank);

/// Reciprocal rank fusion: score(d) = sum over lists of 1/(k0 + rank_d).
/// Output sorted by score descending, ties by ascending id.
std::vector<ScoredHit> rrf_fuse(const std::vector<std::vector<std::string>>& ranked_lists,
                                std::size_t k0 = 60);

/// Keeps the maximal prefix whose score stays within ratio tau of the top
/// score, truncated at k_max. A non-positive top score keeps only the top hit.
std::vector<ScoredHit> adaptive_select_reports(const std::vector<ScoredHit>& hits,
                                               double tau, std::size_t k_max);

}  // namespace medrag
