#include "medrag/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <unordered_map>
#include <unordered_set>

#include "medrag/errors.hpp"

namespace medrag {

namespace {
constexpr std::uint32_t kIndexMagic = 0x4d444958;  // "MDIX"
constexpr std::uint32_t kIndexVersion = 1;
constexpr double kNormTolerance = 1e-6;

void sort_hits(std::vector<ScoredHit>& hits) {
    std::sort(hits.begin(), hits.end(), [](const ScoredHit& a, const ScoredHit& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.item_id < b.item_id;
    });
    for (std::size_t i = 0; i < hits.size(); ++i) hits[i].rank = i + 1;
}
}  // namespace

DenseIndex DenseIndex::build(std::string model_id, std::size_t dims,
                             const std::vector<std::pair<std::string, EmbeddingVector>>& items) {
    if (dims == 0) throw ParameterError("DenseIndex: dims must be >= 1");
    DenseIndex index;
    index.model_id_ = std::move(model_id);
    index.dims_ = dims;
    index.ids_.reserve(items.size());
    index.data_.reserve(items.size() * dims);

    std::unordered_set<std::string> seen;
    for (const auto& [id, vec] : items) {
        if (vec.size() != dims) {
            throw InputError("DenseIndex: vector for '" + id + "' has " +
                             std::to_string(vec.size()) + " dims, expected " +
                             std::to_string(dims));
        }
        if (!seen.insert(id).second) throw InputError("DenseIndex: duplicate id '" + id + "'");
        double norm = 0.0;
        for (double x : vec) {
            if (!std::isfinite(x)) throw InputError("DenseIndex: non-finite component");
            norm += x * x;
        }
        norm = std::sqrt(norm);
        if (norm == 0.0) throw InputError("DenseIndex: zero vector for '" + id + "'");
        index.ids_.push_back(id);
        for (double x : vec) index.data_.push_back(x / norm);
    }
    return index;
}

namespace {
template <typename T>
void write_pod(std::ostream& out, const T& value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
    T value{};
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in) throw InputError("dense index: truncated file");
    return value;
}

void write_string(std::ostream& out, const std::string& s) {
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in) {
    const auto len = read_pod<std::uint32_t>(in);
    std::string s(len, '\0');
    in.read(s.data(), len);
    if (!in) throw InputError("dense index: truncated string");
    return s;
}
}  // namespace

void DenseIndex::save(const std::filesystem::path& path) const {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write index: " + path.string());
    write_pod(out, kIndexMagic);
    write_pod(out, kIndexVersion);
    write_string(out, model_id_);
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(dims_));
    write_pod<std::uint64_t>(out, ids_.size());
    for (const auto& id : ids_) write_string(out, id);
    out.write(reinterpret_cast<const char*>(data_.data()),
              static_cast<std::streamsize>(data_.size() * sizeof(double)));
}

DenseIndex DenseIndex::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot read index: " + path.string());
    if (read_pod<std::uint32_t>(in) != kIndexMagic) {
        throw InputError("dense index: bad magic in " + path.string());
    }
    if (read_pod<std::uint32_t>(in) != kIndexVersion) {
        throw InputError("dense index: unsupported version in " + path.string());
    }
    DenseIndex index;
    index.model_id_ = read_string(in);
    index.dims_ = read_pod<std::uint32_t>(in);
    if (index.dims_ == 0) throw InputError("dense index: zero dims");
    const auto count = read_pod<std::uint64_t>(in);
    index.ids_.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) index.ids_.push_back(read_string(in));
    index.data_.resize(count * index.dims_);
    in.read(reinterpret_cast<char*>(index.data_.data()),
            static_cast<std::streamsize>(index.data_.size() * sizeof(double)));
    if (!in) throw InputError("dense index: truncated vectors");

    for (std::uint64_t i = 0; i < count; ++i) {
        double norm = 0.0;
        const double* row = index.row(i);
        for (std::size_t d = 0; d < index.dims_; ++d) norm += row[d] * row[d];
        if (std::abs(std::sqrt(norm) - 1.0) > kNormTolerance) {
            throw InputError("dense index: row " + std::to_string(i) + " is not unit-norm");
        }
    }
    return index;
}

std::vector<ScoredHit> knn_search(const DenseIndex& index, const EmbeddingVector& query,
                                  std::size_t k) {
    if (k < 1) throw ParameterError("knn_search: k must be >= 1");
    if (query.size() != index.dims()) {
        throw InputError("knn_search: query has " + std::to_string(query.size()) +
                         " dims, index has " + std::to_string(index.dims()));
    }
    double norm = 0.0;
    for (double x : query) {
        if (!std::isfinite(x)) throw InputError("knn_search: non-finite query component");
        norm += x * x;
    }
    norm = std::sqrt(norm);
    if (norm == 0.0) throw InputError("knn_search: zero-norm query");

    std::vector<ScoredHit> hits;
    hits.reserve(index.size());
    for (std::size_t i = 0; i < index.size(); ++i) {
        const double* row = index.row(i);
        double dot = 0.0;
        for (std::size_t d = 0; d < index.dims(); ++d) dot += row[d] * query[d];
        hits.push_back(ScoredHit{index.ids()[i], dot / norm, 0});
    }
    sort_hits(hits);
    if (hits.size() > k) hits.resize(k);
    return hits;
}

std::vector<ScoredHit> rerank_topk(const std::string& query,
                                   const std::vector<ScoredHit>& hits,
                                   const std::vector<std::string>& texts, std::size_t m,
                                   const RerankFn& rerank) {
    if (hits.size() != texts.size()) {
        throw ParameterError("rerank_topk: hits/texts size mismatch");
    }
    if (m > hits.size()) throw ParameterError("rerank_topk: m exceeds hit count");
    if (m == 0) return {};

    const auto scores = rerank(query, texts);
    if (scores.size() != texts.size()) {
        throw ProtocolError("rerank_topk: reranker returned wrong score count");
    }
    std::vector<std::size_t> order(hits.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    // stable: equal scores keep the original retrieval order
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    std::vector<ScoredHit> out;
    out.reserve(m);
    for (std::size_t i = 0; i < m; ++i) {
        out.push_back(ScoredHit{hits[order[i]].item_id, scores[order[i]], i + 1});
    }
    return out;
}

std::vector<ScoredHit> rrf_fuse(const std::vector<std::vector<std::string>>& ranked_lists,
                                std::size_t k0) {
    std::unordered_map<std::string, double> accum;
    for (const auto& list : ranked_lists) {
        std::unordered_set<std::string> seen;
        for (std::size_t r = 0; r < list.size(); ++r) {
            if (!seen.insert(list[r]).second) {
                throw ParameterError("rrf_fuse: duplicate id '" + list[r] + "' in one list");
            }
            accum[list[r]] += 1.0 / static_cast<double>(k0 + r + 1);
        }
    }
    std::vector<ScoredHit> out;
    out.reserve(accum.size());
    for (const auto& [id, score] : accum) out.push_back(ScoredHit{id, score, 0});
    sort_hits(out);
    return out;
}

std::vector<ScoredHit> adaptive_select_reports(const std::vector<ScoredHit>& hits,
                                               double tau, std::size_t k_max) {
    if (!(tau > 0.0 && tau <= 1.0)) {
        throw ParameterError("adaptive_select_reports: tau must be in (0, 1]");
    }
    std::vector<ScoredHit> out;
    if (hits.empty() || k_max == 0) return out;

    const double top = hits.front().score;
    out.push_back(hits.front());
    out.back().rank = 1;
    if (top <= 0.0) return out;

    for (std::size_t i = 1; i < hits.size() && out.size() < k_max; ++i) {
        if (hits[i].score / top < tau) break;
        out.push_back(hits[i]);
        out.back().rank = out.size();
    }
    return out;
}

}  // namespace medrag
