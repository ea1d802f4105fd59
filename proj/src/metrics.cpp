#include "medrag/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <sstream>

#include "medrag/errors.hpp"
#include "medrag/util.hpp"

namespace medrag {

double recall_at_k(const std::vector<std::vector<std::string>>& ranked,
                   const std::vector<std::string>& gold, std::size_t k) {
    if (k < 1) throw ParameterError("recall_at_k: k must be >= 1");
    if (ranked.size() != gold.size()) {
        throw ParameterError("recall_at_k: ranked/gold size mismatch");
    }
    if (ranked.empty()) throw UndefinedMetricError("recall_at_k: empty query set");

    std::size_t found = 0;
    for (std::size_t i = 0; i < ranked.size(); ++i) {
        const auto& list = ranked[i];
        const std::size_t limit = std::min(k, list.size());
        for (std::size_t r = 0; r < limit; ++r) {
            if (list[r] == gold[i]) {
                ++found;
                break;
            }
        }
    }
    return static_cast<double>(found) / static_cast<double>(ranked.size());
}

std::optional<char> extract_option_letter(const std::string& text) {
    std::istringstream in(text);
    std::string token;
    while (in >> token) {
        if (token.size() == 1 && std::isalpha(static_cast<unsigned char>(token[0]))) {
            return static_cast<char>(std::toupper(static_cast<unsigned char>(token[0])));
        }
        if (token.size() == 2 && std::isalpha(static_cast<unsigned char>(token[0])) &&
            (token[1] == '.' || token[1] == ')')) {
            return static_cast<char>(std::toupper(static_cast<unsigned char>(token[0])));
        }
    }
    return std::nullopt;
}

double vqa_accuracy(const std::vector<std::string>& predictions,
                    const std::vector<std::string>& golds) {
    if (predictions.size() != golds.size()) {
        throw ParameterError("vqa_accuracy: predictions/golds size mismatch");
    }
    if (predictions.empty()) throw UndefinedMetricError("vqa_accuracy: empty input");

    std::size_t correct = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const auto pred = extract_option_letter(predictions[i]);
        const auto gold = extract_option_letter(golds[i]);
        if (pred && gold && *pred == *gold) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(predictions.size());
}

// ---------------------------------------------------------------------------
// Text overlap metrics

namespace {

constexpr double kBleuEpsilon = 1e-9;

std::map<std::vector<std::string>, std::size_t> ngram_counts(
    const std::vector<std::string>& tokens, std::size_t n) {
    std::map<std::vector<std::string>, std::size_t> counts;
    if (tokens.size() < n) return counts;
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
        counts[std::vector<std::string>(tokens.begin() + i, tokens.begin() + i + n)] += 1;
    }
    return counts;
}

}  // namespace

double bleu(const std::string& candidate, const std::vector<std::string>& references,
            std::size_t max_n) {
    if (references.empty()) throw ParameterError("bleu: reference list is empty");
    if (max_n < 1) throw ParameterError("bleu: max_n must be >= 1");

    const auto cand = metric_tokens(candidate);
    if (cand.empty()) return 0.0;

    std::vector<std::vector<std::string>> refs;
    refs.reserve(references.size());
    for (const auto& r : references) refs.push_back(metric_tokens(r));

    double log_sum = 0.0;
    for (std::size_t n = 1; n <= max_n; ++n) {
        const auto cand_counts = ngram_counts(cand, n);
        std::map<std::vector<std::string>, std::size_t> ref_max;
        for (const auto& ref : refs) {
            for (const auto& [gram, count] : ngram_counts(ref, n)) {
                ref_max[gram] = std::max(ref_max[gram], count);
            }
        }
        double matches = 0.0;
        double possible = cand.size() >= n ? static_cast<double>(cand.size() - n + 1) : 0.0;
        for (const auto& [gram, count] : cand_counts) {
            auto it = ref_max.find(gram);
            const std::size_t best = it == ref_max.end() ? 0 : it->second;
            matches += static_cast<double>(std::min(count, best));
        }
        // add-epsilon smoothing: zero numerators (or empty orders) never
        // zero out the whole geometric mean
        const double p = matches > 0.0 ? matches / possible
                                       : kBleuEpsilon / std::max(possible, 1.0);
        log_sum += std::log(p);
    }
    const double geo_mean = std::exp(log_sum / static_cast<double>(max_n));

    // brevity penalty against the reference length closest to the candidate,
    // ties to the shorter reference
    const auto c = static_cast<double>(cand.size());
    double r = static_cast<double>(refs.front().size());
    for (const auto& ref : refs) {
        const auto len = static_cast<double>(ref.size());
        if (std::abs(len - c) < std::abs(r - c) ||
            (std::abs(len - c) == std::abs(r - c) && len < r)) {
            r = len;
        }
    }
    const double bp = c >= r ? 1.0 : std::exp(1.0 - r / c);
    return geo_mean * bp;
}

double rouge_l(const std::string& candidate, const std::string& reference) {
    const auto cand = metric_tokens(candidate);
    const auto ref = metric_tokens(reference);
    if (cand.empty() || ref.empty()) return 0.0;

    // textbook LCS table
    std::vector<std::vector<std::size_t>> lcs(cand.size() + 1,
                                              std::vector<std::size_t>(ref.size() + 1, 0));
    for (std::size_t i = 1; i <= cand.size(); ++i) {
        for (std::size_t j = 1; j <= ref.size(); ++j) {
            if (cand[i - 1] == ref[j - 1]) {
                lcs[i][j] = lcs[i - 1][j - 1] + 1;
            } else {
                lcs[i][j] = std::max(lcs[i - 1][j], lcs[i][j - 1]);
            }
        }
    }
    const double match = static_cast<double>(lcs[cand.size()][ref.size()]);
    if (match == 0.0) return 0.0;
    const double precision = match / static_cast<double>(cand.size());
    const double recall = match / static_cast<double>(ref.size());
    return 2.0 * precision * recall / (precision + recall);
}

// ---------------------------------------------------------------------------

DisalignmentMetrics disalignment_metrics(const RunMatrix& matrix) {
    if (matrix.empty()) throw InputError("disalignment_metrics: empty run matrix");

    std::size_t correct_original = 0, md_numerator = 0;
    std::size_t fails_bare = 0, kud_numerator = 0;
    std::size_t succeeds_bare = 0, kid_numerator = 0;

    for (const auto& row : matrix) {
        const bool any_success = row.with_report_only || row.with_doc_only || row.with_both;
        const bool any_failure = !row.with_report_only || !row.with_doc_only || !row.with_both;
        if (row.original) {
            ++correct_original;
            if (row.irrelevant) ++md_numerator;
        }
        if (!row.no_retrieval) {
            ++fails_bare;
            if (any_success) ++kud_numerator;
        } else {
            ++succeeds_bare;
            if (any_failure) ++kid_numerator;
        }
    }

    DisalignmentMetrics out;
    out.n_samples = matrix.size();
    if (correct_original > 0) {
        out.md = static_cast<double>(md_numerator) / static_cast<double>(correct_original);
    }
    if (fails_bare > 0) {
        out.kud = static_cast<double>(kud_numerator) / static_cast<double>(fails_bare);
    }
    if (succeeds_bare > 0) {
        out.kid = static_cast<double>(kid_numerator) / static_cast<double>(succeeds_bare);
    }
    return out;
}

}  // namespace medrag
