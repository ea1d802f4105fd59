#pragma once

#include <optional>
#include <string>
#include <vector>

namespace medrag {

/// Fraction of queries whose gold id appears among the top k of its ranked
/// list. Throws UndefinedMetricError on an empty query set.
double recall_at_k(const std::vector<std::vector<std::string>>& ranked,
                   const std::vector<std::string>& gold, std::size_t k);

/// First whitespace token that is a single letter optionally followed by
/// '.' or ')'.
std::optional<char> extract_option_letter(const std::string& text);

/// Mean closed-ended correctness: the extracted option letter must match the
/// gold letter case-insensitively.
double vqa_accuracy(const std::vector<std::string>& predictions,
                    const std::vector<std::string>& golds);

/// Sentence BLEU: geometric mean of modified n-gram precisions (n = 1..max_n)
/// times the brevity penalty. Zero match counts (and orders longer than the
/// candidate) contribute an epsilon numerator instead of zero. Tokens are
/// lowercased words with punctuation split into single-character tokens.
double bleu(const std::string& candidate, const std::vector<std::string>& references,
            std::size_t max_n = 4);

/// LCS F-measure (beta = 1) over the same tokenization.
double rouge_l(const std::string& candidate, const std::string& reference);

// ---------------------------------------------------------------------------
// Disalignment metrics

/// Per-sample correctness under the six evaluation contexts.
struct RunOutcome {
    bool original = false;          // (v, t, K)
    bool irrelevant = false;        // (v*, t, K)
    bool no_retrieval = false;      // (v, t, {})
    bool with_report_only = false;  // (v, t, {k_r})
    bool with_doc_only = false;     // (v, t, {k_d})
    bool with_both = false;         // (v, t, {k_r, k_d})
};

using RunMatrix = std::vector<RunOutcome>;

struct DisalignmentMetrics {
    std::optional<double> md;   // correct with irrelevant image / correct with original
    std::optional<double> kud;  // rescued by some retrieval source / fails bare
    std::optional<double> kid;  // broken by some retrieval source / succeeds bare
    std::size_t n_samples = 0;
};

/// Computes MD, KUD, and KID over a complete run matrix. Zero denominators
/// yield nullopt rather than zero.
DisalignmentMetrics disalignment_metrics(const RunMatrix& matrix);

}  // namespace medrag
