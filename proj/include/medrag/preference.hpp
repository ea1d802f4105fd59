#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "medrag/metrics.hpp"
#include "medrag/query.hpp"

namespace medrag {

enum class TaskKind { closed, open };
std::string_view task_kind_name(TaskKind k);
std::optional<TaskKind> task_kind_from_name(std::string_view name);

/// Text metrics that can enter the open-ended correctness average.
enum class TextMetric { bleu, rouge_l };
std::optional<TextMetric> text_metric_from_name(std::string_view name);

struct KnowledgeBundle {
    std::vector<std::string> reports;    // k_r
    std::vector<std::string> documents;  // k_d

    bool empty() const { return reports.empty() && documents.empty(); }
};

struct TrainingSample {
    std::string sample_id;
    std::string image_ref;   // v
    std::string question;    // t
    std::string gold;        // y
    std::string modality;
    TaskKind task_kind = TaskKind::closed;
    KnowledgeBundle bundle;  // K
};

/// Which part of K a knowledge-ablation context removes.
enum class KnowledgeSubset { report, document, both };
std::string_view knowledge_subset_name(KnowledgeSubset s);

/// The five answer contexts populated per sample.
enum class AnswerContext { full, irrelevant_image, no_report, no_document, no_retrieval };
inline constexpr AnswerContext kAnswerContexts[] = {
    AnswerContext::full, AnswerContext::irrelevant_image, AnswerContext::no_report,
    AnswerContext::no_document, AnswerContext::no_retrieval};
std::string_view answer_context_name(AnswerContext c);

enum class PairCategory { cma, ku, kr };
std::string_view pair_category_name(PairCategory c);

struct PreferencePair {
    std::string sample_id;
    PairCategory category = PairCategory::cma;
    std::optional<KnowledgeSubset> subset;  // absent for CMA
    std::string image_ref_w;
    std::string image_ref_l;
    std::string question;
    std::string bundle_w_ref;
    std::string bundle_l_ref;
    std::string chosen_text;    // y_w, always the gold answer
    std::string rejected_text;  // y_l
};

struct SampleOutcome {
    std::string sample_id;
    std::string irrelevant_image;
    std::array<std::string, 5> answers;  // indexed by AnswerContext order
    std::array<bool, 5> correct{};
};

struct PreferenceBuildConfig {
    double alpha_r = 0.5;
    std::vector<TextMetric> metrics{TextMetric::bleu, TextMetric::rouge_l};
    std::size_t workers = 4;
};

struct SkippedSampleReason {
    std::string sample_id;
    std::string reason;
};

struct PreferenceBuildResult {
    std::vector<PreferencePair> cross_modality;  // CMA pairs (D_cm)
    std::vector<PreferencePair> multi_source;    // KU/KR pairs (D_mk)
    std::vector<SampleOutcome> outcomes;
    std::vector<SkippedSampleReason> skipped;
    std::size_t cma_identical_texts = 0;  // CMA pairs whose y_l equals y_w verbatim
};

// ---------------------------------------------------------------------------
// Operations

/// Correctness predicate. Closed: the first standalone option letter must
/// match the gold letter case-insensitively (no letter means incorrect).
/// Open: the mean of the configured text metrics against the gold answer
/// must exceed alpha_r.
bool is_correct(const std::string& answer, const std::string& gold, TaskKind task_kind,
                double alpha_r, const std::vector<TextMetric>& metrics);

/// argmin over the pool of cosine similarity to the sample's image embedding;
/// ties break to the ascending sample id. The pool must exclude the sample
/// itself and be non-empty.
struct PoolImage {
    std::string sample_id;
    std::string image_ref;
};
PoolImage select_irrelevant_image(const std::string& image_ref,
                                  const std::vector<PoolImage>& pool,
                                  ModelClient& image_embedder);

/// Constructs the cross-modality and multi-source preference datasets by
/// probing the answerer under the five contexts of every sample (exactly
/// five generate calls each, all cacheable) and folding the outcome matrix
/// through the category conditions. A failure under any context skips the
/// whole sample. Output is sorted by (sample_id, category, subset).
PreferenceBuildResult build_preference_pairs(const std::vector<TrainingSample>& samples,
                                             ModelClient& answerer,
                                             ModelClient& image_embedder,
                                             const PreferenceBuildConfig& config);

/// -log sigma(beta * ((logp_w_policy - logp_w_ref) - (logp_l_policy - logp_l_ref))).
double dpo_loss(double logp_w_policy, double logp_w_ref, double logp_l_policy,
                double logp_l_ref, double beta);

/// The prompt used for one answer context; exposed so callers can script
/// deterministic answerers.
std::string preference_context_prompt(const TrainingSample& sample, AnswerContext context);

/// Serialization rows for the emitted pair files.
json preference_pair_row(const PreferencePair& pair);
json sample_outcome_row(const SampleOutcome& outcome);

}  // namespace medrag
