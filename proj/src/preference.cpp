#include "medrag/preference.hpp"

#include <algorithm>
#include <cmath>

#include "medrag/errors.hpp"

namespace medrag {

std::string_view task_kind_name(TaskKind k) {
    return k == TaskKind::closed ? "closed" : "open";
}

std::optional<TaskKind> task_kind_from_name(std::string_view name) {
    if (name == "closed") return TaskKind::closed;
    if (name == "open") return TaskKind::open;
    return std::nullopt;
}

std::optional<TextMetric> text_metric_from_name(std::string_view name) {
    if (name == "bleu") return TextMetric::bleu;
    if (name == "rouge_l") return TextMetric::rouge_l;
    return std::nullopt;
}

std::string_view knowledge_subset_name(KnowledgeSubset s) {
    switch (s) {
        case KnowledgeSubset::report: return "report";
        case KnowledgeSubset::document: return "document";
        case KnowledgeSubset::both: return "both";
    }
    return "unknown";
}

std::string_view answer_context_name(AnswerContext c) {
    switch (c) {
        case AnswerContext::full: return "full";
        case AnswerContext::irrelevant_image: return "irrelevant_image";
        case AnswerContext::no_report: return "no_report";
        case AnswerContext::no_document: return "no_document";
        case AnswerContext::no_retrieval: return "no_retrieval";
    }
    return "unknown";
}

std::string_view pair_category_name(PairCategory c) {
    switch (c) {
        case PairCategory::cma: return "CMA";
        case PairCategory::ku: return "KU";
        case PairCategory::kr: return "KR";
    }
    return "unknown";
}

// ---------------------------------------------------------------------------

bool is_correct(const std::string& answer, const std::string& gold, TaskKind task_kind,
                double alpha_r, const std::vector<TextMetric>& metrics) {
    if (task_kind == TaskKind::closed) {
        const auto pred = extract_option_letter(answer);
        const auto want = extract_option_letter(gold);
        return pred.has_value() && want.has_value() && *pred == *want;
    }
    if (metrics.empty()) {
        throw ParameterError("is_correct: open-ended tasks need at least one metric");
    }
    double sum = 0.0;
    for (TextMetric metric : metrics) {
        switch (metric) {
            case TextMetric::bleu: sum += bleu(answer, {gold}); break;
            case TextMetric::rouge_l: sum += rouge_l(answer, gold); break;
        }
    }
    return sum / static_cast<double>(metrics.size()) > alpha_r;
}

PoolImage select_irrelevant_image(const std::string& image_ref,
                                  const std::vector<PoolImage>& pool,
                                  ModelClient& image_embedder) {
    if (pool.empty()) throw InputError("select_irrelevant_image: empty pool");

    const auto anchor = image_embedder.embed_image(image_ref);
    auto cosine = [](const EmbeddingVector& a, const EmbeddingVector& b) {
        double dot = 0.0, na = 0.0, nb = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            dot += a[i] * b[i];
            na += a[i] * a[i];
            nb += b[i] * b[i];
        }
        const double denom = std::sqrt(na) * std::sqrt(nb);
        return denom == 0.0 ? 0.0 : dot / denom;
    };

    const PoolImage* best = nullptr;
    double best_score = 0.0;
    for (const auto& candidate : pool) {
        const auto vec = image_embedder.embed_image(candidate.image_ref);
        if (vec.size() != anchor.size()) {
            throw InputError("select_irrelevant_image: embedding dims differ");
        }
        const double score = cosine(anchor, vec);
        if (best == nullptr || score < best_score ||
            (score == best_score && candidate.sample_id < best->sample_id)) {
            best = &candidate;
            best_score = score;
        }
    }
    return *best;
}

// ---------------------------------------------------------------------------

namespace {

KnowledgeBundle bundle_for_context(const KnowledgeBundle& full, AnswerContext context) {
    KnowledgeBundle b;
    switch (context) {
        case AnswerContext::full:
        case AnswerContext::irrelevant_image:
            b = full;
            break;
        case AnswerContext::no_report:
            b.documents = full.documents;
            break;
        case AnswerContext::no_document:
            b.reports = full.reports;
            break;
        case AnswerContext::no_retrieval:
            break;
    }
    return b;
}

std::string bundle_ref(const std::string& sample_id, AnswerContext context) {
    switch (context) {
        case AnswerContext::full:
        case AnswerContext::irrelevant_image:
            return sample_id + "/full";
        case AnswerContext::no_report: return sample_id + "/no_report";
        case AnswerContext::no_document: return sample_id + "/no_document";
        case AnswerContext::no_retrieval: return sample_id + "/empty";
    }
    return sample_id;
}

PromptTask prompt_task_for(const TrainingSample& sample) {
    if (sample.task_kind == TaskKind::closed) return PromptTask::vqa;
    return sample.modality == "ophthalmology" ? PromptTask::report_oph
                                              : PromptTask::report_rad;
}

AnswerContext ablation_context(KnowledgeSubset subset) {
    switch (subset) {
        case KnowledgeSubset::report: return AnswerContext::no_report;
        case KnowledgeSubset::document: return AnswerContext::no_document;
        case KnowledgeSubset::both: return AnswerContext::no_retrieval;
    }
    return AnswerContext::no_retrieval;
}

int subset_order(const std::optional<KnowledgeSubset>& s) {
    return s ? static_cast<int>(*s) : -1;
}

}  // namespace

std::string preference_context_prompt(const TrainingSample& sample, AnswerContext context) {
    const auto bundle = bundle_for_context(sample.bundle, context);
    ReportBundle k_r;
    for (const auto& text : bundle.reports) k_r.reports.push_back({"", text, 0.0});
    DocumentBundle k_d;
    for (const auto& text : bundle.documents) {
        k_d.documents.push_back(BundleDocument{"", Corpus::research, text, 0.0});
    }
    return render_context_prompt(sample.question, k_r, k_d, prompt_task_for(sample));
}

PreferenceBuildResult build_preference_pairs(const std::vector<TrainingSample>& samples,
                                             ModelClient& answerer,
                                             ModelClient& image_embedder,
                                             const PreferenceBuildConfig& config) {
    PreferenceBuildResult result;
    std::vector<std::optional<SampleOutcome>> outcomes(samples.size());
    std::vector<std::optional<SkippedSampleReason>> skipped(samples.size());

    parallel_for(samples.size(), config.workers, [&](std::size_t s) {
        const auto& sample = samples[s];
        try {
            std::vector<PoolImage> pool;
            for (const auto& other : samples) {
                if (other.sample_id != sample.sample_id &&
                    other.modality == sample.modality) {
                    pool.push_back(PoolImage{other.sample_id, other.image_ref});
                }
            }
            if (pool.empty()) {
                throw InputError("no same-modality candidates for the irrelevant image");
            }
            const auto irrelevant = select_irrelevant_image(sample.image_ref, pool,
                                                            image_embedder);

            SampleOutcome outcome;
            outcome.sample_id = sample.sample_id;
            outcome.irrelevant_image = irrelevant.image_ref;
            for (AnswerContext context : kAnswerContexts) {
                GenerationRequest request;
                request.prompt_text = preference_context_prompt(sample, context);
                const std::string& image =
                    context == AnswerContext::irrelevant_image ? irrelevant.image_ref
                                                               : sample.image_ref;
                if (!image.empty()) request.image_refs.push_back(image);
                const auto idx = static_cast<std::size_t>(context);
                outcome.answers[idx] = answerer.generate(request);
                outcome.correct[idx] = is_correct(outcome.answers[idx], sample.gold,
                                                  sample.task_kind, config.alpha_r,
                                                  config.metrics);
            }
            outcomes[s] = std::move(outcome);
        } catch (const Error& e) {
            // partial matrices never emit pairs
            skipped[s] = SkippedSampleReason{sample.sample_id, e.what()};
        }
    });

    // deterministic sequential fold over the completed matrix
    for (std::size_t s = 0; s < samples.size(); ++s) {
        if (skipped[s]) {
            result.skipped.push_back(*skipped[s]);
            continue;
        }
        if (!outcomes[s]) continue;
        const auto& sample = samples[s];
        const auto& outcome = *outcomes[s];
        result.outcomes.push_back(outcome);

        auto correct = [&](AnswerContext c) {
            return outcome.correct[static_cast<std::size_t>(c)];
        };
        auto answer = [&](AnswerContext c) -> const std::string& {
            return outcome.answers[static_cast<std::size_t>(c)];
        };

        if (correct(AnswerContext::full) && correct(AnswerContext::irrelevant_image)) {
            PreferencePair pair;
            pair.sample_id = sample.sample_id;
            pair.category = PairCategory::cma;
            pair.image_ref_w = sample.image_ref;
            pair.image_ref_l = outcome.irrelevant_image;
            pair.question = sample.question;
            pair.bundle_w_ref = bundle_ref(sample.sample_id, AnswerContext::full);
            pair.bundle_l_ref = bundle_ref(sample.sample_id, AnswerContext::full);
            pair.chosen_text = sample.gold;
            pair.rejected_text = answer(AnswerContext::irrelevant_image);
            if (pair.rejected_text == pair.chosen_text) ++result.cma_identical_texts;
            result.cross_modality.push_back(std::move(pair));
        }

        for (KnowledgeSubset subset : {KnowledgeSubset::report, KnowledgeSubset::document,
                                       KnowledgeSubset::both}) {
            const AnswerContext without = ablation_context(subset);
            PreferencePair pair;
            pair.sample_id = sample.sample_id;
            pair.subset = subset;
            pair.image_ref_w = sample.image_ref;
            pair.image_ref_l = sample.image_ref;
            pair.question = sample.question;
            pair.bundle_w_ref = bundle_ref(sample.sample_id, AnswerContext::full);
            pair.bundle_l_ref = bundle_ref(sample.sample_id, AnswerContext::full);
            pair.chosen_text = sample.gold;

            if (correct(AnswerContext::full) && !correct(without)) {
                pair.category = PairCategory::ku;
                pair.rejected_text = answer(without);
                result.multi_source.push_back(pair);
            } else if (correct(without) && !correct(AnswerContext::full)) {
                pair.category = PairCategory::kr;
                pair.rejected_text = answer(AnswerContext::full);
                result.multi_source.push_back(pair);
            }
        }
    }

    auto pair_less = [](const PreferencePair& a, const PreferencePair& b) {
        if (a.sample_id != b.sample_id) return a.sample_id < b.sample_id;
        if (a.category != b.category) {
            return static_cast<int>(a.category) < static_cast<int>(b.category);
        }
        return subset_order(a.subset) < subset_order(b.subset);
    };
    std::stable_sort(result.cross_modality.begin(), result.cross_modality.end(), pair_less);
    std::stable_sort(result.multi_source.begin(), result.multi_source.end(), pair_less);
    std::sort(result.outcomes.begin(), result.outcomes.end(),
              [](const SampleOutcome& a, const SampleOutcome& b) {
                  return a.sample_id < b.sample_id;
              });
    return result;
}

double dpo_loss(double logp_w_policy, double logp_w_ref, double logp_l_policy,
                double logp_l_ref, double beta) {
    for (double x : {logp_w_policy, logp_w_ref, logp_l_policy, logp_l_ref, beta}) {
        if (!std::isfinite(x)) throw InputError("dpo_loss: non-finite input");
    }
    if (beta <= 0.0) throw ParameterError("dpo_loss: beta must be > 0");
    const double margin = (logp_w_policy - logp_w_ref) - (logp_l_policy - logp_l_ref);
    const double z = beta * margin;
    // -log sigma(z) == softplus(-z), computed without overflow
    const double x = -z;
    return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

json preference_pair_row(const PreferencePair& pair) {
    return json{{"sample_id", pair.sample_id},
                {"category", pair_category_name(pair.category)},
                {"image_ref_w", pair.image_ref_w},
                {"image_ref_l", pair.image_ref_l},
                {"question", pair.question},
                {"bundle_w_ref", pair.bundle_w_ref},
                {"bundle_l_ref", pair.bundle_l_ref},
                {"chosen_text", pair.chosen_text},
                {"rejected_text", pair.rejected_text},
                {"subset", pair.subset ? std::string(knowledge_subset_name(*pair.subset))
                                       : std::string("-")}};
}

json sample_outcome_row(const SampleOutcome& outcome) {
    return json{
        {"sample_id", outcome.sample_id},
        {"irrelevant_image", outcome.irrelevant_image},
        {"correct_full", outcome.correct[0]},
        {"correct_irrelevant", outcome.correct[1]},
        {"correct_no_report", outcome.correct[2]},
        {"correct_no_document", outcome.correct[3]},
        {"correct_no_retrieval", outcome.correct[4]}};
}

}  // namespace medrag
