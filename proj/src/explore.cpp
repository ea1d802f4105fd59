#include "medrag/explore.hpp"

#include <algorithm>

#include "medrag/errors.hpp"

namespace medrag {

std::string_view disposition_name(QueryDisposition d) {
    switch (d) {
        case QueryDisposition::positive_selected: return "positive_selected";
        case QueryDisposition::positive_excess: return "positive_excess";
        case QueryDisposition::negative_selected: return "negative_selected";
        case QueryDisposition::negative_excess: return "negative_excess";
        case QueryDisposition::excluded_unparsed_judge: return "excluded_unparsed_judge";
        case QueryDisposition::excluded_retrieval_error: return "excluded_retrieval_error";
    }
    return "unknown";
}

ExploreResult explore_queries(const ExploreSample& sample, ModelClient& expert,
                              std::size_t queries_per_corpus) {
    ExploreResult result;
    GenerationRequest request;
    request.prompt_text = render_exploration_prompt(sample.question);
    if (!sample.image_ref.empty()) request.image_refs.push_back(sample.image_ref);

    std::string raw;
    try {
        raw = expert.generate(request);
    } catch (const Error& e) {
        result.skipped = true;
        result.skip_reason = e.what();
        return result;
    }

    ParseLimits limits;
    limits.max_per_corpus = queries_per_corpus;
    auto parsed = parse_query_output(raw, ParseMode::exploration, limits);
    result.entries = std::move(parsed.set.entries);
    result.diagnostics = std::move(parsed.diagnostics);
    return result;
}

JudgeVerdict parse_judge_response(const std::string& response) {
    JudgeVerdict verdict;
    verdict.raw_response = response;

    const std::string lowered = to_lower(response);
    constexpr std::string_view kOpen = "<answer>";
    constexpr std::string_view kClose = "</answer>";

    // last complete tag wins; chain-of-thought may emit speculative ones first
    std::size_t pos = 0;
    std::optional<std::string> content;
    while (true) {
        const auto open = lowered.find(kOpen, pos);
        if (open == std::string::npos) break;
        const auto close = lowered.find(kClose, open + kOpen.size());
        if (close == std::string::npos) break;
        content = response.substr(open + kOpen.size(), close - open - kOpen.size());
        pos = open + kOpen.size();
    }
    if (!content) return verdict;

    const std::string value = to_lower(trim(*content));
    if (value == "yes") {
        verdict.supports = true;
        verdict.parse_ok = true;
    } else if (value == "no") {
        verdict.supports = false;
        verdict.parse_ok = true;
    }
    return verdict;
}

JudgeVerdict judge_support(const ExploreSample& sample,
                           const std::vector<std::string>& docs, ModelClient& judge) {
    if (docs.empty()) {
        throw ParameterError("judge_support: empty docs are labeled negative upstream");
    }
    std::string documents;
    for (const auto& doc : docs) {
        if (!documents.empty()) documents += '\n';
        documents += doc;
    }
    GenerationRequest request;
    request.prompt_text = render_judge_prompt(sample.question, sample.gold, documents);
    if (!sample.image_ref.empty()) request.image_refs.push_back(sample.image_ref);
    return parse_judge_response(judge.generate(request));
}

// ---------------------------------------------------------------------------

MqgTrainingData build_mqg_training(const std::vector<ExplorationRecord>& records,
                                   std::size_t n_q) {
    if (n_q < 1) throw ParameterError("build_mqg_training: n_q must be >= 1");
    MqgTrainingData out;

    // group by sample, preserving first-appearance order
    std::vector<std::string> sample_order;
    std::map<std::string, std::vector<const ExplorationRecord*>> by_sample;
    for (const auto& rec : records) {
        auto [it, inserted] = by_sample.try_emplace(rec.sample_id);
        if (inserted) sample_order.push_back(rec.sample_id);
        it->second.push_back(&rec);
    }

    for (const auto& sample_id : sample_order) {
        const auto& recs = by_sample[sample_id];
        QuerySet positives, negatives;
        std::map<Corpus, std::size_t> pos_used, neg_used;

        for (const ExplorationRecord* rec : recs) {
            QueryOutcome outcome{rec->sample_id, rec->corpus, rec->j,
                                 QueryDisposition::excluded_unparsed_judge};
            if (rec->retrieval_failed) {
                outcome.disposition = QueryDisposition::excluded_retrieval_error;
                ++out.stats.retrieval_errors;
            } else if (!rec->verdict.parse_ok) {
                outcome.disposition = QueryDisposition::excluded_unparsed_judge;
                ++out.stats.unparsed_judgements;
            } else if (rec->verdict.supports) {
                ++out.stats.per_corpus[std::string(corpus_name(rec->corpus))].positive;
                auto& used = pos_used[rec->corpus];
                if (used < n_q) {
                    ++used;
                    positives.entries.push_back(
                        QueryEntry{rec->corpus, static_cast<int>(used), rec->query});
                    outcome.disposition = QueryDisposition::positive_selected;
                } else {
                    outcome.disposition = QueryDisposition::positive_excess;
                }
            } else {
                ++out.stats.per_corpus[std::string(corpus_name(rec->corpus))].negative;
                auto& used = neg_used[rec->corpus];
                if (used < n_q) {
                    ++used;
                    negatives.entries.push_back(
                        QueryEntry{rec->corpus, static_cast<int>(used), rec->query});
                    outcome.disposition = QueryDisposition::negative_selected;
                } else {
                    outcome.disposition = QueryDisposition::negative_excess;
                }
            }
            out.outcomes.push_back(std::move(outcome));
        }

        const std::string image_ref = recs.empty() ? "" : recs.front()->image_ref;
        const std::string question = recs.empty() ? "" : recs.front()->question;
        if (!positives.entries.empty()) {
            out.sft.push_back(
                SftExample{image_ref, question, serialize_query_set(positives)});
            ++out.stats.sft_examples;
        } else {
            ++out.stats.samples_without_positive;
        }
        if (!positives.entries.empty() && !negatives.entries.empty()) {
            out.dpo.push_back(DpoExample{image_ref, question,
                                         serialize_query_set(positives),
                                         serialize_query_set(negatives)});
            ++out.stats.dpo_examples;
        } else {
            ++out.stats.samples_without_pair;
        }
    }
    return out;
}

JudgeQuality judge_quality(const std::vector<bool>& verdicts,
                           const std::vector<bool>& gold_labels) {
    if (verdicts.size() != gold_labels.size()) {
        throw ParameterError("judge_quality: verdicts/gold size mismatch");
    }
    if (verdicts.empty()) throw UndefinedMetricError("judge_quality: empty input");

    std::size_t tp = 0, tn = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < verdicts.size(); ++i) {
        if (verdicts[i] && gold_labels[i]) ++tp;
        else if (verdicts[i] && !gold_labels[i]) ++fp;
        else if (!verdicts[i] && gold_labels[i]) ++fn;
        else ++tn;
    }
    JudgeQuality q;
    q.accuracy = static_cast<double>(tp + tn) / static_cast<double>(verdicts.size());
    const std::size_t denom = 2 * tp + fp + fn;
    q.f1 = denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
    return q;
}

// ---------------------------------------------------------------------------

namespace {

/// Retrieval for one exploration query; returns rendered document strings.
std::vector<std::string> retrieve_for_query(const QueryEntry& entry,
                                            const QueryExecutionContext& ctx) {
    std::vector<std::string> docs;
    if (const auto* text = std::get_if<std::string>(&entry.query)) {
        const DenseIndex* index = ctx.chunk_index(entry.corpus);
        const ChunkStore* store = ctx.chunk_store(entry.corpus);
        if (index == nullptr || store == nullptr) {
            throw InputError("no index for corpus " +
                             std::string(corpus_name(entry.corpus)));
        }
        if (index->size() == 0) return docs;
        const auto query_vec = ctx.text_embedder->embed_texts({*text}).front();
        auto hits =
            knn_search(*index, query_vec, std::min(ctx.params.top_n, index->size()));
        std::vector<std::string> texts;
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
        std::size_t i = 0;
        for (const auto& hit : top) {
            const Chunk* chunk = store->find(hit.item_id);
            docs.push_back("Document " + std::to_string(++i) + " (" +
                           std::string(corpus_name(entry.corpus)) +
                           "): " + (chunk ? chunk->text : std::string{}));
        }
    } else {
        const auto& g = std::get<GraphQuery>(entry.query);
        if (ctx.graph_store == nullptr) throw InputError("no graph store");
        std::vector<Diagnostic> diagnostics;
        auto facts = retrieve_graph(g.term, g.relation, *ctx.graph_store, *ctx.reranker,
                                    ctx.params.graph_top_relations, diagnostics);
        if (!facts.found) return docs;
        std::size_t i = 0;
        if (!facts.definition.empty()) {
            docs.push_back("Document " + std::to_string(++i) + " (graph): " + facts.term +
                           ": " + facts.definition);
        }
        for (const auto& text : facts.relation_texts) {
            docs.push_back("Document " + std::to_string(++i) + " (graph): " + text);
        }
    }
    return docs;
}

}  // namespace

ExplorationRunResult run_exploration(const std::vector<ExploreSample>& samples,
                                     const QueryExecutionContext& ctx, ModelClient& expert,
                                     ModelClient& judge,
                                     const ExplorationPipelineConfig& config) {
    std::vector<std::vector<ExplorationRecord>> per_sample(samples.size());
    std::vector<std::optional<SkippedSample>> skipped(samples.size());

    parallel_for(samples.size(), config.workers, [&](std::size_t s) {
        const auto& sample = samples[s];
        auto explored = explore_queries(sample, expert, config.queries_per_corpus);
        if (explored.skipped) {
            skipped[s] = SkippedSample{sample.sample_id, explored.skip_reason};
            return;
        }

        for (const auto& entry : explored.entries) {
            ExplorationRecord rec;
            rec.sample_id = sample.sample_id;
            rec.image_ref = sample.image_ref;
            rec.question = sample.question;
            rec.corpus = entry.corpus;
            rec.j = entry.j;
            rec.query = entry.query;
            try {
                rec.docs = retrieve_for_query(entry, ctx);
            } catch (const Error& e) {
                rec.retrieval_failed = true;
                rec.failure_reason = e.what();
            }
            if (!rec.retrieval_failed) {
                if (rec.docs.empty()) {
                    // nothing retrieved cannot support the answer
                    rec.verdict.supports = false;
                    rec.verdict.parse_ok = true;
                } else {
                    try {
                        rec.verdict = judge_support(sample, rec.docs, judge);
                    } catch (const Error& e) {
                        rec.verdict.parse_ok = false;
                        rec.failure_reason = e.what();
                    }
                }
            }
            per_sample[s].push_back(std::move(rec));
        }
    });

    ExplorationRunResult result;
    for (auto& group : per_sample) {
        for (auto& rec : group) result.records.push_back(std::move(rec));
    }
    for (auto& s : skipped) {
        if (s) result.skipped.push_back(std::move(*s));
    }
    return result;
}

}  // namespace medrag
