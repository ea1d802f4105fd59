#pragma once

#include <map>
#include <string>
#include <vector>

#include "medrag/query.hpp"

namespace medrag {

struct ExploreSample {
    std::string sample_id;
    std::string image_ref;
    std::string question;
    std::string gold;
    std::string modality;
};

struct JudgeVerdict {
    bool supports = false;  // defined only when parse_ok
    std::string raw_response;
    bool parse_ok = false;
};

/// Where a judged exploration query ended up in the training data.
enum class QueryDisposition {
    positive_selected,
    positive_excess,
    negative_selected,
    negative_excess,
    excluded_unparsed_judge,
    excluded_retrieval_error,
};
std::string_view disposition_name(QueryDisposition d);

struct ExplorationRecord {
    std::string sample_id;
    std::string image_ref;
    std::string question;
    Corpus corpus = Corpus::research;
    int j = 1;
    CorpusQuery query;
    std::vector<std::string> docs;  // rendered retrieved documents
    bool retrieval_failed = false;
    std::string failure_reason;
    JudgeVerdict verdict;
};

struct ExploreResult {
    std::vector<QueryEntry> entries;
    std::vector<Diagnostic> diagnostics;
    bool skipped = false;
    std::string skip_reason;
};

/// Renders the exploration prompt, queries the expert model, and parses the
/// tagged output in exploration mode (at most `queries_per_corpus` per
/// corpus, never padded). A generation failure marks the sample skipped.
ExploreResult explore_queries(const ExploreSample& sample, ModelClient& expert,
                              std::size_t queries_per_corpus = 6);

/// Judges whether `docs` support the gold answer. Callers must not invoke
/// this with empty docs; an empty retrieval is labeled negative without a
/// judge call. The verdict comes from the LAST <answer>yes/no</answer> tag,
/// case-insensitively; anything else fails the parse.
JudgeVerdict judge_support(const ExploreSample& sample,
                           const std::vector<std::string>& docs, ModelClient& judge);

/// Parses the final answer tag out of a raw judge response.
JudgeVerdict parse_judge_response(const std::string& response);

// ---------------------------------------------------------------------------
// Training data construction

struct SftExample {
    std::string image_ref;
    std::string question;
    std::string target_text;  // positive query set in the tagged grammar
};

struct DpoExample {
    std::string image_ref;
    std::string question;
    std::string chosen_text;
    std::string rejected_text;
};

struct CorpusLabelCounts {
    std::size_t positive = 0;
    std::size_t negative = 0;
};

struct MqgBuildStats {
    std::map<std::string, CorpusLabelCounts> per_corpus;  // keyed by corpus name
    std::size_t sft_examples = 0;
    std::size_t dpo_examples = 0;
    std::size_t samples_without_positive = 0;
    std::size_t samples_without_pair = 0;
    std::size_t unparsed_judgements = 0;
    std::size_t retrieval_errors = 0;
};

struct QueryOutcome {
    std::string sample_id;
    Corpus corpus;
    int j;
    QueryDisposition disposition;
};

struct MqgTrainingData {
    std::vector<SftExample> sft;
    std::vector<DpoExample> dpo;
    MqgBuildStats stats;
    std::vector<QueryOutcome> outcomes;  // one entry per exploration query
};

/// Splits judged records into positive/negative query sets, keeps the first
/// n_q of each per corpus (exploration order), and serializes training
/// examples. Samples without any positive query are excluded from SFT;
/// samples missing either side are excluded from DPO.
MqgTrainingData build_mqg_training(const std::vector<ExplorationRecord>& records,
                                   std::size_t n_q);

struct JudgeQuality {
    double accuracy = 0.0;
    double f1 = 0.0;
};

/// Accuracy and F1 of judge verdicts against gold labels, with supports=true
/// as the positive class.
JudgeQuality judge_quality(const std::vector<bool>& verdicts,
                           const std::vector<bool>& gold_labels);

// ---------------------------------------------------------------------------
// Pipeline

struct ExplorationPipelineConfig {
    std::size_t queries_per_corpus = 6;
    std::size_t workers = 4;
};

struct SkippedSample {
    std::string sample_id;
    std::string reason;
};

struct ExplorationRunResult {
    std::vector<ExplorationRecord> records;
    std::vector<SkippedSample> skipped;
};

/// Full exploration pass: expert query generation, per-query retrieval, and
/// judge labeling. Records come back grouped by sample in input order, then
/// by corpus and exploration position.
ExplorationRunResult run_exploration(const std::vector<ExploreSample>& samples,
                                     const QueryExecutionContext& ctx, ModelClient& expert,
                                     ModelClient& judge,
                                     const ExplorationPipelineConfig& config);

}  // namespace medrag
