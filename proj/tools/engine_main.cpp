// Operator CLI: ingest, index, retrieve, explore, build-mqg-data, build-pairs,
// eval, serve. Every run writes a manifest hashing its config, inputs, and
// outputs. Exit codes: 0 success, 1 pipeline failure, 2 config error.

#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "medrag/config.hpp"
#include "medrag/corpus.hpp"
#include "medrag/errors.hpp"
#include "medrag/explore.hpp"
#include "medrag/image.hpp"
#include "medrag/metrics.hpp"
#include "medrag/preference.hpp"
#include "medrag/query.hpp"
#include "medrag/retrieval.hpp"
#include "medrag/service.hpp"
#include "medrag/util.hpp"

namespace {

using medrag::json;

class ManifestBuilder {
public:
    ManifestBuilder(std::string subcommand, const medrag::PipelineConfig& config)
        : config_(config) {
        manifest_.subcommand = std::move(subcommand);
        manifest_.config_hash = medrag::config_hash(config.raw);
    }

    void add_input(const std::filesystem::path& path) {
        manifest_.inputs[path.string()] = medrag::sha256_file_hex(path);
    }
    void add_output(const std::filesystem::path& path) {
        manifest_.outputs[path.string()] = medrag::sha256_file_hex(path);
    }
    void add_wire_calls(const std::string& name, std::size_t calls) {
        manifest_.wire_calls[name] = calls;
    }

    void write() {
        manifest_.write(config_.output_dir /
                        ("manifest-" + manifest_.subcommand + ".json"));
    }

private:
    const medrag::PipelineConfig& config_;
    medrag::RunManifest manifest_;
};

std::shared_ptr<medrag::ResponseCache> open_cache(const medrag::PipelineConfig& config) {
    return config.cache_dir.empty() ? medrag::ResponseCache::in_memory()
                                    : medrag::ResponseCache::on_disk(config.cache_dir);
}

// ---------------------------------------------------------------------------
// ingest

int run_ingest(const medrag::PipelineConfig& config) {
    ManifestBuilder manifest("ingest", config);
    std::filesystem::create_directories(config.store_dir);
    std::filesystem::create_directories(config.output_dir);
    json stats = json::object();

    bool any_input = false;
    for (medrag::Corpus corpus : medrag::kUnstructuredCorpora) {
        const std::string name(medrag::corpus_name(corpus));
        if (!config.inputs.contains(name)) continue;
        any_input = true;
        const auto input_path = config.input(name);
        manifest.add_input(input_path);

        medrag::ChunkStore store(corpus);
        std::size_t documents = 0;
        for (const auto& row : medrag::read_jsonl(input_path)) {
            const auto doc_id = row.at("doc_id").get<std::string>();
            const auto text = row.at("text").get<std::string>();
            for (auto& chunk : medrag::chunk_document(corpus, doc_id, text)) {
                store.append(std::move(chunk));
            }
            ++documents;
        }
        store.seal();
        const auto out_path = config.store_dir / ("chunks_" + name + ".jsonl");
        store.save(out_path);
        manifest.add_output(out_path);
        stats[name] = json{{"documents", documents}, {"chunks", store.size()}};
    }

    if (config.inputs.contains("graph_terms") && config.inputs.contains("graph_relations")) {
        any_input = true;
        const auto terms_path = config.input("graph_terms");
        const auto relations_path = config.input("graph_relations");
        manifest.add_input(terms_path);
        manifest.add_input(relations_path);

        std::vector<medrag::GraphTerm> terms;
        for (const auto& row : medrag::read_jsonl(terms_path)) {
            terms.push_back(medrag::GraphTerm{row.at("term_id").get<std::string>(),
                                              row.at("surface").get<std::string>(),
                                              row.value("definition", std::string{})});
        }
        std::vector<medrag::GraphRelation> relations;
        for (const auto& row : medrag::read_jsonl(relations_path)) {
            relations.push_back(
                medrag::GraphRelation{row.at("head").get<std::string>(),
                                      row.at("relation_type").get<std::string>(),
                                      row.at("tail").get<std::string>()});
        }
        medrag::GraphStore store;
        const auto graph_stats = store.ingest(terms, relations);
        store.seal();
        const auto terms_out = config.store_dir / "graph_terms.jsonl";
        const auto relations_out = config.store_dir / "graph_relations.jsonl";
        store.save(terms_out, relations_out);
        manifest.add_output(terms_out);
        manifest.add_output(relations_out);
        stats["graph"] = json{{"terms", graph_stats.terms},
                              {"relations", graph_stats.relations},
                              {"rejected", graph_stats.rejected}};
    }

    if (config.inputs.contains("reports")) {
        any_input = true;
        const auto reports_path = config.input("reports");
        manifest.add_input(reports_path);
        const auto image_base = reports_path.parent_path();

        std::vector<medrag::ReportEntry> entries;
        for (const auto& row : medrag::read_jsonl(reports_path)) {
            medrag::ReportEntry entry;
            entry.report_id = row.at("report_id").get<std::string>();
            const auto modality =
                medrag::modality_from_name(row.at("modality").get<std::string>());
            if (!modality) {
                throw medrag::InputError("reports: unknown modality in record '" +
                                         entry.report_id + "'");
            }
            entry.modality = *modality;
            std::filesystem::path image(row.at("image_path").get<std::string>());
            if (!image.is_absolute()) image = image_base / image;
            entry.image_ref = image.string();
            entry.report_text = row.at("report_text").get<std::string>();
            entry.phash = medrag::perceptual_hash(medrag::decode_image(entry.image_ref));
            entries.push_back(std::move(entry));
        }

        const auto dedup = medrag::dedup_reports(entries, config.dedup_threshold);
        medrag::ReportStore store;
        for (const auto& entry : dedup.kept) store.append(entry);
        store.seal();
        const auto reports_out = config.store_dir / "reports.jsonl";
        store.save(reports_out);
        manifest.add_output(reports_out);

        std::vector<json> dup_rows;
        for (const auto& [removed, kept] : dedup.duplicates) {
            dup_rows.push_back(json{{"removed", removed}, {"kept", kept}});
        }
        const auto dup_out = config.store_dir / "duplicates.jsonl";
        medrag::write_jsonl(dup_out, dup_rows);
        manifest.add_output(dup_out);
        stats["reports"] = json{{"loaded", entries.size()},
                                {"kept", dedup.kept.size()},
                                {"removed", dedup.duplicates.size()}};
    }

    if (!any_input) {
        throw medrag::ConfigError("ingest: no corpus inputs configured");
    }
    const auto stats_path = config.output_dir / "ingest_stats.json";
    medrag::write_file(stats_path, stats.dump(2) + "\n");
    manifest.add_output(stats_path);
    manifest.write();
    return 0;
}

// ---------------------------------------------------------------------------
// index

int run_index(const medrag::PipelineConfig& config) {
    ManifestBuilder manifest("index", config);
    std::filesystem::create_directories(config.index_dir);
    std::filesystem::create_directories(config.output_dir);
    auto cache = open_cache(config);

    bool any = false;
    medrag::ModelClient text_embedder(
        config.endpoint("text_embed", medrag::EndpointKind::text_embed), cache);
    for (medrag::Corpus corpus : medrag::kUnstructuredCorpora) {
        const std::string name(medrag::corpus_name(corpus));
        const auto store_path = config.store_dir / ("chunks_" + name + ".jsonl");
        if (!std::filesystem::exists(store_path)) continue;
        any = true;
        manifest.add_input(store_path);
        const auto store = medrag::ChunkStore::load(corpus, store_path);

        std::vector<std::string> texts;
        texts.reserve(store.size());
        for (const auto& chunk : store.chunks()) texts.push_back(chunk.text);
        const auto vectors = text_embedder.embed_texts(texts);

        std::vector<std::pair<std::string, medrag::EmbeddingVector>> items;
        items.reserve(vectors.size());
        for (std::size_t i = 0; i < vectors.size(); ++i) {
            items.emplace_back(store.chunks()[i].chunk_id, vectors[i]);
        }
        if (items.empty()) continue;
        auto index = medrag::DenseIndex::build(text_embedder.endpoint().model_id,
                                               items.front().second.size(), items);
        const auto index_path = config.index_dir / (name + ".idx");
        index.save(index_path);
        manifest.add_output(index_path);
    }

    const auto reports_path = config.store_dir / "reports.jsonl";
    if (std::filesystem::exists(reports_path)) {
        any = true;
        manifest.add_input(reports_path);
        medrag::ModelClient image_embedder(
            config.endpoint("image_embed", medrag::EndpointKind::image_embed), cache);
        const auto store = medrag::ReportStore::load(reports_path);
        for (medrag::Modality modality :
             {medrag::Modality::radiology, medrag::Modality::ophthalmology,
              medrag::Modality::pathology}) {
            std::vector<std::pair<std::string, medrag::EmbeddingVector>> items;
            for (const auto* entry : store.by_modality(modality)) {
                items.emplace_back(entry->report_id,
                                   image_embedder.embed_image(entry->image_ref));
            }
            if (items.empty()) continue;
            auto index = medrag::DenseIndex::build(image_embedder.endpoint().model_id,
                                                   items.front().second.size(), items);
            const auto index_path =
                config.index_dir /
                ("reports_" + std::string(medrag::modality_name(modality)) + ".idx");
            index.save(index_path);
            manifest.add_output(index_path);
        }
        manifest.add_wire_calls("image_embed", image_embedder.wire_calls());
    }
    if (!any) {
        throw medrag::ConfigError("index: no stores found under " +
                                  config.store_dir.string());
    }
    manifest.add_wire_calls("text_embed", text_embedder.wire_calls());
    manifest.write();
    return 0;
}

// ---------------------------------------------------------------------------
// retrieve

medrag::PromptTask parse_task(const std::string& name) {
    if (name == "vqa") return medrag::PromptTask::vqa;
    if (name == "report_rad") return medrag::PromptTask::report_rad;
    if (name == "report_oph") return medrag::PromptTask::report_oph;
    throw medrag::InputError("unknown task '" + name + "'");
}

int run_retrieve(const medrag::PipelineConfig& config) {
    ManifestBuilder manifest("retrieve", config);
    std::filesystem::create_directories(config.output_dir);
    const auto queries_path = config.input("queries");
    manifest.add_input(queries_path);
    auto runtime = medrag::RetrievalRuntime::open(config);
    const auto query_base = queries_path.parent_path();

    std::vector<json> bundle_out, prompt_out, diagnostic_out;
    for (const auto& row : medrag::read_jsonl(queries_path)) {
        const auto sample_id = row.at("sample_id").get<std::string>();
        const auto question = row.value("question", std::string{});
        const auto raw_query_set = row.value("query_set", std::string{});

        auto documents = runtime->retrieve_documents(raw_query_set);

        medrag::ReportBundle reports;
        if (row.contains("image_path") && row.contains("modality")) {
            std::filesystem::path image(row.at("image_path").get<std::string>());
            if (!image.is_absolute()) image = query_base / image;
            reports = runtime->retrieve_reports_for(medrag::read_file(image),
                                                    row.at("modality").get<std::string>());
        }

        for (auto& r : medrag::bundle_rows(sample_id, reports, documents)) {
            bundle_out.push_back(std::move(r));
        }
        const auto task = parse_task(row.value("task", std::string{"vqa"}));
        prompt_out.push_back(json{
            {"sample_id", sample_id},
            {"prompt", medrag::render_context_prompt(question, reports, documents, task)}});
        for (const auto& d : documents.diagnostics) {
            diagnostic_out.push_back(json{{"sample_id", sample_id},
                                          {"kind", medrag::diagnostic_kind_name(d.kind)},
                                          {"corpus", medrag::corpus_name(d.corpus)},
                                          {"detail", d.detail}});
        }
    }

    const auto bundles_path = config.output_dir / "bundles.jsonl";
    const auto prompts_path = config.output_dir / "prompts.jsonl";
    const auto diagnostics_path = config.output_dir / "diagnostics.jsonl";
    medrag::write_jsonl(bundles_path, bundle_out);
    medrag::write_jsonl(prompts_path, prompt_out);
    medrag::write_jsonl(diagnostics_path, diagnostic_out);
    manifest.add_output(bundles_path);
    manifest.add_output(prompts_path);
    manifest.add_output(diagnostics_path);
    manifest.add_wire_calls("text_embed", runtime->text_embedder().wire_calls());
    manifest.add_wire_calls("image_embed", runtime->image_embedder().wire_calls());
    manifest.add_wire_calls("rerank", runtime->reranker().wire_calls());
    manifest.write();
    return 0;
}

// ---------------------------------------------------------------------------
// explore + build-mqg-data

std::vector<medrag::ExploreSample> load_samples(const std::filesystem::path& path) {
    std::vector<medrag::ExploreSample> samples;
    const auto base = path.parent_path();
    for (const auto& row : medrag::read_jsonl(path)) {
        medrag::ExploreSample s;
        s.sample_id = row.at("sample_id").get<std::string>();
        if (row.contains("image_path")) {
            std::filesystem::path image(row.at("image_path").get<std::string>());
            if (!image.is_absolute()) image = base / image;
            s.image_ref = image.string();
        }
        s.question = row.value("question", std::string{});
        s.gold = row.value("gold", std::string{});
        s.modality = row.value("modality", std::string{});
        samples.push_back(std::move(s));
    }
    return samples;
}

json query_to_json(const medrag::CorpusQuery& query) {
    if (const auto* text = std::get_if<std::string>(&query)) {
        return json{{"text", *text}};
    }
    const auto& g = std::get<medrag::GraphQuery>(query);
    return json{{"term", g.term}, {"relation", g.relation}};
}

medrag::CorpusQuery query_from_json(const json& value) {
    if (value.contains("text")) return value.at("text").get<std::string>();
    return medrag::GraphQuery{value.at("term").get<std::string>(),
                              value.at("relation").get<std::string>()};
}

int run_explore(const medrag::PipelineConfig& config) {
    ManifestBuilder manifest("explore", config);
    std::filesystem::create_directories(config.output_dir);
    const auto samples_path = config.input("samples");
    manifest.add_input(samples_path);
    const auto samples = load_samples(samples_path);

    auto runtime = medrag::RetrievalRuntime::open(config);
    auto cache = runtime->cache();
    medrag::ModelClient expert(config.endpoint("expert", medrag::EndpointKind::generate),
                               cache);
    medrag::ModelClient judge(config.endpoint("judge", medrag::EndpointKind::generate),
                              cache);

    medrag::ExplorationPipelineConfig pipeline;
    pipeline.queries_per_corpus = config.explore.queries_per_corpus;
    pipeline.workers = config.concurrency.workers;
    auto result = medrag::run_exploration(samples, runtime->context(), expert, judge,
                                          pipeline);

    std::vector<json> record_rows;
    for (const auto& rec : result.records) {
        record_rows.push_back(json{
            {"sample_id", rec.sample_id},
            {"image_ref", rec.image_ref},
            {"question", rec.question},
            {"corpus", medrag::corpus_name(rec.corpus)},
            {"j", rec.j},
            {"query", query_to_json(rec.query)},
            {"docs", rec.docs},
            {"retrieval_failed", rec.retrieval_failed},
            {"failure_reason", rec.failure_reason},
            {"verdict", json{{"supports", rec.verdict.supports},
                             {"parse_ok", rec.verdict.parse_ok},
                             {"raw_response", rec.verdict.raw_response}}}});
    }
    std::vector<json> skipped_rows;
    for (const auto& s : result.skipped) {
        skipped_rows.push_back(json{{"sample_id", s.sample_id}, {"reason", s.reason}});
    }

    const auto records_path = config.output_dir / "exploration_records.jsonl";
    const auto skipped_path = config.output_dir / "skipped_samples.jsonl";
    medrag::write_jsonl(records_path, record_rows);
    medrag::write_jsonl(skipped_path, skipped_rows);
    manifest.add_output(records_path);
    manifest.add_output(skipped_path);
    manifest.add_wire_calls("expert", expert.wire_calls());
    manifest.add_wire_calls("judge", judge.wire_calls());
    manifest.write();
    return 0;
}

int run_build_mqg_data(const medrag::PipelineConfig& config) {
    ManifestBuilder manifest("build-mqg-data", config);
    std::filesystem::create_directories(config.output_dir);
    const auto records_path = config.input("records");
    manifest.add_input(records_path);

    std::vector<medrag::ExplorationRecord> records;
    for (const auto& row : medrag::read_jsonl(records_path)) {
        medrag::ExplorationRecord rec;
        rec.sample_id = row.at("sample_id").get<std::string>();
        rec.image_ref = row.value("image_ref", std::string{});
        rec.question = row.value("question", std::string{});
        const auto corpus = medrag::corpus_from_name(row.at("corpus").get<std::string>());
        if (!corpus) throw medrag::InputError("records: unknown corpus");
        rec.corpus = *corpus;
        rec.j = row.value("j", 1);
        rec.query = query_from_json(row.at("query"));
        if (row.contains("docs")) {
            rec.docs = row.at("docs").get<std::vector<std::string>>();
        }
        rec.retrieval_failed = row.value("retrieval_failed", false);
        rec.failure_reason = row.value("failure_reason", std::string{});
        if (row.contains("verdict")) {
            const auto& v = row.at("verdict");
            rec.verdict.supports = v.value("supports", false);
            rec.verdict.parse_ok = v.value("parse_ok", false);
            rec.verdict.raw_response = v.value("raw_response", std::string{});
        }
        records.push_back(std::move(rec));
    }

    const auto data = medrag::build_mqg_training(records, config.explore.n_q);

    std::vector<json> sft_rows;
    for (const auto& e : data.sft) {
        sft_rows.push_back(json{{"image_ref", e.image_ref},
                                {"question", e.question},
                                {"target_text", e.target_text}});
    }
    std::vector<json> dpo_rows;
    for (const auto& e : data.dpo) {
        dpo_rows.push_back(json{{"image_ref", e.image_ref},
                                {"question", e.question},
                                {"chosen_text", e.chosen_text},
                                {"rejected_text", e.rejected_text}});
    }
    std::vector<json> outcome_rows;
    for (const auto& o : data.outcomes) {
        outcome_rows.push_back(json{{"sample_id", o.sample_id},
                                    {"corpus", medrag::corpus_name(o.corpus)},
                                    {"j", o.j},
                                    {"disposition", medrag::disposition_name(o.disposition)}});
    }

    json per_corpus = json::object();
    for (const auto& [name, counts] : data.stats.per_corpus) {
        per_corpus[name] = json{{"positive", counts.positive},
                                {"negative", counts.negative}};
    }
    json stats{{"per_corpus", per_corpus},
               {"sft_examples", data.stats.sft_examples},
               {"dpo_examples", data.stats.dpo_examples},
               {"samples_without_positive", data.stats.samples_without_positive},
               {"samples_without_pair", data.stats.samples_without_pair},
               {"unparsed_judgements", data.stats.unparsed_judgements},
               {"retrieval_errors", data.stats.retrieval_errors}};

    const auto sft_path = config.output_dir / "sft.jsonl";
    const auto dpo_path = config.output_dir / "dpo.jsonl";
    const auto outcomes_path = config.output_dir / "query_outcomes.jsonl";
    const auto stats_path = config.output_dir / "mqg_stats.json";
    medrag::write_jsonl(sft_path, sft_rows);
    medrag::write_jsonl(dpo_path, dpo_rows);
    medrag::write_jsonl(outcomes_path, outcome_rows);
    medrag::write_file(stats_path, stats.dump(2) + "\n");
    manifest.add_output(sft_path);
    manifest.add_output(dpo_path);
    manifest.add_output(outcomes_path);
    manifest.add_output(stats_path);
    manifest.write();
    return 0;
}

// ---------------------------------------------------------------------------
// build-pairs

int run_build_pairs(const medrag::PipelineConfig& config) {
    ManifestBuilder manifest("build-pairs", config);
    std::filesystem::create_directories(config.output_dir);
    const auto samples_path = config.input("samples");
    const auto bundles_path = config.input("bundles");
    manifest.add_input(samples_path);
    manifest.add_input(bundles_path);

    // bundles.jsonl rows attach k_r / k_d texts per sample
    std::map<std::string, medrag::KnowledgeBundle> bundles;
    for (const auto& row : medrag::read_jsonl(bundles_path)) {
        const auto sample_id = row.at("sample_id").get<std::string>();
        const auto kind = row.at("kind").get<std::string>();
        const auto text = row.at("text").get<std::string>();
        if (kind == "report") {
            bundles[sample_id].reports.push_back(text);
        } else {
            bundles[sample_id].documents.push_back(text);
        }
    }

    std::vector<medrag::TrainingSample> samples;
    const auto base = samples_path.parent_path();
    for (const auto& row : medrag::read_jsonl(samples_path)) {
        medrag::TrainingSample s;
        s.sample_id = row.at("sample_id").get<std::string>();
        std::filesystem::path image(row.at("image_path").get<std::string>());
        if (!image.is_absolute()) image = base / image;
        s.image_ref = image.string();
        s.question = row.value("question", std::string{});
        s.gold = row.at("gold").get<std::string>();
        s.modality = row.value("modality", std::string{});
        const auto task = medrag::task_kind_from_name(row.value("task_kind", "closed"));
        if (!task) throw medrag::InputError("samples: unknown task_kind");
        s.task_kind = *task;
        if (auto it = bundles.find(s.sample_id); it != bundles.end()) {
            s.bundle = it->second;
        }
        samples.push_back(std::move(s));
    }

    auto cache = open_cache(config);
    medrag::ModelClient answerer(config.endpoint("answerer", medrag::EndpointKind::generate),
                                 cache);
    medrag::ModelClient image_embedder(
        config.endpoint("image_embed", medrag::EndpointKind::image_embed), cache);

    medrag::PreferenceBuildConfig build_config;
    build_config.alpha_r = config.pairs.alpha_r;
    build_config.metrics = config.pairs.metrics;
    build_config.workers = config.concurrency.workers;
    const auto result =
        medrag::build_preference_pairs(samples, answerer, image_embedder, build_config);

    std::vector<json> cm_rows, mk_rows, outcome_rows, skipped_rows;
    for (const auto& pair : result.cross_modality) {
        cm_rows.push_back(medrag::preference_pair_row(pair));
    }
    for (const auto& pair : result.multi_source) {
        mk_rows.push_back(medrag::preference_pair_row(pair));
    }
    for (const auto& outcome : result.outcomes) {
        outcome_rows.push_back(medrag::sample_outcome_row(outcome));
    }
    for (const auto& s : result.skipped) {
        skipped_rows.push_back(json{{"sample_id", s.sample_id}, {"reason", s.reason}});
    }

    const auto cm_path = config.output_dir / "cross_modality_pairs.jsonl";
    const auto mk_path = config.output_dir / "knowledge_pairs.jsonl";
    const auto outcomes_path = config.output_dir / "outcomes.jsonl";
    const auto skipped_path = config.output_dir / "skipped_samples.jsonl";
    medrag::write_jsonl(cm_path, cm_rows);
    medrag::write_jsonl(mk_path, mk_rows);
    medrag::write_jsonl(outcomes_path, outcome_rows);
    medrag::write_jsonl(skipped_path, skipped_rows);
    manifest.add_output(cm_path);
    manifest.add_output(mk_path);
    manifest.add_output(outcomes_path);
    manifest.add_output(skipped_path);
    manifest.add_wire_calls("answerer", answerer.wire_calls());
    manifest.add_wire_calls("image_embed", image_embedder.wire_calls());
    manifest.write();
    return 0;
}

// ---------------------------------------------------------------------------
// eval

json metric_row(const std::string& metric, const std::optional<double>& value,
                std::size_t n_samples, const std::string& hash) {
    json row{{"metric", metric}};
    if (value) {
        row["value"] = *value;
    } else {
        row["value"] = "undefined";
    }
    row["n_samples"] = n_samples;
    row["config_hash"] = hash;
    return row;
}

int run_eval(const medrag::PipelineConfig& config) {
    ManifestBuilder manifest("eval", config);
    std::filesystem::create_directories(config.output_dir);
    const auto input_path = config.input("eval");
    manifest.add_input(input_path);
    const auto rows = medrag::read_jsonl(input_path);
    const std::string hash = medrag::config_hash(config.raw);

    const json eval_spec = config.raw.value("eval", json::object());
    const std::string kind = eval_spec.value("kind", std::string{});
    std::vector<json> report;

    if (kind == "recall") {
        const auto k = eval_spec.value("k", std::size_t{5});
        std::vector<std::vector<std::string>> ranked;
        std::vector<std::string> gold;
        for (const auto& row : rows) {
            ranked.push_back(row.at("ranked").get<std::vector<std::string>>());
            gold.push_back(row.at("gold").get<std::string>());
        }
        const double value = medrag::recall_at_k(ranked, gold, k);
        report.push_back(metric_row("recall@" + std::to_string(k), value, rows.size(), hash));
    } else if (kind == "vqa") {
        std::vector<std::string> predictions, golds;
        for (const auto& row : rows) {
            predictions.push_back(row.at("prediction").get<std::string>());
            golds.push_back(row.at("gold").get<std::string>());
        }
        report.push_back(metric_row("vqa_accuracy",
                                    medrag::vqa_accuracy(predictions, golds), rows.size(),
                                    hash));
    } else if (kind == "report") {
        if (rows.empty()) throw medrag::UndefinedMetricError("eval: empty report input");
        double bleu_sum = 0.0, rouge_sum = 0.0;
        for (const auto& row : rows) {
            const auto candidate = row.at("candidate").get<std::string>();
            const auto reference = row.at("reference").get<std::string>();
            bleu_sum += medrag::bleu(candidate, {reference});
            rouge_sum += medrag::rouge_l(candidate, reference);
        }
        report.push_back(
            metric_row("bleu", bleu_sum / rows.size(), rows.size(), hash));
        report.push_back(
            metric_row("rouge_l", rouge_sum / rows.size(), rows.size(), hash));
    } else if (kind == "disalignment") {
        medrag::RunMatrix matrix;
        for (const auto& row : rows) {
            medrag::RunOutcome outcome;
            outcome.original = row.at("original").get<bool>();
            outcome.irrelevant = row.at("irrelevant").get<bool>();
            outcome.no_retrieval = row.at("no_retrieval").get<bool>();
            outcome.with_report_only = row.at("with_report_only").get<bool>();
            outcome.with_doc_only = row.at("with_doc_only").get<bool>();
            outcome.with_both = row.at("with_both").get<bool>();
            matrix.push_back(outcome);
        }
        const auto metrics = medrag::disalignment_metrics(matrix);
        report.push_back(metric_row("md", metrics.md, metrics.n_samples, hash));
        report.push_back(metric_row("kud", metrics.kud, metrics.n_samples, hash));
        report.push_back(metric_row("kid", metrics.kid, metrics.n_samples, hash));
    } else {
        throw medrag::ConfigError(
            "eval.kind must be one of recall, vqa, report, disalignment");
    }

    const auto report_path = config.output_dir / "metrics_report.jsonl";
    medrag::write_jsonl(report_path, report);
    manifest.add_output(report_path);
    manifest.write();
    return 0;
}

// ---------------------------------------------------------------------------

int run_serve(const medrag::PipelineConfig& config) {
    auto runtime = medrag::RetrievalRuntime::open(config);
    medrag::RetrievalService service(runtime);
    fprintf(stderr, "serving on %s:%d\n", config.serve.host.c_str(), config.serve.port);
    if (!service.run(config.serve.host, config.serve.port)) {
        throw medrag::Error("serve: could not bind " + config.serve.host + ":" +
                            std::to_string(config.serve.port));
    }
    return 0;
}

void print_error_report(const std::string& subcommand, const std::string& kind,
                        const std::string& message,
                        const std::optional<std::filesystem::path>& output_dir) {
    const json report{{"error", message}, {"kind", kind}, {"subcommand", subcommand}};
    fprintf(stderr, "%s\n", report.dump().c_str());
    if (output_dir) {
        try {
            medrag::write_file(*output_dir / "error.json", report.dump(2) + "\n");
        } catch (...) {
            // stderr already carries the report
        }
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"heterogeneous retrieval engine"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> overrides;
    const std::vector<std::string> names = {"ingest",  "index",          "retrieve",
                                            "explore", "build-mqg-data", "build-pairs",
                                            "eval",    "serve"};
    for (const auto& name : names) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--config", config_path, "path to the config file")->required();
        sub->add_option("--set", overrides, "override config keys, key=value");
    }

    CLI11_PARSE(app, argc, argv);
    const std::string subcommand = app.get_subcommands().front()->get_name();

    medrag::PipelineConfig config;
    try {
        json raw;
        if (!std::filesystem::exists(config_path)) {
            throw medrag::ConfigError("config file not found: " + config_path);
        }
        raw = json::parse(medrag::read_file(config_path), nullptr, false);
        if (raw.is_discarded()) throw medrag::ConfigError("config is not valid JSON");
        medrag::apply_overrides(raw, overrides);
        const std::filesystem::path path(config_path);
        config = medrag::parse_config(raw, path.has_parent_path()
                                               ? path.parent_path()
                                               : std::filesystem::current_path());
    } catch (const medrag::ConfigError& e) {
        print_error_report(subcommand, "config", e.what(), std::nullopt);
        return 2;
    }

    try {
        if (subcommand == "ingest") return run_ingest(config);
        if (subcommand == "index") return run_index(config);
        if (subcommand == "retrieve") return run_retrieve(config);
        if (subcommand == "explore") return run_explore(config);
        if (subcommand == "build-mqg-data") return run_build_mqg_data(config);
        if (subcommand == "build-pairs") return run_build_pairs(config);
        if (subcommand == "eval") return run_eval(config);
        if (subcommand == "serve") return run_serve(config);
        print_error_report(subcommand, "config", "unknown subcommand", std::nullopt);
        return 2;
    } catch (const medrag::ConfigError& e) {
        print_error_report(subcommand, "config", e.what(), std::nullopt);
        return 2;
    } catch (const std::exception& e) {
        print_error_report(subcommand, "pipeline", e.what(), config.output_dir);
        return 1;
    }
}
