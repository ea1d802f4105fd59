#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "medrag/corpus.hpp"
#include "medrag/errors.hpp"
#include "medrag/gateway.hpp"
#include "medrag/image.hpp"
#include "medrag/metrics.hpp"
#include "medrag/preference.hpp"
#include "medrag/prompts.hpp"
#include "medrag/query.hpp"
#include "medrag/retrieval.hpp"

namespace py = pybind11;
using namespace medrag;

namespace {

Corpus corpus_arg(const std::string& name) {
    const auto corpus = corpus_from_name(name);
    if (!corpus) throw ParameterError("unknown corpus '" + name + "'");
    return *corpus;
}

py::dict hit_to_dict(const ScoredHit& hit) {
    py::dict d;
    d["item_id"] = hit.item_id;
    d["score"] = hit.score;
    d["rank"] = hit.rank;
    return d;
}

py::list hits_to_list(const std::vector<ScoredHit>& hits) {
    py::list out;
    for (const auto& h : hits) out.append(hit_to_dict(h));
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Core operations of the heterogeneous retrieval engine";

    py::register_exception<ParameterError>(m, "ParameterError", PyExc_ValueError);
    py::register_exception<InputError>(m, "InputError", PyExc_ValueError);
    py::register_exception<UndefinedMetricError>(m, "UndefinedMetricError",
                                                 PyExc_ValueError);

    // corpus
    m.def(
        "chunk_document",
        [](const std::string& corpus, const std::string& doc_id, const std::string& text,
           std::size_t max_len, std::size_t overlap) {
            py::list out;
            for (const auto& c : chunk_document(corpus_arg(corpus), doc_id, text, max_len,
                                                overlap)) {
                py::dict d;
                d["chunk_id"] = c.chunk_id;
                d["corpus"] = std::string(corpus_name(c.corpus));
                d["source_doc"] = c.source_doc;
                d["char_offset"] = c.char_offset;
                d["text"] = c.text;
                out.append(d);
            }
            return out;
        },
        py::arg("corpus"), py::arg("doc_id"), py::arg("text"), py::arg("max_len") = 1000,
        py::arg("overlap") = 200);

    m.def(
        "perceptual_hash_file",
        [](const std::string& path) { return perceptual_hash(decode_image(path)); },
        py::arg("path"));
    m.def(
        "perceptual_hash_bytes",
        [](const py::bytes& data) {
            return perceptual_hash(decode_image_bytes(std::string(data)));
        },
        py::arg("data"));
    m.def("hamming_distance", &hamming_distance, py::arg("a"), py::arg("b"));

    // retrieval
    m.def(
        "knn_search",
        [](const std::vector<std::pair<std::string, std::vector<double>>>& items,
           const std::vector<double>& query, std::size_t k) {
            if (items.empty()) return py::list();
            auto index = DenseIndex::build("py", items.front().second.size(), items);
            return hits_to_list(knn_search(index, query, k));
        },
        py::arg("items"), py::arg("query"), py::arg("k"));
    m.def(
        "rrf_fuse",
        [](const std::vector<std::vector<std::string>>& lists, std::size_t k0) {
            return hits_to_list(rrf_fuse(lists, k0));
        },
        py::arg("lists"), py::arg("k0") = 60);
    m.def(
        "adaptive_select",
        [](const std::vector<std::pair<std::string, double>>& scored, double tau,
           std::size_t k_max) {
            std::vector<ScoredHit> hits;
            for (std::size_t i = 0; i < scored.size(); ++i) {
                hits.push_back(ScoredHit{scored[i].first, scored[i].second, i + 1});
            }
            return hits_to_list(adaptive_select_reports(hits, tau, k_max));
        },
        py::arg("scored"), py::arg("tau") = 0.8, py::arg("k_max") = 3);

    // gateway mocks
    m.def("mock_hash_embedding", &mock_hash_embedding, py::arg("content"),
          py::arg("dims") = 64);
    m.def("mock_token_overlap", &mock_token_overlap, py::arg("query"),
          py::arg("candidate"));

    // query grammar
    m.def(
        "parse_query_output",
        [](const std::string& raw, const std::string& mode) {
            const auto parsed = parse_query_output(
                raw, mode == "exploration" ? ParseMode::exploration : ParseMode::execution);
            py::list entries;
            for (const auto& e : parsed.set.entries) {
                py::dict d;
                d["corpus"] = std::string(corpus_name(e.corpus));
                d["j"] = e.j;
                if (const auto* text = std::get_if<std::string>(&e.query)) {
                    d["text"] = *text;
                } else {
                    const auto& g = std::get<GraphQuery>(e.query);
                    d["term"] = g.term;
                    d["relation"] = g.relation;
                }
                entries.append(d);
            }
            py::list diagnostics;
            for (const auto& d : parsed.diagnostics) {
                py::dict row;
                row["kind"] = std::string(diagnostic_kind_name(d.kind));
                row["corpus"] = std::string(corpus_name(d.corpus));
                row["detail"] = d.detail;
                diagnostics.append(row);
            }
            py::dict out;
            out["entries"] = entries;
            out["diagnostics"] = diagnostics;
            return out;
        },
        py::arg("raw"), py::arg("mode") = "execution");

    // prompts
    m.def("render_vqa_prompt", &render_vqa_prompt, py::arg("question_text"),
          py::arg("text_doc"), py::arg("mm_doc"));
    m.def("render_exploration_prompt", &render_exploration_prompt,
          py::arg("question_text"));
    m.def("render_judge_prompt", &render_judge_prompt, py::arg("question_text"),
          py::arg("gold"), py::arg("documents"));
    m.def("render_query_gen_prompt", &render_query_gen_prompt, py::arg("question_text"));

    // metrics
    m.def("recall_at_k", &recall_at_k, py::arg("ranked"), py::arg("gold"), py::arg("k"));
    m.def("vqa_accuracy", &vqa_accuracy, py::arg("predictions"), py::arg("golds"));
    m.def("bleu", &bleu, py::arg("candidate"), py::arg("references"),
          py::arg("max_n") = 4);
    m.def("rouge_l", &rouge_l, py::arg("candidate"), py::arg("reference"));
    m.def(
        "disalignment_metrics",
        [](const std::vector<std::array<bool, 6>>& rows) {
            RunMatrix matrix;
            for (const auto& r : rows) {
                matrix.push_back(RunOutcome{r[0], r[1], r[2], r[3], r[4], r[5]});
            }
            const auto result = disalignment_metrics(matrix);
            py::dict out;
            out["md"] = result.md ? py::object(py::float_(*result.md)) : py::none();
            out["kud"] = result.kud ? py::object(py::float_(*result.kud)) : py::none();
            out["kid"] = result.kid ? py::object(py::float_(*result.kid)) : py::none();
            out["n_samples"] = result.n_samples;
            return out;
        },
        py::arg("rows"),
        "rows of (original, irrelevant, no_retrieval, report_only, doc_only, both)");

    // preference construction
    m.def(
        "is_correct",
        [](const std::string& answer, const std::string& gold, const std::string& kind,
           double alpha_r) {
            const auto task = task_kind_from_name(kind);
            if (!task) throw ParameterError("task_kind must be closed or open");
            return is_correct(answer, gold, *task, alpha_r,
                              {TextMetric::bleu, TextMetric::rouge_l});
        },
        py::arg("answer"), py::arg("gold"), py::arg("task_kind") = "closed",
        py::arg("alpha_r") = 0.5);
    m.def("dpo_loss", &dpo_loss, py::arg("logp_w_policy"), py::arg("logp_w_ref"),
          py::arg("logp_l_policy"), py::arg("logp_l_ref"), py::arg("beta"));

    m.attr("__version__") = "0.1.0";
}
