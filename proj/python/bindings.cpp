#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "mhqa/config.hpp"
#include "mhqa/corpus.hpp"
#include "mhqa/errors.hpp"
#include "mhqa/eval.hpp"
#include "mhqa/pipeline.hpp"
#include "mhqa/reader.hpp"
#include "mhqa/retrieval.hpp"

namespace py = pybind11;
using namespace mhqa;

namespace {

py::dict passage_dict(const Passage& p) {
    py::list anchors;
    for (const auto& a : p.anchors) {
        py::dict d;
        d["target"] = a.target_title;
        d["start"] = a.char_start;
        d["end"] = a.char_end;
        d["token_start"] = a.token_start;
        d["token_end"] = a.token_end;
        anchors.append(d);
    }
    py::dict d;
    d["id"] = p.id;
    d["title"] = p.title;
    d["text"] = p.text;
    d["anchors"] = anchors;
    return d;
}

py::object json_to_py(const nlohmann::json& j) {
    return py::module_::import("json").attr("loads")(j.dump());
}

/// Retrieval over a corpus kept alive by the Python object.
struct Retriever {
    explicit Retriever(const Corpus& corpus) : index(build_index(corpus)) {}
    InvertedIndex index;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Bridge-reasoner multi-hop QA: corpus, retrieval, metrics, decoding and pipeline stages";

    auto base = py::register_exception<Error>(m, "Error");
    py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
    py::register_exception<ParseError>(m, "ParseError", base.ptr());
    py::register_exception<AlignmentError>(m, "AlignmentError", base.ptr());
    py::register_exception<PrerequisiteError>(m, "PrerequisiteError", base.ptr());
    py::register_exception<CorruptionError>(m, "CorruptionError", base.ptr());

    m.def(
        "tokenize",
        [](const std::string& text) {
            const TokenSeq seq = tokenize(text);
            std::vector<std::tuple<std::string, std::size_t, std::size_t>> out;
            for (std::size_t i = 0; i < seq.size(); ++i) {
                out.emplace_back(seq.tokens[i], seq.char_offsets[i].first, seq.char_offsets[i].second);
            }
            return out;
        },
        py::arg("text"), "Lowercased alphanumeric tokens as (token, start, end) code-point offsets.");

    m.def("normalize_answer", [](const std::string& s) { return normalize_answer(s); }, py::arg("text"));
    m.def(
        "em_f1",
        [](const std::string& prediction, const std::string& gold) {
            const auto r = em_f1(prediction, gold);
            return std::make_pair(r.em, r.f1);
        },
        py::arg("prediction"), py::arg("gold"));
    m.def("hits_at_k", &hits_at_k, py::arg("ranked_titles"), py::arg("gold_title"), py::arg("k"));

    py::class_<Corpus>(m, "Corpus")
        .def("__len__", &Corpus::size)
        .def("titles",
             [](const Corpus& c) {
                 std::vector<std::string> out;
                 for (const auto& p : c.passages()) {
                     out.push_back(p.title);
                 }
                 return out;
             })
        .def(
            "passage",
            [](const Corpus& c, const std::string& title) -> py::object {
                const Passage* p = c.find_title(title);
                return p == nullptr ? py::none() : py::object(passage_dict(*p));
            },
            py::arg("title"));
    m.def("load_corpus", &load_corpus, py::arg("path"));

    py::class_<Retriever>(m, "Retriever")
        .def(py::init<const Corpus&>(), py::arg("corpus"), py::keep_alive<1, 2>())
        .def(
            "retrieve",
            [](const Retriever& r, const std::string& question, std::size_t k, double k1, double b, double lambda) {
                std::vector<std::pair<std::string, double>> out;
                for (const auto& hit : retrieve_start_passages(r.index, tokenize(question), k, {k1, b, lambda})) {
                    out.emplace_back(hit.passage_id, hit.score);
                }
                return out;
            },
            py::arg("question"), py::arg("k") = 10, py::arg("k1") = 1.2, py::arg("b") = 0.75, py::arg("lam") = 1.0)
        .def(
            "score",
            [](const Retriever& r, const std::string& question, const std::string& passage_id, double k1, double b,
               double lambda) { return hybrid_score(r.index, tokenize(question), passage_id, {k1, b, lambda}); },
            py::arg("question"), py::arg("passage_id"), py::arg("k1") = 1.2, py::arg("b") = 0.75, py::arg("lam") = 1.0);

    m.def(
        "best_span",
        [](const std::vector<double>& start, const std::vector<double>& end, std::size_t max_len) {
            const auto c = best_span({start, end}, max_len);
            return std::make_tuple(c.start, c.end, c.score);
        },
        py::arg("start_logits"), py::arg("end_logits"), py::arg("max_len") = 30,
        "Argmax span (start, end, score) with start <= end < start + max_len.");

    m.def(
        "split_folds",
        [](const std::vector<std::string>& ids, std::uint64_t seed) {
            const auto s = split_folds(ids, seed);
            return std::make_pair(s.folds[0], s.folds[1]);
        },
        py::arg("question_ids"), py::arg("seed"));

    m.def("known_modes", &known_modes);
    m.def("stage_names", &Pipeline::stage_names);
    m.def(
        "run_stage",
        [](const std::string& config_path, const std::string& stage,
           const std::vector<std::pair<std::string, std::string>>& overrides) -> py::object {
            Pipeline p(load_config(config_path, overrides));
            if (stage == "evaluate") {
                return json_to_py(report_summary_json(p.evaluate()));
            }
            p.run_stage(stage);
            return py::none();
        },
        py::arg("config"), py::arg("stage"), py::arg("overrides") = std::vector<std::pair<std::string, std::string>>{},
        "Runs one pipeline stage; evaluate returns the metric summary.");
    m.def(
        "check_fold_hygiene", [](const std::filesystem::path& dir) { return check_fold_hygiene(dir); },
        py::arg("output_dir"));
}
