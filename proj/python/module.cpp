#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <filesystem>
#include <string>
#include <vector>

#include "tricode/assembly.hpp"
#include "tricode/ast.hpp"
#include "tricode/bpe.hpp"
#include "tricode/evaluation.hpp"
#include "tricode/synth.hpp"
#include "tricode/training.hpp"

namespace py = pybind11;

namespace {

using namespace tricode;

std::string parent_dir(const std::string& path) {
  return std::filesystem::path(path).parent_path().string();
}

py::dict report_to_dict(const MetricReport& report) {
  py::dict d;
  d["metric"] = report.metric;
  d["value"] = report.value;
  d["query_count"] = report.query_count;
  d["skipped_queries"] = report.skipped_queries;
  return d;
}

std::string parse_to_json(const std::string& source, bool pretty) {
  return ast_to_json_text(parse(source), pretty);
}

std::string train_vocab(const std::string& corpus_path, int target_size) {
  const auto examples = load_corpus_jsonl(corpus_path);
  const std::string base = parent_dir(corpus_path);
  const auto vocab = Vocab::train(collect_corpus_surfaces(examples, base),
                                  target_size,
                                  collect_corpus_kinds(examples, base));
  return vocab.to_file_string();
}

std::string synth_jsonl(int count, uint64_t seed, bool paired,
                        int cluster_size) {
  SynthConfig config;
  config.count = count;
  config.seed = seed;
  config.paired = paired;
  config.cluster_size = cluster_size;
  std::string out;
  for (const auto& example : synth_corpus(config)) {
    out += corpus_example_to_json_line(example);
    out += '\n';
  }
  return out;
}

py::dict mrr_shared_pool(const std::vector<std::vector<double>>& queries,
                         const std::vector<std::vector<double>>& candidates,
                         const std::vector<int>& gold_indices, bool cosine) {
  if (queries.size() != gold_indices.size()) {
    throw ContractError("mrr: " + std::to_string(queries.size()) +
                        " queries vs " + std::to_string(gold_indices.size()) +
                        " gold indices");
  }
  std::vector<RetrievalQuery> built(queries.size());
  for (size_t i = 0; i < queries.size(); ++i) {
    built[i].query = queries[i];
    built[i].candidates = candidates;
    built[i].gold_index = gold_indices[i];
  }
  return report_to_dict(mrr(built, cosine));
}

py::dict map_at_r_py(const std::vector<std::vector<double>>& embeddings,
                     const std::vector<int>& cluster_ids, bool cosine) {
  return report_to_dict(map_at_r(embeddings, cluster_ids, cosine));
}

std::vector<std::vector<double>> embed_jsonl(const std::string& corpus_path,
                                             const std::string& checkpoint_path,
                                             const std::string& vocab_path,
                                             const std::string& mode) {
  const auto examples = load_corpus_jsonl(corpus_path);
  const auto vocab = Vocab::load(vocab_path);
  const std::string base = parent_dir(corpus_path);
  std::vector<ModalTriple> triples;
  triples.reserve(examples.size());
  for (const auto& example : examples) {
    triples.push_back(build_triple(example, vocab, base));
  }
  Model model = model_from_checkpoint(checkpoint_path);
  const Budgets budgets = train_config_from_checkpoint(checkpoint_path).budgets;
  return embed_corpus(model, triples, budgets, embed_mode_from_name(mode));
}

}  // namespace

PYBIND11_MODULE(_tricode, m) {
  m.doc() = "Syntax-aware multi-modal code representations";

  m.def("parse_to_json", &parse_to_json, py::arg("source"),
        py::arg("pretty") = false,
        "Parse mini-language source and serialize the tree as JSON.");
  m.def("grammar_kinds", [] { return grammar_internal_kinds(); },
        "Internal node kinds the mini-language parser can produce.");

  py::class_<Vocab>(m, "Vocab", "Byte-pair-encoding vocabulary.")
      .def_static("load", &Vocab::load, py::arg("path"))
      .def_static("from_file_string", &Vocab::from_file_string, py::arg("text"))
      .def("size", &Vocab::size)
      .def("merge_count", &Vocab::merge_count)
      .def("token", &Vocab::token, py::arg("id"))
      .def("id_of", &Vocab::id_of, py::arg("token"))
      .def("encode", &Vocab::encode, py::arg("text"))
      .def("decode", &Vocab::decode, py::arg("ids"))
      .def("to_file_string", &Vocab::to_file_string);

  m.def("train_vocab", &train_vocab, py::arg("corpus_path"),
        py::arg("target_size"),
        "Fit a vocabulary to a corpus JSONL file; returns the vocab file "
        "text (load with Vocab.from_file_string).");

  m.def("synth_jsonl", &synth_jsonl, py::arg("count") = 64,
        py::arg("seed") = 0, py::arg("paired") = true,
        py::arg("cluster_size") = 1,
        "Generate a controlled-gold corpus as JSONL text.");

  m.def("mrr", &mrr_shared_pool, py::arg("queries"), py::arg("candidates"),
        py::arg("gold_indices"), py::arg("cosine") = false,
        "Mean reciprocal rank of each query's gold candidate within a "
        "shared candidate pool.");
  m.def("map_at_r", &map_at_r_py, py::arg("embeddings"),
        py::arg("cluster_ids"), py::arg("cosine") = false,
        "Mean average precision at R over cluster-labeled embeddings.");

  m.def("embed_jsonl", &embed_jsonl, py::arg("corpus_path"),
        py::arg("checkpoint_path"), py::arg("vocab_path"),
        py::arg("mode") = "pl-ast",
        "Projection-space embedding of every corpus example under a trained "
        "checkpoint; mode is \"nl\" or \"pl-ast\".");
}
