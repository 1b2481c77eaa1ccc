#pragma once

#include <string>
#include <vector>

#include "tricode/assembly.hpp"
#include "tricode/encoder.hpp"

namespace tricode {

// Which side of an example is embedded: the comment alone, or code plus its
// serialized tree.
enum class EmbedMode { NlOnly, PlAst };

const char* embed_mode_name(EmbedMode mode);
EmbedMode embed_mode_from_name(const std::string& name);

// Projection-space vector per example, in corpus order.  Inference mode, so
// the result is a pure function of weights and input.  NL-only embedding of
// an example without a comment is a contract violation.
std::vector<std::vector<double>> embed_corpus(
    Model& model, const std::vector<ModalTriple>& triples,
    const Budgets& budgets, EmbedMode mode);

// One ranked-retrieval query: the gold candidate must appear in `candidates`
// at `gold_index`.
struct RetrievalQuery {
  std::vector<double> query;
  std::vector<std::vector<double>> candidates;
  int gold_index = -1;
};

struct MetricReport {
  std::string metric;  // "MRR" | "MAP@R"
  double value = 0.0;
  int query_count = 0;
  int skipped_queries = 0;  // singleton-cluster queries excluded from MAP@R
};

std::string metric_report_json(const MetricReport& report);
MetricReport metric_report_from_json(const std::string& text);

// Mean reciprocal rank of the gold candidate under descending similarity.
// Equal scores rank by candidate index, so ordering is total.
MetricReport mrr(const std::vector<RetrievalQuery>& queries,
                 bool cosine = false);

// Mean average precision at R, where each example queries all others and
// R = (its cluster size - 1).  Singleton clusters are skipped and counted.
MetricReport map_at_r(const std::vector<std::vector<double>>& embeddings,
                      const std::vector<int>& cluster_ids,
                      bool cosine = false);

// Code search over one corpus: every paired example's comment queries the
// code+tree embeddings of the whole pool; gold is the example itself.
MetricReport eval_search(Model& model, const std::vector<ModalTriple>& triples,
                         const Budgets& budgets, bool cosine = false);

// Clone retrieval over one corpus: code+tree embeddings, clusters from the
// corpus cluster ids (one id per triple, parallel vectors).
MetricReport eval_clone(Model& model, const std::vector<ModalTriple>& triples,
                        const std::vector<int>& cluster_ids,
                        const Budgets& budgets, bool cosine = false);

}  // namespace tricode
