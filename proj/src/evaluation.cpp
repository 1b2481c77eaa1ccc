#include "tricode/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "tricode/errors.hpp"

namespace tricode {

using nlohmann::ordered_json;

namespace {

double dot_product(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) {
    throw DimensionError("similarity: embedding sizes " +
                         std::to_string(a.size()) + " and " +
                         std::to_string(b.size()) + " differ");
  }
  double sum = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    sum += a[i] * b[i];
  }
  return sum;
}

double similarity(const std::vector<double>& a, const std::vector<double>& b,
                  bool cosine) {
  const double d = dot_product(a, b);
  if (!cosine) {
    return d;
  }
  const double na = std::sqrt(dot_product(a, a));
  const double nb = std::sqrt(dot_product(b, b));
  if (na == 0.0 || nb == 0.0) {
    return 0.0;
  }
  return d / (na * nb);
}

}  // namespace

const char* embed_mode_name(EmbedMode mode) {
  return mode == EmbedMode::NlOnly ? "nl" : "pl-ast";
}

EmbedMode embed_mode_from_name(const std::string& name) {
  if (name == "nl") return EmbedMode::NlOnly;
  if (name == "pl-ast") return EmbedMode::PlAst;
  throw ConfigError("unknown embed mode '" + name +
                    "' (expected nl or pl-ast)");
}

std::vector<std::vector<double>> embed_corpus(
    Model& model, const std::vector<ModalTriple>& triples,
    const Budgets& budgets, EmbedMode mode) {
  std::vector<std::vector<double>> out;
  out.reserve(triples.size());
  for (size_t i = 0; i < triples.size(); ++i) {
    const ModalTriple& triple = triples[i];
    if (mode == EmbedMode::NlOnly && !triple.has_nl) {
      throw ContractError("embed_corpus: example " + std::to_string(i) +
                          " has no comment to embed");
    }
    const PackedInput packed = mode == EmbedMode::NlOnly
                                   ? pack_nl_only(triple, budgets)
                                   : pack_pl_ast(triple, budgets);
    const std::vector<bool> pads = pad_flags(packed.segments);
    const Tensor hidden = model.encode(packed.ids, pads);
    const Tensor v = model.project(model.pooled(hidden, pads));
    out.push_back(v.data());
  }
  return out;
}

std::string metric_report_json(const MetricReport& report) {
  ordered_json j;
  j["metric"] = report.metric;
  j["value"] = report.value;
  j["query_count"] = report.query_count;
  j["skipped_queries"] = report.skipped_queries;
  return j.dump();
}

MetricReport metric_report_from_json(const std::string& text) {
  try {
    const ordered_json j = ordered_json::parse(text);
    MetricReport r;
    r.metric = j.at("metric").get<std::string>();
    r.value = j.at("value").get<double>();
    r.query_count = j.at("query_count").get<int>();
    r.skipped_queries = j.at("skipped_queries").get<int>();
    return r;
  } catch (const ordered_json::exception& e) {
    throw FormatError(std::string("metric report: ") + e.what());
  }
}

MetricReport mrr(const std::vector<RetrievalQuery>& queries, bool cosine) {
  if (queries.empty()) {
    throw ContractError("mrr: no queries");
  }
  double sum = 0.0;
  for (size_t q = 0; q < queries.size(); ++q) {
    const RetrievalQuery& query = queries[q];
    if (query.candidates.empty()) {
      throw ContractError("mrr: query " + std::to_string(q) +
                          " has no candidates");
    }
    if (query.gold_index < 0 ||
        query.gold_index >= static_cast<int>(query.candidates.size())) {
      throw ContractError("mrr: query " + std::to_string(q) +
                          " gold index out of range");
    }
    const double gold_sim = similarity(
        query.query, query.candidates[static_cast<size_t>(query.gold_index)],
        cosine);
    // Rank = 1 + number of candidates strictly better, where an equal score
    // at a lower index also counts as better (index tie-break).
    int rank = 1;
    for (size_t c = 0; c < query.candidates.size(); ++c) {
      if (static_cast<int>(c) == query.gold_index) {
        continue;
      }
      const double sim = similarity(query.query, query.candidates[c], cosine);
      if (sim > gold_sim ||
          (sim == gold_sim && static_cast<int>(c) < query.gold_index)) {
        ++rank;
      }
    }
    sum += 1.0 / static_cast<double>(rank);
  }
  MetricReport report;
  report.metric = "MRR";
  report.value = sum / static_cast<double>(queries.size());
  report.query_count = static_cast<int>(queries.size());
  return report;
}

MetricReport map_at_r(const std::vector<std::vector<double>>& embeddings,
                      const std::vector<int>& cluster_ids, bool cosine) {
  if (embeddings.empty()) {
    throw ContractError("map_at_r: no examples");
  }
  if (embeddings.size() != cluster_ids.size()) {
    throw ContractError("map_at_r: " + std::to_string(embeddings.size()) +
                        " embeddings but " + std::to_string(cluster_ids.size()) +
                        " cluster ids");
  }
  const int n = static_cast<int>(embeddings.size());

  double ap_sum = 0.0;
  int scored = 0;
  int skipped = 0;
  for (int q = 0; q < n; ++q) {
    int cluster_size = 0;
    for (int c = 0; c < n; ++c) {
      if (cluster_ids[static_cast<size_t>(c)] ==
          cluster_ids[static_cast<size_t>(q)]) {
        ++cluster_size;
      }
    }
    const int r = cluster_size - 1;
    if (r < 1) {
      ++skipped;
      continue;
    }

    // All other examples ranked by similarity, index breaking ties.
    std::vector<int> order;
    order.reserve(static_cast<size_t>(n) - 1);
    for (int c = 0; c < n; ++c) {
      if (c != q) {
        order.push_back(c);
      }
    }
    std::vector<double> sims(static_cast<size_t>(n));
    for (int c : order) {
      sims[static_cast<size_t>(c)] =
          similarity(embeddings[static_cast<size_t>(q)],
                     embeddings[static_cast<size_t>(c)], cosine);
    }
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      if (sims[static_cast<size_t>(a)] != sims[static_cast<size_t>(b)]) {
        return sims[static_cast<size_t>(a)] > sims[static_cast<size_t>(b)];
      }
      return a < b;
    });

    double ap = 0.0;
    int hits = 0;
    for (int k = 0; k < r; ++k) {
      if (cluster_ids[static_cast<size_t>(order[static_cast<size_t>(k)])] ==
          cluster_ids[static_cast<size_t>(q)]) {
        ++hits;
        ap += static_cast<double>(hits) / static_cast<double>(k + 1);
      }
    }
    ap_sum += ap / static_cast<double>(r);
    ++scored;
  }

  MetricReport report;
  report.metric = "MAP@R";
  report.value = scored > 0 ? ap_sum / static_cast<double>(scored) : 0.0;
  report.query_count = scored;
  report.skipped_queries = skipped;
  return report;
}

MetricReport eval_search(Model& model, const std::vector<ModalTriple>& triples,
                         const Budgets& budgets, bool cosine) {
  const std::vector<std::vector<double>> codes =
      embed_corpus(model, triples, budgets, EmbedMode::PlAst);
  std::vector<RetrievalQuery> queries;
  for (size_t i = 0; i < triples.size(); ++i) {
    if (!triples[i].has_nl) {
      continue;
    }
    std::vector<ModalTriple> one = {triples[i]};
    RetrievalQuery query;
    query.query = embed_corpus(model, one, budgets, EmbedMode::NlOnly)[0];
    query.candidates = codes;
    query.gold_index = static_cast<int>(i);
    queries.push_back(std::move(query));
  }
  if (queries.empty()) {
    throw ContractError("eval_search: corpus has no commented examples");
  }
  return mrr(queries, cosine);
}

MetricReport eval_clone(Model& model, const std::vector<ModalTriple>& triples,
                        const std::vector<int>& cluster_ids,
                        const Budgets& budgets, bool cosine) {
  if (triples.size() != cluster_ids.size()) {
    throw ContractError("eval_clone: " + std::to_string(triples.size()) +
                        " examples but " + std::to_string(cluster_ids.size()) +
                        " cluster ids");
  }
  for (size_t i = 0; i < cluster_ids.size(); ++i) {
    if (cluster_ids[i] < 0) {
      throw ContractError("eval_clone: example " + std::to_string(i) +
                          " has no cluster id");
    }
  }
  return map_at_r(embed_corpus(model, triples, budgets, EmbedMode::PlAst),
                  cluster_ids, cosine);
}

}  // namespace tricode
