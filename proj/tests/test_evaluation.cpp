#include "tricode/evaluation.hpp"

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <doctest.h>

#include "tricode/ast.hpp"
#include "tricode/bpe.hpp"
#include "tricode/errors.hpp"
#include "tricode/rng.hpp"

using namespace tricode;

namespace {

Vocab tiny_vocab() {
  const std::vector<std::string> corpus = {
      "def add(a, b):\n    return a + b\n",
      "def scale(value, factor):\n    return value * factor\n",
      "result = compute(x, y)\n",
  };
  return Vocab::train(corpus, 120, grammar_internal_kinds());
}

ModalTriple triple_of(const Vocab& vocab, const std::string& comment,
                      const std::string& code) {
  CorpusExample example;
  example.has_comment = !comment.empty();
  example.comment = comment;
  example.code = code;
  return build_triple(example, vocab);
}

Model small_model(const Vocab& vocab, uint64_t seed) {
  ModelConfig config;
  config.encoder.layers = 1;
  config.encoder.hidden_size = 8;
  config.encoder.heads = 2;
  config.encoder.ffn_size = 16;
  config.encoder.max_positions = 64;
  config.encoder.vocab_size = vocab.size();
  config.encoder.dropout_rate = 0.0;
  config.projection_dim = 6;
  config.pooling = Pooling::Cls;
  Model model(config);
  model.init(seed);
  return model;
}

// One query whose gold candidate lands at `gold_rank` among `pool` 1-D
// candidates, every similarity distinct.
RetrievalQuery query_with_gold_rank(int pool, int gold_rank) {
  RetrievalQuery q;
  q.query = {1.0};
  for (int c = 0; c < pool; ++c) {
    q.candidates.push_back({static_cast<double>(pool - c)});
  }
  q.gold_index = gold_rank - 1;  // candidates are already sorted descending
  return q;
}

}  // namespace

TEST_CASE("mrr is 1 when the gold candidate always ranks first") {
  std::vector<RetrievalQuery> queries = {query_with_gold_rank(5, 1),
                                         query_with_gold_rank(8, 1),
                                         query_with_gold_rank(3, 1)};
  const MetricReport report = mrr(queries);
  CHECK(report.metric == "MRR");
  CHECK(report.value == 1.0);
  CHECK(report.query_count == 3);
  CHECK(report.skipped_queries == 0);
}

TEST_CASE("mrr matches the direct formula for gold ranks 1, 2, 4") {
  std::vector<RetrievalQuery> queries = {query_with_gold_rank(6, 1),
                                         query_with_gold_rank(6, 2),
                                         query_with_gold_rank(6, 4)};
  const MetricReport report = mrr(queries);
  CHECK(report.value ==
        doctest::Approx((1.0 + 0.5 + 0.25) / 3.0).epsilon(1e-12));
}

TEST_CASE("mrr breaks equal similarities by candidate index") {
  RetrievalQuery q;
  q.query = {1.0};
  q.candidates = {{0.5}, {0.5}, {0.5}};

  q.gold_index = 0;
  CHECK(mrr({q}).value == 1.0);
  q.gold_index = 1;  // index 0 ties and wins on index
  CHECK(mrr({q}).value == 0.5);
  q.gold_index = 2;
  CHECK(mrr({q}).value == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("mrr on random embeddings approaches the harmonic baseline") {
  // Independent random vectors leave the gold's rank uniform on 1..pool, so
  // the expectation is H(pool)/pool.
  const int pool = 50;
  const int trials = 5000;
  Rng rng(20240817);
  std::vector<RetrievalQuery> queries;
  queries.reserve(trials);
  for (int t = 0; t < trials; ++t) {
    RetrievalQuery q;
    for (int d = 0; d < 8; ++d) q.query.push_back(rng.normal());
    for (int c = 0; c < pool; ++c) {
      std::vector<double> v;
      for (int d = 0; d < 8; ++d) v.push_back(rng.normal());
      q.candidates.push_back(std::move(v));
    }
    q.gold_index = static_cast<int>(rng.below(pool));
    queries.push_back(std::move(q));
  }
  double harmonic = 0.0;
  for (int k = 1; k <= pool; ++k) harmonic += 1.0 / k;
  const double baseline = harmonic / pool;
  CHECK(baseline == doctest::Approx(0.0900).epsilon(0.002));
  CHECK(std::abs(mrr(queries).value - baseline) < 0.01);
}

TEST_CASE("retrieval metrics ignore positive rescaling of all embeddings") {
  Rng rng(99);
  std::vector<RetrievalQuery> queries;
  for (int t = 0; t < 20; ++t) {
    RetrievalQuery q;
    for (int d = 0; d < 4; ++d) q.query.push_back(rng.normal());
    for (int c = 0; c < 10; ++c) {
      std::vector<double> v;
      for (int d = 0; d < 4; ++d) v.push_back(rng.normal());
      q.candidates.push_back(std::move(v));
    }
    q.gold_index = static_cast<int>(rng.below(10));
    queries.push_back(std::move(q));
  }
  const double before = mrr(queries).value;
  std::vector<RetrievalQuery> scaled = queries;
  for (RetrievalQuery& q : scaled) {
    for (double& x : q.query) x *= 3.75;
    for (auto& c : q.candidates) {
      for (double& x : c) x *= 3.75;
    }
  }
  CHECK(mrr(scaled).value == before);

  std::vector<std::vector<double>> embeddings;
  std::vector<int> clusters;
  for (int i = 0; i < 12; ++i) {
    std::vector<double> v;
    for (int d = 0; d < 4; ++d) v.push_back(rng.normal());
    embeddings.push_back(std::move(v));
    clusters.push_back(i % 4);
  }
  const double map_before = map_at_r(embeddings, clusters).value;
  for (auto& v : embeddings) {
    for (double& x : v) x *= 0.125;
  }
  CHECK(map_at_r(embeddings, clusters).value == map_before);
}

TEST_CASE("mrr never decreases when a gold candidate improves") {
  std::vector<RetrievalQuery> queries = {query_with_gold_rank(6, 4),
                                         query_with_gold_rank(6, 2)};
  const double before = mrr(queries).value;
  // Push the first query's gold to the top.
  queries[0].candidates[static_cast<size_t>(queries[0].gold_index)] = {100.0};
  CHECK(mrr(queries).value >= before);
}

TEST_CASE("mrr validates its queries") {
  CHECK_THROWS_AS(mrr({}), ContractError);

  RetrievalQuery no_candidates;
  no_candidates.query = {1.0};
  no_candidates.gold_index = 0;
  CHECK_THROWS_AS(mrr({no_candidates}), ContractError);

  RetrievalQuery bad_gold = query_with_gold_rank(3, 1);
  bad_gold.gold_index = 3;
  CHECK_THROWS_AS(mrr({bad_gold}), ContractError);
  bad_gold.gold_index = -1;
  CHECK_THROWS_AS(mrr({bad_gold}), ContractError);
}

TEST_CASE("map_at_r is 1 on orthogonal within-cluster-identical embeddings") {
  const std::vector<std::vector<double>> embeddings = {
      {1.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}, {0.0, 1.0}};
  const std::vector<int> clusters = {0, 0, 1, 1};
  const MetricReport report = map_at_r(embeddings, clusters);
  CHECK(report.metric == "MAP@R");
  CHECK(report.value == 1.0);
  CHECK(report.query_count == 4);
  CHECK(report.skipped_queries == 0);
}

TEST_CASE("map_at_r matches a hand-computed three-query case") {
  // Cluster 0 holds 10, 9, 8; the 8.5 singleton splits them when ranked.
  const std::vector<std::vector<double>> embeddings = {
      {10.0}, {9.0}, {8.5}, {8.0}};
  const std::vector<int> clusters = {0, 0, 1, 0};

  // Query 10: order 9, 8.5, 8; top-2 hits at rank 1 only -> AP 1/2.
  // Query 9:  order 10, 8.5, 8; AP 1/2.
  // Query 8:  order 10, 9, 8.5; hits at ranks 1, 2 -> AP 1.
  // Query 8.5: singleton, skipped.
  const MetricReport report = map_at_r(embeddings, clusters);
  CHECK(report.value == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(report.query_count == 3);
  CHECK(report.skipped_queries == 1);
}

TEST_CASE("map_at_r breaks equal similarities by candidate index") {
  const std::vector<std::vector<double>> embeddings = {
      {1.0}, {1.0}, {1.0}, {1.0}};
  const std::vector<int> clusters = {0, 0, 1, 1};
  // Every similarity ties, so each query sees the others in index order with
  // R = 1: queries 0 and 1 find a cluster mate first, 2 and 3 find index 0.
  const MetricReport report = map_at_r(embeddings, clusters);
  CHECK(report.value == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(report.query_count == 4);
}

TEST_CASE("map_at_r validates shapes and emptiness") {
  CHECK_THROWS_AS(map_at_r({}, {}), ContractError);
  CHECK_THROWS_AS(map_at_r({{1.0}, {2.0}}, {0}), ContractError);
}

TEST_CASE("metrics stay within the unit interval on random inputs") {
  Rng rng(7);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<RetrievalQuery> queries;
    const int pool = 2 + static_cast<int>(rng.below(10));
    for (int t = 0; t < 5; ++t) {
      RetrievalQuery q;
      for (int d = 0; d < 3; ++d) q.query.push_back(rng.normal());
      for (int c = 0; c < pool; ++c) {
        std::vector<double> v;
        for (int d = 0; d < 3; ++d) v.push_back(rng.normal());
        q.candidates.push_back(std::move(v));
      }
      q.gold_index = static_cast<int>(rng.below(pool));
      queries.push_back(std::move(q));
    }
    const double value = mrr(queries).value;
    CHECK(value >= 0.0);
    CHECK(value <= 1.0);

    std::vector<std::vector<double>> embeddings;
    std::vector<int> clusters;
    for (int i = 0; i < 9; ++i) {
      std::vector<double> v;
      for (int d = 0; d < 3; ++d) v.push_back(rng.normal());
      embeddings.push_back(std::move(v));
      clusters.push_back(static_cast<int>(rng.below(4)));
    }
    const MetricReport map_report = map_at_r(embeddings, clusters);
    CHECK(map_report.value >= 0.0);
    CHECK(map_report.value <= 1.0);
  }
}

TEST_CASE("the cosine flag changes rankings when magnitudes mislead") {
  RetrievalQuery q;
  q.query = {1.0, 0.0};
  q.candidates = {{5.0, 1.0}, {1.0, 0.0}};
  q.gold_index = 1;
  // Dot product favors the long distractor; cosine favors the aligned gold.
  CHECK(mrr({q}, false).value == 0.5);
  CHECK(mrr({q}, true).value == 1.0);
}

TEST_CASE("metric reports round-trip through JSON") {
  MetricReport report;
  report.metric = "MAP@R";
  report.value = 0.625;
  report.query_count = 48;
  report.skipped_queries = 2;
  const MetricReport back = metric_report_from_json(metric_report_json(report));
  CHECK(back.metric == report.metric);
  CHECK(back.value == report.value);
  CHECK(back.query_count == report.query_count);
  CHECK(back.skipped_queries == report.skipped_queries);

  CHECK_THROWS_AS(metric_report_from_json("nope"), FormatError);
}

TEST_CASE("embed_corpus is deterministic and respects the mode") {
  const Vocab vocab = tiny_vocab();
  Model model = small_model(vocab, 3);
  const std::vector<ModalTriple> triples = {
      triple_of(vocab, "adds two numbers", "def add(a, b):\n    return a + b\n"),
      triple_of(vocab, "scales a value",
                "def scale(value, factor):\n    return value * factor\n"),
  };
  const Budgets budgets{8, 16, 24};

  const auto once = embed_corpus(model, triples, budgets, EmbedMode::PlAst);
  const auto twice = embed_corpus(model, triples, budgets, EmbedMode::PlAst);
  REQUIRE(once.size() == 2);
  CHECK(once == twice);
  CHECK(once[0].size() == 6);
  CHECK(once[0] != once[1]);
}

TEST_CASE("NL-only embeddings carry no contribution from the code") {
  const Vocab vocab = tiny_vocab();
  Model model = small_model(vocab, 4);
  const Budgets budgets{8, 16, 24};
  const std::string comment = "adds two numbers";
  const std::vector<ModalTriple> a = {
      triple_of(vocab, comment, "def add(a, b):\n    return a + b\n")};
  const std::vector<ModalTriple> b = {
      triple_of(vocab, comment, "result = compute(x, y)\n")};

  CHECK(embed_corpus(model, a, budgets, EmbedMode::NlOnly) ==
        embed_corpus(model, b, budgets, EmbedMode::NlOnly));
  CHECK(embed_corpus(model, a, budgets, EmbedMode::PlAst) !=
        embed_corpus(model, b, budgets, EmbedMode::PlAst));
}

TEST_CASE("embed_corpus rejects NL mode on uncommented examples") {
  const Vocab vocab = tiny_vocab();
  Model model = small_model(vocab, 5);
  const std::vector<ModalTriple> triples = {
      triple_of(vocab, "", "def add(a, b):\n    return a + b\n")};
  CHECK_THROWS_AS(
      embed_corpus(model, triples, Budgets{8, 16, 24}, EmbedMode::NlOnly),
      ContractError);
  CHECK_NOTHROW(
      embed_corpus(model, triples, Budgets{8, 16, 24}, EmbedMode::PlAst));
}

TEST_CASE("embed mode names round-trip") {
  CHECK(embed_mode_from_name("nl") == EmbedMode::NlOnly);
  CHECK(embed_mode_from_name("pl-ast") == EmbedMode::PlAst);
  CHECK(std::string(embed_mode_name(EmbedMode::NlOnly)) == "nl");
  CHECK_THROWS_AS(embed_mode_from_name("code"), ConfigError);
}

TEST_CASE("eval_search queries every commented example against the pool") {
  const Vocab vocab = tiny_vocab();
  Model model = small_model(vocab, 6);
  const Budgets budgets{8, 16, 24};
  const std::vector<ModalTriple> triples = {
      triple_of(vocab, "adds two numbers", "def add(a, b):\n    return a + b\n"),
      triple_of(vocab, "", "flag = not ready\n"),
      triple_of(vocab, "compute a result", "result = compute(x, y)\n"),
  };
  const MetricReport report = eval_search(model, triples, budgets);
  CHECK(report.metric == "MRR");
  CHECK(report.query_count == 2);  // the uncommented example is pool-only
  CHECK(report.value >= 0.0);
  CHECK(report.value <= 1.0);

  const std::vector<ModalTriple> uncommented = {
      triple_of(vocab, "", "flag = not ready\n"),
      triple_of(vocab, "", "result = compute(x, y)\n")};
  CHECK_THROWS_AS(eval_search(model, uncommented, budgets), ContractError);
}

TEST_CASE("eval_clone requires a cluster id per example") {
  const Vocab vocab = tiny_vocab();
  Model model = small_model(vocab, 8);
  const Budgets budgets{8, 16, 24};
  const std::vector<ModalTriple> triples = {
      triple_of(vocab, "", "def add(a, b):\n    return a + b\n"),
      triple_of(vocab, "", "result = compute(x, y)\n"),
  };
  CHECK_THROWS_AS(eval_clone(model, triples, {0}, budgets), ContractError);
  CHECK_THROWS_AS(eval_clone(model, triples, {0, -1}, budgets), ContractError);

  const MetricReport report = eval_clone(model, triples, {0, 0}, budgets);
  CHECK(report.metric == "MAP@R");
  CHECK(report.query_count == 2);
}
