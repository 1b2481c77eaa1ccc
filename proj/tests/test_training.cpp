#include "tricode/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <doctest.h>

#include "tricode/assembly.hpp"
#include "tricode/ast.hpp"
#include "tricode/bpe.hpp"
#include "tricode/encoder.hpp"
#include "tricode/errors.hpp"

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

std::vector<ModalTriple> corpus_triples(const Vocab& vocab, bool with_comment,
                                        int count) {
  const std::vector<std::pair<std::string, std::string>> sources = {
      {"adds two numbers", "def add(a, b):\n    return a + b\n"},
      {"scales a value", "def scale(value, factor):\n    return value * factor\n"},
      {"compute a result", "result = compute(x, y)\n"},
      {"negate the flag", "flag = not ready\n"},
  };
  std::vector<ModalTriple> triples;
  for (int i = 0; i < count; ++i) {
    CorpusExample example;
    example.has_comment = with_comment;
    const auto& [comment, code] = sources[static_cast<size_t>(i) % sources.size()];
    if (with_comment) example.comment = comment;
    example.code = code;
    triples.push_back(build_triple(example, vocab));
  }
  return triples;
}

ModelConfig small_model_config(const Vocab& vocab) {
  ModelConfig config;
  config.encoder.layers = 1;
  config.encoder.hidden_size = 8;
  config.encoder.heads = 2;
  config.encoder.ffn_size = 16;
  config.encoder.max_positions = 64;
  config.encoder.vocab_size = vocab.size();
  config.encoder.dropout_rate = 0.1;
  config.projection_dim = 6;
  config.pooling = Pooling::Cls;
  return config;
}

TrainConfig small_train_config() {
  TrainConfig config;
  config.batch_size = 2;
  config.steps = 4;
  config.learning_rate = 1e-3;
  config.l2_lambda = 1e-4;
  config.seed = 11;
  config.budgets = Budgets{8, 16, 24};
  return config;
}

using Snapshot = std::vector<std::pair<std::string, std::vector<double>>>;

Snapshot snapshot(Model& model) {
  Snapshot out;
  for (const std::string& name : model.params().names()) {
    out.emplace_back(name, model.params().get(name).data());
  }
  return out;
}

bool reports_equal(const LossReport& a, const LossReport& b) {
  return a.step == b.step && a.mmlm == b.mmlm && a.ip == b.ip &&
         a.tep == b.tep && a.mcl == b.mcl && a.l2 == b.l2 &&
         a.total == b.total;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("train config validation rejects bad settings") {
  TrainConfig config = small_train_config();
  CHECK_NOTHROW(config.validate());

  TrainConfig bad = config;
  bad.batch_size = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  bad = config;
  bad.batch_size = 1;  // contrastive pairs need company
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad.mcl = false;
  CHECK_NOTHROW(bad.validate());

  bad = config;
  bad.steps = -1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  bad = config;
  bad.learning_rate = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  bad = config;
  bad.l2_lambda = -1e-9;
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  bad = config;
  bad.mmlm = bad.ip = bad.tep = bad.mcl = false;
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  bad = config;
  bad.tep_negatives_per_positive = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  bad = config;
  bad.clip_norm = -0.5;
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  bad = config;
  bad.warmup_steps = -1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  bad = config;
  bad.checkpoint_every = -1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("trainer rejects corpora that cannot fill batches") {
  const Vocab vocab = tiny_vocab();
  Model model(small_model_config(vocab));
  model.init(1);
  TrainConfig config = small_train_config();

  CHECK_THROWS_AS(Trainer(model, vocab, {}, config), ContractError);

  // One paired example cannot fill batches of two.
  auto one = corpus_triples(vocab, true, 1);
  CHECK_THROWS_AS(Trainer(model, vocab, one, config), ConfigError);

  // A mixed corpus needs every present kind to fill a batch.
  auto mixed = corpus_triples(vocab, true, 2);
  mixed.push_back(corpus_triples(vocab, false, 1)[0]);
  CHECK_THROWS_AS(Trainer(model, vocab, mixed, config), ConfigError);

  CHECK_NOTHROW(Trainer(model, vocab, corpus_triples(vocab, true, 2), config));
}

TEST_CASE("loss reports round-trip through JSON") {
  LossReport report;
  report.step = 17;
  report.mmlm = 3.25;
  report.ip = 0.640625;
  report.tep = 0.0;
  report.mcl = 12.5;
  report.l2 = 1.52587890625e-05;
  report.total = 16.40625 + 1.52587890625e-05;

  const LossReport back = loss_report_from_json(loss_report_json(report));
  CHECK(reports_equal(report, back));

  CHECK_THROWS_AS(loss_report_from_json("not json"), FormatError);
  CHECK_THROWS_AS(loss_report_from_json("{\"step\": 1}"), FormatError);
}

TEST_CASE("config serialization round-trips and validates names") {
  const Vocab vocab = tiny_vocab();
  const ModelConfig model_config = small_model_config(vocab);
  const std::string model_json = model_config_to_json(model_config);
  CHECK(model_config_to_json(model_config_from_json_text(model_json)) ==
        model_json);

  TrainConfig train_config = small_train_config();
  train_config.sum_losses = true;
  train_config.warmup_steps = 7;
  const std::string train_json = train_config_to_json(train_config);
  CHECK(train_config_to_json(train_config_from_json_text(train_json)) ==
        train_json);

  CHECK(pooling_from_name("cls") == Pooling::Cls);
  CHECK(pooling_from_name("mean") == Pooling::Mean);
  CHECK(pooling_name(Pooling::Mean) == "mean");
  CHECK_THROWS_AS(pooling_from_name("max"), ConfigError);
  CHECK_THROWS_AS(model_config_from_json_text("{"), FormatError);
  CHECK_THROWS_AS(train_config_from_json_text("[]"), FormatError);
}

TEST_CASE("clip_global_norm rescales only above the ceiling") {
  ParamSet params;
  Tensor a = Tensor::zeros({2});
  Tensor b = Tensor::zeros({1});
  params.add("a", a);
  params.add("b", b);
  params.zero_grad();
  a.mutable_grad() = {3.0, 0.0};
  b.mutable_grad() = {4.0};

  SUBCASE("above the ceiling gradients shrink onto it") {
    const double norm = clip_global_norm(params, 1.0);
    CHECK(norm == doctest::Approx(5.0).epsilon(1e-12));
    CHECK(a.grad()[0] == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(a.grad()[1] == 0.0);
    CHECK(b.grad()[0] == doctest::Approx(0.8).epsilon(1e-12));
  }

  SUBCASE("below the ceiling gradients are untouched") {
    const double norm = clip_global_norm(params, 10.0);
    CHECK(norm == doctest::Approx(5.0).epsilon(1e-12));
    CHECK(a.grad()[0] == 3.0);
    CHECK(b.grad()[0] == 4.0);
  }

  SUBCASE("a non-positive ceiling disables clipping") {
    const double norm = clip_global_norm(params, 0.0);
    CHECK(norm == doctest::Approx(5.0).epsilon(1e-12));
    CHECK(a.grad()[0] == 3.0);
    CHECK(b.grad()[0] == 4.0);
  }
}

TEST_CASE("the step total is the sum of the enabled terms") {
  const Vocab vocab = tiny_vocab();
  Model model(small_model_config(vocab));
  model.init(1);
  Trainer trainer(model, vocab, corpus_triples(vocab, true, 4),
                  small_train_config());

  for (int s = 0; s < 3; ++s) {
    const LossReport r = trainer.run_step();
    CHECK(r.step == s + 1);
    CHECK(r.mmlm > 0.0);
    CHECK(r.ip > 0.0);
    CHECK(r.tep > 0.0);
    CHECK(r.mcl > 0.0);
    CHECK(r.l2 > 0.0);
    CHECK(std::abs(r.total - (r.mmlm + r.ip + r.tep + r.mcl + r.l2)) <
          1e-9 * std::max(1.0, std::abs(r.total)));
  }
  CHECK(trainer.step() == 3);
}

TEST_CASE("disabled objectives report zero and leave their heads frozen") {
  const Vocab vocab = tiny_vocab();
  Model model(small_model_config(vocab));
  model.init(1);

  TrainConfig config = small_train_config();
  config.ip = false;
  config.tep = false;
  config.mcl = false;
  config.l2_lambda = 0.0;

  Trainer trainer(model, vocab, corpus_triples(vocab, true, 4), config);
  const Snapshot before = snapshot(model);

  for (int s = 0; s < 3; ++s) {
    const LossReport r = trainer.run_step();
    CHECK(r.mmlm > 0.0);
    CHECK(r.ip == 0.0);
    CHECK(r.tep == 0.0);
    CHECK(r.mcl == 0.0);
    CHECK(r.l2 == 0.0);
    CHECK(r.total == r.mmlm);
  }

  const Snapshot after = snapshot(model);
  bool mlm_head_moved = false;
  for (size_t i = 0; i < before.size(); ++i) {
    const std::string& name = before[i].first;
    const bool untouched_head =
        name == "ip_w" || name == "ip_b" || name.rfind("proj_", 0) == 0;
    if (untouched_head) {
      // No loss term reaches these, so Adam must leave them bit-identical.
      CHECK(before[i].second == after[i].second);
    }
    if (name == "mlm_w" && before[i].second != after[i].second) {
      mlm_head_moved = true;
    }
  }
  CHECK(mlm_head_moved);
}

TEST_CASE("the same seed reproduces losses and weights bit for bit") {
  const Vocab vocab = tiny_vocab();
  const TrainConfig config = small_train_config();

  Model model_a{small_model_config(vocab)};
  model_a.init(9);
  Trainer trainer_a(model_a, vocab, corpus_triples(vocab, true, 4), config);

  Model model_b{small_model_config(vocab)};
  model_b.init(9);
  Trainer trainer_b(model_b, vocab, corpus_triples(vocab, true, 4), config);

  for (int s = 0; s < 4; ++s) {
    CHECK(reports_equal(trainer_a.run_step(), trainer_b.run_step()));
  }
  CHECK(snapshot(model_a) == snapshot(model_b));

  // A different seed diverges immediately.
  Model model_c{small_model_config(vocab)};
  model_c.init(9);
  TrainConfig other = config;
  other.seed = 12;
  Trainer trainer_c(model_c, vocab, corpus_triples(vocab, true, 4), other);
  CHECK_FALSE(reports_equal(trainer_a.run_step(), trainer_c.run_step()));
}

TEST_CASE("literal sum reduction scales the per-token objectives only") {
  const Vocab vocab = tiny_vocab();
  const auto triples = corpus_triples(vocab, true, 4);

  Model mean_model{small_model_config(vocab)};
  mean_model.init(3);
  Trainer mean_trainer(mean_model, vocab, triples, small_train_config());
  const LossReport mean_report = mean_trainer.run_step();

  Model sum_model{small_model_config(vocab)};
  sum_model.init(3);
  TrainConfig sum_config = small_train_config();
  sum_config.sum_losses = true;
  Trainer sum_trainer(sum_model, vocab, triples, sum_config);
  const LossReport sum_report = sum_trainer.run_step();

  // Identical forward pass at step one, so the sums dominate their means and
  // the batch-level contrastive and decay terms match exactly.
  CHECK(sum_report.mmlm > mean_report.mmlm);
  CHECK(sum_report.ip > mean_report.ip);
  CHECK(sum_report.tep > mean_report.tep);
  CHECK(sum_report.mcl == mean_report.mcl);
  CHECK(sum_report.l2 == mean_report.l2);
}

TEST_CASE("a short run reduces every objective on a small corpus") {
  const Vocab vocab = tiny_vocab();
  ModelConfig model_config = small_model_config(vocab);
  model_config.encoder.dropout_rate = 0.0;
  Model model(model_config);
  model.init(5);

  TrainConfig config = small_train_config();
  config.batch_size = 4;
  config.steps = 30;
  config.learning_rate = 2e-3;
  config.seed = 5;

  Trainer trainer(model, vocab, corpus_triples(vocab, true, 8), config);
  const std::vector<LossReport> reports = trainer.run();
  REQUIRE(reports.size() == 30);

  auto mean_total = [&](size_t from, size_t to) {
    double sum = 0.0;
    for (size_t i = from; i < to; ++i) sum += reports[i].total;
    return sum / static_cast<double>(to - from);
  };
  CHECK(mean_total(25, 30) < mean_total(0, 5));
}

TEST_CASE("an unpaired corpus trains against swapped-modality pairs") {
  const Vocab vocab = tiny_vocab();
  Model model(small_model_config(vocab));
  model.init(2);
  Trainer trainer(model, vocab, corpus_triples(vocab, false, 4),
                  small_train_config());
  const LossReport r = trainer.run_step();
  CHECK(r.mmlm > 0.0);
  CHECK(r.mcl > 0.0);
  CHECK(std::isfinite(r.total));
}

TEST_CASE("warmup caps the first update at the scaled learning rate") {
  const Vocab vocab = tiny_vocab();
  Model model(small_model_config(vocab));
  model.init(4);

  TrainConfig config = small_train_config();
  config.learning_rate = 0.1;
  config.warmup_steps = 10;
  config.l2_lambda = 0.0;

  Trainer trainer(model, vocab, corpus_triples(vocab, true, 4), config);
  const Snapshot before = snapshot(model);
  trainer.run_step();
  const Snapshot after = snapshot(model);

  double max_delta = 0.0;
  for (size_t i = 0; i < before.size(); ++i) {
    for (size_t k = 0; k < before[i].second.size(); ++k) {
      max_delta = std::max(max_delta,
                           std::abs(after[i].second[k] - before[i].second[k]));
    }
  }
  CHECK(max_delta > 0.0);
  // Adam moves each weight by at most the effective rate, here lr/warmup.
  CHECK(max_delta <= 0.1 / 10.0 + 1e-12);
}

TEST_CASE("checkpoints restore weights, optimizer state, and position") {
  const Vocab vocab = tiny_vocab();
  const auto triples = corpus_triples(vocab, true, 4);
  const std::string path = temp_path("tricode_test_ckpt_roundtrip.json");

  Model model_a{small_model_config(vocab)};
  model_a.init(6);
  TrainConfig config = small_train_config();
  config.seed = 21;
  Trainer trainer_a(model_a, vocab, triples, config);
  for (int s = 0; s < 3; ++s) trainer_a.run_step();
  trainer_a.save_checkpoint(path);
  CHECK_FALSE(std::filesystem::exists(path + ".tmp"));

  Model model_b{small_model_config(vocab)};
  model_b.init(999);  // overwritten by the checkpoint
  Trainer trainer_b(model_b, vocab, triples, config);
  trainer_b.load_checkpoint(path);
  CHECK(trainer_b.step() == 3);
  CHECK(snapshot(model_a) == snapshot(model_b));

  // Both continuations replay the identical stream.
  for (int s = 0; s < 2; ++s) {
    CHECK(reports_equal(trainer_a.run_step(), trainer_b.run_step()));
  }
  CHECK(snapshot(model_a) == snapshot(model_b));
  std::filesystem::remove(path);
}

TEST_CASE("a resumed run matches an uninterrupted one bit for bit") {
  const Vocab vocab = tiny_vocab();
  const auto triples = corpus_triples(vocab, true, 4);
  const std::string path = temp_path("tricode_test_ckpt_resume.json");

  TrainConfig config = small_train_config();
  config.steps = 6;

  Model straight_model{small_model_config(vocab)};
  straight_model.init(8);
  Trainer straight(straight_model, vocab, triples, config);
  std::vector<LossReport> straight_reports;
  for (int s = 0; s < 6; ++s) straight_reports.push_back(straight.run_step());

  Model first_model{small_model_config(vocab)};
  first_model.init(8);
  Trainer first_half(first_model, vocab, triples, config);
  for (int s = 0; s < 3; ++s) first_half.run_step();
  first_half.save_checkpoint(path);

  Model second_model{small_model_config(vocab)};
  second_model.init(0);
  Trainer second_half(second_model, vocab, triples, config);
  second_half.load_checkpoint(path);
  for (int s = 0; s < 3; ++s) {
    CHECK(reports_equal(second_half.run_step(),
                        straight_reports[static_cast<size_t>(3 + s)]));
  }
  CHECK(snapshot(straight_model) == snapshot(second_model));
  std::filesystem::remove(path);
}

TEST_CASE("checkpoints refuse configuration mismatches") {
  const Vocab vocab = tiny_vocab();
  const auto triples = corpus_triples(vocab, true, 4);
  const std::string path = temp_path("tricode_test_ckpt_mismatch.json");

  Model model(small_model_config(vocab));
  model.init(1);
  const TrainConfig config = small_train_config();
  Trainer trainer(model, vocab, triples, config);
  trainer.run_step();
  trainer.save_checkpoint(path);

  // Different encoder geometry.
  ModelConfig wide_config = small_model_config(vocab);
  wide_config.encoder.hidden_size = 16;
  wide_config.encoder.ffn_size = 32;
  Model wide(wide_config);
  wide.init(1);
  Trainer wide_trainer(wide, vocab, triples, config);
  CHECK_THROWS_AS(wide_trainer.load_checkpoint(path), ConfigError);

  // Different data-stream settings invalidate the replay.
  Model same_a(small_model_config(vocab));
  same_a.init(1);
  TrainConfig other_seed = config;
  other_seed.seed = config.seed + 1;
  Trainer seed_trainer(same_a, vocab, triples, other_seed);
  CHECK_THROWS_AS(seed_trainer.load_checkpoint(path), ConfigError);

  Model same_b(small_model_config(vocab));
  same_b.init(1);
  TrainConfig other_batch = config;
  other_batch.batch_size = 4;
  Trainer batch_trainer(same_b, vocab, triples, other_batch);
  CHECK_THROWS_AS(batch_trainer.load_checkpoint(path), ConfigError);

  std::filesystem::remove(path);
}

TEST_CASE("malformed checkpoints raise format errors") {
  const Vocab vocab = tiny_vocab();
  const auto triples = corpus_triples(vocab, true, 4);
  Model model(small_model_config(vocab));
  model.init(1);
  Trainer trainer(model, vocab, triples, small_train_config());

  CHECK_THROWS_AS(trainer.load_checkpoint(temp_path("tricode_test_missing.json")),
                  FormatError);

  const std::string garbage = temp_path("tricode_test_ckpt_garbage.json");
  std::ofstream(garbage) << "definitely { not json";
  CHECK_THROWS_AS(trainer.load_checkpoint(garbage), FormatError);
  std::filesystem::remove(garbage);

  const std::string foreign = temp_path("tricode_test_ckpt_foreign.json");
  std::ofstream(foreign) << "{\"format\": \"something-else\"}";
  CHECK_THROWS_AS(trainer.load_checkpoint(foreign), FormatError);
  std::filesystem::remove(foreign);

  const std::string future = temp_path("tricode_test_ckpt_future.json");
  std::ofstream(future)
      << "{\"format\": \"tricode-checkpoint\", \"version\": 2}";
  CHECK_THROWS_AS(trainer.load_checkpoint(future), FormatError);
  std::filesystem::remove(future);
}

TEST_CASE("model_from_checkpoint rebuilds an identical encoder") {
  const Vocab vocab = tiny_vocab();
  const auto triples = corpus_triples(vocab, true, 4);
  const std::string path = temp_path("tricode_test_ckpt_model_only.json");

  Model model(small_model_config(vocab));
  model.init(13);
  Trainer trainer(model, vocab, triples, small_train_config());
  trainer.run_step();
  trainer.run_step();
  trainer.save_checkpoint(path);

  Model restored = model_from_checkpoint(path);
  CHECK(model_config_to_json(restored.config()) ==
        model_config_to_json(model.config()));
  CHECK(snapshot(restored) == snapshot(model));

  const PackedInput packed = pack(triples[0], Budgets{8, 16, 24});
  const std::vector<bool> pads = pad_flags(packed.segments);
  const Tensor original_out = model.encode(packed.ids, pads);
  const Tensor restored_out = restored.encode(packed.ids, pads);
  CHECK(original_out.data() == restored_out.data());
  std::filesystem::remove(path);
}

TEST_CASE("run writes a parseable log and a final checkpoint") {
  const Vocab vocab = tiny_vocab();
  const std::string log_path = temp_path("tricode_test_train_log.jsonl");
  const std::string ckpt_path = temp_path("tricode_test_train_final.json");
  std::filesystem::remove(log_path);

  Model model(small_model_config(vocab));
  model.init(7);
  TrainConfig config = small_train_config();
  config.steps = 5;
  config.checkpoint_every = 2;
  Trainer trainer(model, vocab, corpus_triples(vocab, true, 4), config);
  const std::vector<LossReport> reports = trainer.run(log_path, ckpt_path);
  REQUIRE(reports.size() == 5);

  std::ifstream log(log_path);
  REQUIRE(log.is_open());
  std::string line;
  size_t lines = 0;
  while (std::getline(log, line)) {
    REQUIRE(lines < reports.size());
    CHECK(reports_equal(loss_report_from_json(line), reports[lines]));
    ++lines;
  }
  CHECK(lines == 5);

  Model final_model = model_from_checkpoint(ckpt_path);
  CHECK(snapshot(final_model) == snapshot(model));

  std::filesystem::remove(log_path);
  std::filesystem::remove(ckpt_path);
}
