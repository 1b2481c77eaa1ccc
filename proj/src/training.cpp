#include "tricode/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "tricode/errors.hpp"
#include "tricode/rng.hpp"

namespace tricode {

using nlohmann::ordered_json;

namespace {

// Third derive_seed component under kEpochOrder: which stream the shuffle
// belongs to.
constexpr uint64_t kScheduleStream = 0;
constexpr uint64_t kPairedStream = 1;
constexpr uint64_t kUnpairedStream = 2;

int batches_per_round(size_t kind_count, int batch_size) {
  if (kind_count == 0) {
    return 0;
  }
  const int rounded = static_cast<int>(
      (kind_count + static_cast<size_t>(batch_size) / 2) /
      static_cast<size_t>(batch_size));
  return std::max(1, rounded);
}

ordered_json encoder_config_json(const EncoderConfig& e) {
  ordered_json j;
  j["layers"] = e.layers;
  j["hidden_size"] = e.hidden_size;
  j["heads"] = e.heads;
  j["ffn_size"] = e.ffn_size;
  j["max_positions"] = e.max_positions;
  j["vocab_size"] = e.vocab_size;
  j["dropout_rate"] = e.dropout_rate;
  return j;
}

template <class J>
EncoderConfig encoder_config_from(const J& j) {
  EncoderConfig e;
  e.layers = j.at("layers").template get<int>();
  e.hidden_size = j.at("hidden_size").template get<int>();
  e.heads = j.at("heads").template get<int>();
  e.ffn_size = j.at("ffn_size").template get<int>();
  e.max_positions = j.at("max_positions").template get<int>();
  e.vocab_size = j.at("vocab_size").template get<int>();
  e.dropout_rate = j.at("dropout_rate").template get<double>();
  return e;
}

ordered_json model_config_json(const ModelConfig& m) {
  ordered_json j;
  j["encoder"] = encoder_config_json(m.encoder);
  j["projection_dim"] = m.projection_dim;
  j["pooling"] = pooling_name(m.pooling);
  return j;
}

template <class J>
ModelConfig model_config_from(const J& j) {
  ModelConfig m;
  m.encoder = encoder_config_from(j.at("encoder"));
  m.projection_dim = j.at("projection_dim").template get<int>();
  m.pooling = pooling_from_name(j.at("pooling").template get<std::string>());
  return m;
}

ordered_json train_config_json(const TrainConfig& t) {
  ordered_json j;
  j["batch_size"] = t.batch_size;
  j["steps"] = t.steps;
  j["learning_rate"] = t.learning_rate;
  j["l2_lambda"] = t.l2_lambda;
  j["seed"] = t.seed;
  j["mmlm"] = t.mmlm;
  j["ip"] = t.ip;
  j["tep"] = t.tep;
  j["mcl"] = t.mcl;
  j["sum_losses"] = t.sum_losses;
  j["tep_negatives_per_positive"] = t.tep_negatives_per_positive;
  j["tep_full_pairs"] = t.tep_full_pairs;
  j["clip_norm"] = t.clip_norm;
  j["warmup_steps"] = t.warmup_steps;
  j["checkpoint_every"] = t.checkpoint_every;
  j["budget_nl"] = t.budgets.nl;
  j["budget_pl"] = t.budgets.pl;
  j["budget_ast"] = t.budgets.ast;
  return j;
}

template <class J>
TrainConfig train_config_from(const J& j) {
  TrainConfig t;
  t.batch_size = j.at("batch_size").template get<int>();
  t.steps = j.at("steps").template get<int>();
  t.learning_rate = j.at("learning_rate").template get<double>();
  t.l2_lambda = j.at("l2_lambda").template get<double>();
  t.seed = j.at("seed").template get<uint64_t>();
  t.mmlm = j.at("mmlm").template get<bool>();
  t.ip = j.at("ip").template get<bool>();
  t.tep = j.at("tep").template get<bool>();
  t.mcl = j.at("mcl").template get<bool>();
  t.sum_losses = j.at("sum_losses").template get<bool>();
  t.tep_negatives_per_positive =
      j.at("tep_negatives_per_positive").template get<int>();
  t.tep_full_pairs = j.at("tep_full_pairs").template get<bool>();
  t.clip_norm = j.at("clip_norm").template get<double>();
  t.warmup_steps = j.at("warmup_steps").template get<int>();
  t.checkpoint_every = j.at("checkpoint_every").template get<int>();
  t.budgets.nl = j.at("budget_nl").template get<int>();
  t.budgets.pl = j.at("budget_pl").template get<int>();
  t.budgets.ast = j.at("budget_ast").template get<int>();
  return t;
}

void write_atomically(const std::string& path, const std::string& content) {
  const std::string temp = path + ".tmp";
  {
    std::ofstream out(temp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw FormatError("cannot write " + temp);
    }
    out << content;
    if (!out) {
      throw FormatError("short write to " + temp);
    }
  }
  if (std::rename(temp.c_str(), path.c_str()) != 0) {
    std::remove(temp.c_str());
    throw FormatError("cannot replace " + path);
  }
}

}  // namespace

std::string pooling_name(Pooling p) {
  return p == Pooling::Cls ? "cls" : "mean";
}

Pooling pooling_from_name(const std::string& name) {
  if (name == "cls") return Pooling::Cls;
  if (name == "mean") return Pooling::Mean;
  throw ConfigError("unknown pooling '" + name + "' (expected cls or mean)");
}

std::string model_config_to_json(const ModelConfig& config) {
  return model_config_json(config).dump();
}

ModelConfig model_config_from_json_text(const std::string& text) {
  try {
    return model_config_from(ordered_json::parse(text));
  } catch (const ordered_json::exception& e) {
    throw FormatError(std::string("model config: ") + e.what());
  }
}

std::string train_config_to_json(const TrainConfig& config) {
  return train_config_json(config).dump();
}

TrainConfig train_config_from_json_text(const std::string& text) {
  try {
    return train_config_from(ordered_json::parse(text));
  } catch (const ordered_json::exception& e) {
    throw FormatError(std::string("train config: ") + e.what());
  }
}

void TrainConfig::validate() const {
  if (batch_size < 1) {
    throw ConfigError("train config: batch_size must be positive");
  }
  if (mcl && batch_size < 2) {
    throw ConfigError(
        "train config: the contrastive objective needs batch_size >= 2");
  }
  if (steps < 0) {
    throw ConfigError("train config: steps must be non-negative");
  }
  if (learning_rate <= 0.0) {
    throw ConfigError("train config: learning_rate must be positive");
  }
  if (l2_lambda < 0.0) {
    throw ConfigError("train config: l2_lambda must be non-negative");
  }
  if (!mmlm && !ip && !tep && !mcl) {
    throw ConfigError("train config: every objective is disabled");
  }
  if (tep_negatives_per_positive < 1) {
    throw ConfigError(
        "train config: tep_negatives_per_positive must be positive");
  }
  if (clip_norm < 0.0) {
    throw ConfigError("train config: clip_norm must be non-negative");
  }
  if (warmup_steps < 0) {
    throw ConfigError("train config: warmup_steps must be non-negative");
  }
  if (checkpoint_every < 0) {
    throw ConfigError("train config: checkpoint_every must be non-negative");
  }
}

std::string loss_report_json(const LossReport& report) {
  ordered_json j;
  j["step"] = report.step;
  j["mmlm"] = report.mmlm;
  j["ip"] = report.ip;
  j["tep"] = report.tep;
  j["mcl"] = report.mcl;
  j["l2"] = report.l2;
  j["total"] = report.total;
  return j.dump();
}

LossReport loss_report_from_json(const std::string& line) {
  try {
    const ordered_json j = ordered_json::parse(line);
    LossReport r;
    r.step = j.at("step").get<int64_t>();
    r.mmlm = j.at("mmlm").get<double>();
    r.ip = j.at("ip").get<double>();
    r.tep = j.at("tep").get<double>();
    r.mcl = j.at("mcl").get<double>();
    r.l2 = j.at("l2").get<double>();
    r.total = j.at("total").get<double>();
    return r;
  } catch (const ordered_json::exception& e) {
    throw FormatError(std::string("loss report: ") + e.what());
  }
}

double clip_global_norm(ParamSet& params, double ceiling) {
  double sq = 0.0;
  for (const std::string& name : params.names()) {
    for (double g : params.get(name).grad()) {
      sq += g * g;
    }
  }
  const double norm = std::sqrt(sq);
  if (ceiling > 0.0 && norm > ceiling) {
    const double factor = ceiling / norm;
    for (const std::string& name : params.names()) {
      for (double& g : params.get(name).mutable_grad()) {
        g *= factor;
      }
    }
  }
  return norm;
}

Trainer::Trainer(Model& model, const Vocab& vocab,
                 std::vector<ModalTriple> corpus, TrainConfig config)
    : model_(model),
      vocab_(vocab),
      corpus_(std::move(corpus)),
      config_(config),
      adam_(AdamConfig{config.learning_rate, 0.9, 0.999, 1e-8}) {
  config_.validate();
  if (corpus_.empty()) {
    throw ContractError("trainer: empty corpus");
  }
  for (size_t i = 0; i < corpus_.size(); ++i) {
    (corpus_[i].has_nl ? paired_idx_ : unpaired_idx_)
        .push_back(static_cast<int>(i));
  }
  for (const auto* kind : {&paired_idx_, &unpaired_idx_}) {
    if (!kind->empty() &&
        kind->size() < static_cast<size_t>(config_.batch_size)) {
      throw ConfigError(
          "trainer: " + std::to_string(kind->size()) +
          (kind == &paired_idx_ ? " paired" : " unpaired") +
          " examples cannot fill batches of " +
          std::to_string(config_.batch_size));
    }
  }
  paired_batches_per_round_ =
      batches_per_round(paired_idx_.size(), config_.batch_size);
  unpaired_batches_per_round_ =
      batches_per_round(unpaired_idx_.size(), config_.batch_size);
}

int Trainer::example_at(bool paired, int64_t draw) const {
  const std::vector<int>& pool = paired ? paired_idx_ : unpaired_idx_;
  const int64_t n = static_cast<int64_t>(pool.size());
  const uint64_t epoch = static_cast<uint64_t>(draw / n);
  const size_t offset = static_cast<size_t>(draw % n);
  std::vector<int> order = pool;
  Rng rng(derive_seed(config_.seed,
                      {seed_tag::kEpochOrder,
                       paired ? kPairedStream : kUnpairedStream, epoch}));
  rng.shuffle(order);
  return order[offset];
}

Trainer::StepPlan Trainer::plan_step(int64_t step) const {
  const int np = paired_batches_per_round_;
  const int nu = unpaired_batches_per_round_;
  const int round_len = np + nu;
  const int64_t r = (step - 1) / round_len;
  const int pos = static_cast<int>((step - 1) % round_len);

  std::vector<char> slots;
  slots.insert(slots.end(), static_cast<size_t>(np), 1);
  slots.insert(slots.end(), static_cast<size_t>(nu), 0);
  Rng rng(derive_seed(config_.seed, {seed_tag::kEpochOrder, kScheduleStream,
                                     static_cast<uint64_t>(r)}));
  rng.shuffle(slots);

  StepPlan plan;
  plan.paired = slots[static_cast<size_t>(pos)] == 1;
  int earlier_same_kind = 0;
  for (int i = 0; i < pos; ++i) {
    if ((slots[static_cast<size_t>(i)] == 1) == plan.paired) {
      ++earlier_same_kind;
    }
  }
  const int64_t full_rounds = r * (plan.paired ? np : nu);
  const int64_t draws_before = (full_rounds + earlier_same_kind) *
                               static_cast<int64_t>(config_.batch_size);

  for (int j = 0; j < config_.batch_size; ++j) {
    plan.examples.push_back(example_at(plan.paired, draws_before + j));
  }

  if (plan.paired) {
    const int64_t epoch0 =
        draws_before / static_cast<int64_t>(paired_idx_.size());
    plan.scheme = epoch0 % 2 == 0 ? PairScheme::NlVsPlAst
                                  : PairScheme::TripleVsSwapped;
  } else {
    plan.scheme = PairScheme::PairVsSwapped;
  }
  return plan;
}

LossReport Trainer::run_step() {
  const int64_t s = step_ + 1;
  const StepPlan plan = plan_step(s);
  const uint64_t step_seed =
      derive_seed(config_.seed, {static_cast<uint64_t>(s)});

  ParamSet& params = model_.params();
  params.zero_grad();

  // Per-objective accumulators: graph-level sums plus element counts, so the
  // default reduction is a mean over every position/pair in the batch.
  Tensor mmlm_sum, ip_sum, tep_sum;
  int64_t mmlm_count = 0, ip_count = 0, tep_count = 0;
  auto accumulate = [](Tensor& into, const Tensor& term) {
    into = into.defined() ? add(into, term) : term;
  };

  const bool masked_forward_needed = config_.mmlm || config_.ip || config_.tep;

  std::vector<PackedInput> packed_batch;
  if (masked_forward_needed) {
    packed_batch.reserve(plan.examples.size());
    int max_len = 0;
    for (int idx : plan.examples) {
      packed_batch.push_back(
          pack(corpus_[static_cast<size_t>(idx)], config_.budgets));
      max_len = std::max(max_len, packed_batch.back().length());
    }
    for (auto& packed : packed_batch) {
      pad_to(&packed, max_len);
    }
  }

  for (size_t j = 0; j < packed_batch.size(); ++j) {
    const PackedInput& packed = packed_batch[j];
    const uint64_t ej = static_cast<uint64_t>(j);
    const MaskPlan mask_plan = plan_mmlm(
        packed, vocab_, derive_seed(step_seed, {ej, seed_tag::kMaskPlan}));
    const std::vector<int> masked_ids = apply_mask(packed, mask_plan);
    const std::vector<bool> pads = pad_flags(packed.segments);

    Rng dropout_rng(derive_seed(step_seed, {ej, seed_tag::kDropout}));
    const Tensor hidden = model_.encode(masked_ids, pads, true, &dropout_rng);

    if (config_.mmlm) {
      const Tensor logits = model_.mlm_logits(hidden, mask_plan.positions);
      accumulate(mmlm_sum, loss_mmlm(logits, mask_plan, true));
      mmlm_count += static_cast<int64_t>(mask_plan.size());
    }
    if (config_.ip) {
      const Tensor logits = model_.ip_logits(hidden, packed.pl_positions);
      accumulate(ip_sum,
                 loss_ip_from_logits(logits, packed.identifier_labels, true));
      ip_count += static_cast<int64_t>(packed.pl_positions.size());
    }
    if (config_.tep) {
      const TepPlan tep_plan = plan_tep(
          packed, derive_seed(step_seed, {ej, seed_tag::kTepPlan}),
          config_.tep_negatives_per_positive, config_.tep_full_pairs);
      if (!tep_plan.empty()) {
        accumulate(tep_sum, loss_tep(hidden, tep_plan, true));
        tep_count += static_cast<int64_t>(tep_plan.size());
      }
    }
  }

  Tensor mcl_term;
  if (config_.mcl) {
    std::vector<ModalTriple> batch_triples;
    batch_triples.reserve(plan.examples.size());
    for (int idx : plan.examples) {
      batch_triples.push_back(corpus_[static_cast<size_t>(idx)]);
    }
    const ContrastiveBatch contrastive = build_contrastive_batch(
        batch_triples, config_.budgets, vocab_, plan.scheme, step_seed);

    std::vector<Tensor> anchor_rows, positive_rows;
    for (size_t i = 0; i < contrastive.size(); ++i) {
      const uint64_t ei = static_cast<uint64_t>(i);
      const auto& pair = contrastive.pairs[i];
      Rng anchor_rng(
          derive_seed(step_seed, {ei, seed_tag::kDropout, 1}));
      Rng positive_rng(
          derive_seed(step_seed, {ei, seed_tag::kDropout, 2}));
      const std::vector<bool> anchor_pads = pad_flags(pair.anchor.segments);
      const std::vector<bool> positive_pads =
          pad_flags(pair.positive.segments);
      const Tensor ha =
          model_.encode(pair.anchor.ids, anchor_pads, true, &anchor_rng);
      const Tensor hp = model_.encode(pair.positive.ids, positive_pads, true,
                                      &positive_rng);
      const Tensor va = model_.project(model_.pooled(ha, anchor_pads));
      const Tensor vp = model_.project(model_.pooled(hp, positive_pads));
      anchor_rows.push_back(reshape(va, {1, model_.config().projection_dim}));
      positive_rows.push_back(reshape(vp, {1, model_.config().projection_dim}));
    }
    mcl_term = loss_mcl(concat_rows(anchor_rows), concat_rows(positive_rows));
  }

  auto reduce = [&](Tensor& sum, int64_t count) {
    if (!sum.defined() || count == 0) {
      return Tensor();
    }
    if (config_.sum_losses) {
      return sum;
    }
    return scale(sum, 1.0 / static_cast<double>(count));
  };
  Tensor mmlm_term = reduce(mmlm_sum, mmlm_count);
  Tensor ip_term = reduce(ip_sum, ip_count);
  Tensor tep_term = reduce(tep_sum, tep_count);

  Tensor l2_term;
  if (config_.l2_lambda > 0.0) {
    std::vector<Tensor> squares;
    for (const std::string& name : params.names()) {
      const Tensor& t = params.get(name);
      squares.push_back(sum_all(mul(t, t)));
    }
    l2_term = scale(sum_all(stack_scalars(squares)), config_.l2_lambda);
  }

  Tensor total;
  auto add_term = [&](const Tensor& term) {
    if (term.defined()) {
      total = total.defined() ? add(total, term) : term;
    }
  };
  add_term(mmlm_term);
  add_term(ip_term);
  add_term(tep_term);
  add_term(mcl_term);
  add_term(l2_term);
  if (!total.defined()) {
    throw ContractError("train step " + std::to_string(s) +
                        " produced no loss terms");
  }

  backward(total);
  clip_global_norm(params, config_.clip_norm);

  double lr = config_.learning_rate;
  if (config_.warmup_steps > 0 && s <= config_.warmup_steps) {
    lr *= static_cast<double>(s) / static_cast<double>(config_.warmup_steps);
  }
  adam_.set_lr(lr);
  adam_.step(params);

  step_ = s;
  LossReport report;
  report.step = s;
  report.mmlm = mmlm_term.defined() ? mmlm_term.item() : 0.0;
  report.ip = ip_term.defined() ? ip_term.item() : 0.0;
  report.tep = tep_term.defined() ? tep_term.item() : 0.0;
  report.mcl = mcl_term.defined() ? mcl_term.item() : 0.0;
  report.l2 = l2_term.defined() ? l2_term.item() : 0.0;
  report.total = total.item();
  return report;
}

std::vector<LossReport> Trainer::run(const std::string& log_path,
                                     const std::string& checkpoint_path) {
  std::ofstream log;
  if (!log_path.empty()) {
    log.open(log_path, std::ios::app);
    if (!log) {
      throw FormatError("cannot open training log " + log_path);
    }
  }
  std::vector<LossReport> reports;
  while (step_ < config_.steps) {
    const LossReport report = run_step();
    reports.push_back(report);
    if (log.is_open()) {
      log << loss_report_json(report) << "\n";
      log.flush();
    }
    if (!checkpoint_path.empty() && config_.checkpoint_every > 0 &&
        step_ % config_.checkpoint_every == 0 && step_ < config_.steps) {
      save_checkpoint(checkpoint_path);
    }
  }
  if (!checkpoint_path.empty()) {
    save_checkpoint(checkpoint_path);
  }
  return reports;
}

void Trainer::save_checkpoint(const std::string& path) const {
  ordered_json j;
  j["format"] = "tricode-checkpoint";
  j["version"] = 1;
  j["step"] = step_;
  j["model_config"] = model_config_json(model_.config());
  j["train_config"] = train_config_json(config_);

  ordered_json params = ordered_json::array();
  for (const std::string& name : model_.params().names()) {
    const Tensor& t = model_.params().get(name);
    ordered_json entry;
    entry["name"] = name;
    entry["shape"] = t.shape();
    entry["data"] = t.data();
    params.push_back(std::move(entry));
  }
  j["params"] = std::move(params);

  ordered_json adam;
  adam["step_count"] = adam_.step_count();
  ordered_json slots = ordered_json::array();
  for (const std::string& name : adam_.slot_names()) {
    const Adam::Slot& slot = adam_.slot(name);
    ordered_json entry;
    entry["name"] = name;
    entry["m"] = slot.m;
    entry["v"] = slot.v;
    slots.push_back(std::move(entry));
  }
  adam["slots"] = std::move(slots);
  j["adam"] = std::move(adam);

  write_atomically(path, j.dump());
}

namespace {

ordered_json read_checkpoint_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw FormatError("cannot read checkpoint " + path);
  }
  ordered_json j;
  try {
    j = ordered_json::parse(in);
  } catch (const ordered_json::exception& e) {
    throw FormatError("checkpoint " + path + ": " + e.what());
  }
  if (!j.contains("format") || j["format"] != "tricode-checkpoint") {
    throw FormatError("checkpoint " + path + ": not a checkpoint file");
  }
  if (!j.contains("version") || j["version"].template get<int>() != 1) {
    throw FormatError("checkpoint " + path + ": unsupported version");
  }
  return j;
}

void fill_params_from_json(ParamSet& params, const ordered_json& entries,
                           const std::string& path) {
  size_t filled = 0;
  for (const auto& entry : entries) {
    const std::string name = entry.at("name").get<std::string>();
    if (!params.contains(name)) {
      throw ConfigError("checkpoint " + path + ": unexpected parameter '" +
                        name + "'");
    }
    Tensor& t = params.get(name);
    const std::vector<int> shape = entry.at("shape").get<std::vector<int>>();
    if (shape != t.shape()) {
      throw ConfigError("checkpoint " + path + ": parameter '" + name +
                        "' has shape " + shape_str(shape) +
                        ", model expects " + shape_str(t.shape()));
    }
    const std::vector<double> data =
        entry.at("data").get<std::vector<double>>();
    if (data.size() != t.data().size()) {
      throw FormatError("checkpoint " + path + ": parameter '" + name +
                        "' data length mismatch");
    }
    t.mutable_data() = data;
    ++filled;
  }
  if (filled != params.size()) {
    throw ConfigError("checkpoint " + path + ": has " +
                      std::to_string(filled) + " parameters, model expects " +
                      std::to_string(params.size()));
  }
}

}  // namespace

void Trainer::load_checkpoint(const std::string& path) {
  const ordered_json j = read_checkpoint_json(path);

  const ModelConfig stored = model_config_from(j.at("model_config"));
  const std::string current = model_config_to_json(model_.config());
  if (model_config_to_json(stored) != current) {
    throw ConfigError("checkpoint " + path +
                      ": model configuration differs from the current model");
  }
  const TrainConfig stored_train = train_config_from(j.at("train_config"));
  if (stored_train.seed != config_.seed) {
    throw ConfigError("checkpoint " + path +
                      ": trained with a different seed; resuming would break "
                      "the random stream");
  }
  if (stored_train.batch_size != config_.batch_size) {
    throw ConfigError("checkpoint " + path +
                      ": trained with batch_size " +
                      std::to_string(stored_train.batch_size) +
                      ", current config has " +
                      std::to_string(config_.batch_size));
  }

  fill_params_from_json(model_.params(), j.at("params"), path);

  const auto& adam = j.at("adam");
  adam_.set_step_count(adam.at("step_count").get<int64_t>());
  for (const auto& entry : adam.at("slots")) {
    Adam::Slot slot;
    slot.m = entry.at("m").get<std::vector<double>>();
    slot.v = entry.at("v").get<std::vector<double>>();
    adam_.restore_slot(entry.at("name").get<std::string>(), std::move(slot));
  }

  step_ = j.at("step").get<int64_t>();
}

Trainer::BatchInspection Trainer::inspect_step(int64_t step) const {
  if (step < 1) {
    throw ContractError("inspect_step: steps are numbered from 1");
  }
  const StepPlan plan = plan_step(step);
  const uint64_t step_seed =
      derive_seed(config_.seed, {static_cast<uint64_t>(step)});

  BatchInspection out;
  out.step = step;
  out.paired = plan.paired;
  out.scheme = pair_scheme_name(plan.scheme);
  out.examples = plan.examples;

  std::vector<PackedInput> packed_batch;
  int max_len = 0;
  for (int idx : plan.examples) {
    packed_batch.push_back(
        pack(corpus_[static_cast<size_t>(idx)], config_.budgets));
    max_len = std::max(max_len, packed_batch.back().length());
  }
  for (auto& packed : packed_batch) {
    pad_to(&packed, max_len);
  }
  for (size_t j = 0; j < packed_batch.size(); ++j) {
    const uint64_t ej = static_cast<uint64_t>(j);
    out.masks.push_back(plan_mmlm(
        packed_batch[j], vocab_,
        derive_seed(step_seed, {ej, seed_tag::kMaskPlan})));
    out.identifier_labels.push_back(packed_batch[j].identifier_labels);
    out.edge_plans.push_back(plan_tep(
        packed_batch[j], derive_seed(step_seed, {ej, seed_tag::kTepPlan}),
        config_.tep_negatives_per_positive, config_.tep_full_pairs));
  }
  return out;
}

Model model_from_checkpoint(const std::string& path) {
  const ordered_json j = read_checkpoint_json(path);
  Model model(model_config_from(j.at("model_config")));
  fill_params_from_json(model.params(), j.at("params"), path);
  return model;
}

TrainConfig train_config_from_checkpoint(const std::string& path) {
  const ordered_json j = read_checkpoint_json(path);
  try {
    return train_config_from(j.at("train_config"));
  } catch (const ordered_json::exception& e) {
    throw FormatError("checkpoint " + path + ": " + e.what());
  }
}

}  // namespace tricode
