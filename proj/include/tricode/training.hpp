#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tricode/adam.hpp"
#include "tricode/assembly.hpp"
#include "tricode/bpe.hpp"
#include "tricode/encoder.hpp"
#include "tricode/objectives.hpp"

namespace tricode {

struct TrainConfig {
  int batch_size = 8;
  int steps = 200;
  double learning_rate = 1e-4;
  double l2_lambda = 1e-6;  // coefficient of the squared parameter norm
  uint64_t seed = 0;

  // Objective toggles; the total is the sum of the enabled terms.
  bool mmlm = true;
  bool ip = true;
  bool tep = true;
  bool mcl = true;

  bool sum_losses = false;  // per-position sums instead of means
  int tep_negatives_per_positive = 1;
  bool tep_full_pairs = false;
  double clip_norm = 1.0;  // global gradient-norm ceiling; 0 disables
  int warmup_steps = 0;    // linear learning-rate ramp; 0 disables
  int checkpoint_every = 0;  // steps between periodic checkpoints; 0 = final only

  Budgets budgets;

  void validate() const;
};

// Per-step loss decomposition.  Disabled objectives report zero; `l2` is the
// lambda-weighted squared parameter norm.  total = mmlm+ip+tep+mcl+l2.
struct LossReport {
  int64_t step = 0;
  double mmlm = 0.0;
  double ip = 0.0;
  double tep = 0.0;
  double mcl = 0.0;
  double l2 = 0.0;
  double total = 0.0;
};

std::string loss_report_json(const LossReport& report);
LossReport loss_report_from_json(const std::string& line);

// Pre-training driver.  Holds the model by reference, owns the optimizer,
// and derives every random choice from (config.seed, step), so a resumed run
// continues the exact stream an uninterrupted run would have produced.
//
// Batches are homogeneous in pairedness; paired and unpaired batches
// interleave in proportion to the two sub-corpus sizes, and each sub-corpus
// cycles with a reshuffle once exhausted.
class Trainer {
 public:
  Trainer(Model& model, const Vocab& vocab, std::vector<ModalTriple> corpus,
          TrainConfig config);

  const TrainConfig& config() const { return config_; }
  int64_t step() const { return step_; }

  // One optimizer step; returns the report for the step just taken.
  LossReport run_step();

  // Runs until config.steps, appending a JSONL report per step when
  // `log_path` is given and checkpointing per config.checkpoint_every when
  // `checkpoint_path` is given (always writes a final checkpoint there).
  std::vector<LossReport> run(const std::string& log_path = "",
                              const std::string& checkpoint_path = "");

  // Versioned JSON checkpoint: parameters, optimizer state, step counter,
  // both configs.  Written atomically (temp file, then rename).
  void save_checkpoint(const std::string& path) const;

  // Restores a checkpoint produced with a matching model shape; throws
  // ConfigError on mismatch, FormatError on a malformed or wrong-version
  // file.
  void load_checkpoint(const std::string& path);

  // One step's assembled batch, for operator inspection: the drawn corpus
  // rows and exactly the mask plans, identifier labels, sampled edge pairs,
  // and contrastive scheme that run_step would use at that step.
  struct BatchInspection {
    int64_t step = 0;
    bool paired = false;
    std::string scheme;
    std::vector<int> examples;
    std::vector<MaskPlan> masks;
    std::vector<std::vector<bool>> identifier_labels;
    std::vector<TepPlan> edge_plans;
  };
  BatchInspection inspect_step(int64_t step) const;

 private:
  struct StepPlan {
    bool paired;
    std::vector<int> examples;   // indices into corpus_
    PairScheme scheme;           // for the contrastive batch
  };
  StepPlan plan_step(int64_t step) const;
  int example_at(bool paired, int64_t draw) const;

  Model& model_;
  const Vocab& vocab_;
  std::vector<ModalTriple> corpus_;
  std::vector<int> paired_idx_;
  std::vector<int> unpaired_idx_;
  int paired_batches_per_round_ = 0;
  int unpaired_batches_per_round_ = 0;
  TrainConfig config_;
  Adam adam_;
  int64_t step_ = 0;
};

// Rebuilds the model a checkpoint was saved from (for evaluation).
Model model_from_checkpoint(const std::string& path);

// The training settings stored in a checkpoint (budgets, seed, toggles).
TrainConfig train_config_from_checkpoint(const std::string& path);

// Scales every gradient in place so the global norm does not exceed
// `ceiling`; returns the pre-clip norm.  A non-positive ceiling is a no-op.
double clip_global_norm(ParamSet& params, double ceiling);

// Config (de)serialization shared by checkpoints and run manifests.
std::string pooling_name(Pooling p);
Pooling pooling_from_name(const std::string& name);
std::string model_config_to_json(const ModelConfig& config);
ModelConfig model_config_from_json_text(const std::string& text);
std::string train_config_to_json(const TrainConfig& config);
TrainConfig train_config_from_json_text(const std::string& text);

}  // namespace tricode
