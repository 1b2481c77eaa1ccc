#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tricode/adam.hpp"
#include "tricode/assembly.hpp"
#include "tricode/rng.hpp"
#include "tricode/tensor.hpp"

namespace tricode {

// Transformer stack dimensions.  Desk-scale defaults; the full-scale
// 12/768/12 shape is expressible but nothing here requires it.
struct EncoderConfig {
  int layers = 2;
  int hidden_size = 64;
  int heads = 4;
  int ffn_size = 256;
  int max_positions = 256;
  int vocab_size = 0;
  double dropout_rate = 0.1;

  void validate() const;  // ConfigError on an unusable combination
};

enum class Pooling { Cls, Mean };

struct ModelConfig {
  EncoderConfig encoder;
  int projection_dim = 128;
  Pooling pooling = Pooling::Cls;

  void validate() const;
};

std::vector<bool> pad_flags(const std::vector<Segment>& segments);

// The trainable model: token+position embeddings, post-norm transformer
// blocks, and the task heads (masked-token logits, identifier logits, and the
// two-layer contrastive projection).  All parameters live in one ParamSet so
// the optimizer and checkpointing see a single flat namespace.
class Model {
 public:
  explicit Model(ModelConfig config);

  // Fills every parameter: weights truncated-normal std 0.02, biases zero,
  // layer-norm gains one.  Deterministic in `seed`.
  void init(uint64_t seed);

  const ModelConfig& config() const { return config_; }
  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }

  // Token embedding + learned absolute position embedding, row per id.
  Tensor embed(const std::vector<int>& ids) const;

  // Per-position hidden states, (L x hidden).  PAD positions are excluded
  // from every attention softmax via an additive mask, so their content
  // cannot reach non-PAD outputs.  `train` enables dropout, which draws from
  // `dropout_rng` (required when the rate is nonzero).
  Tensor encode(const std::vector<int>& ids, const std::vector<bool>& is_pad,
                bool train = false, Rng* dropout_rng = nullptr) const;
  Tensor encode(const std::vector<int>& ids) const;

  // Sequence vector per the configured pooling: the [CLS] row, or the mean
  // over non-PAD rows.
  Tensor pooled(const Tensor& hidden, const std::vector<bool>& is_pad) const;

  // Contrastive projection v = W2 tanh(W1 h + b1) + b2 of a pooled vector.
  Tensor project(const Tensor& pooled) const;

  // Vocabulary logits at the given positions, (|positions| x vocab).
  Tensor mlm_logits(const Tensor& hidden,
                    const std::vector<int>& positions) const;

  // Identifier logit per given position, 1D.
  Tensor ip_logits(const Tensor& hidden,
                   const std::vector<int>& positions) const;

 private:
  Tensor encoder_layer(const Tensor& x, int layer,
                       const Tensor& attention_mask, bool train,
                       Rng* dropout_rng) const;
  const Tensor& p(const std::string& name) const;

  ModelConfig config_;
  ParamSet params_;
};

}  // namespace tricode
