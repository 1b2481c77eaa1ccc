#include "tricode/encoder.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "tricode/errors.hpp"

namespace tricode {

void EncoderConfig::validate() const {
  if (layers < 1 || hidden_size < 1 || heads < 1 || ffn_size < 1 ||
      max_positions < 1 || vocab_size < 1) {
    throw ConfigError("encoder config: all dimensions must be positive");
  }
  if (hidden_size % heads != 0) {
    throw ConfigError("encoder config: hidden_size " +
                      std::to_string(hidden_size) + " not divisible by " +
                      std::to_string(heads) + " heads");
  }
  if (dropout_rate < 0.0 || dropout_rate >= 1.0) {
    throw ConfigError("encoder config: dropout_rate must lie in [0, 1)");
  }
}

void ModelConfig::validate() const {
  encoder.validate();
  if (projection_dim < 1) {
    throw ConfigError("model config: projection_dim must be positive");
  }
}

std::vector<bool> pad_flags(const std::vector<Segment>& segments) {
  std::vector<bool> flags(segments.size());
  for (size_t i = 0; i < segments.size(); ++i) {
    flags[i] = segments[i] == Segment::PAD;
  }
  return flags;
}

Model::Model(ModelConfig config) : config_(config) {
  config_.validate();
  const EncoderConfig& e = config_.encoder;
  const int h = e.hidden_size;

  auto weight = [&](const std::string& name, int rows, int cols) {
    params_.add(name, Tensor::zeros({rows, cols}));
  };
  auto bias = [&](const std::string& name, int n) {
    params_.add(name, Tensor::zeros({n}));
  };

  weight("tok_emb", e.vocab_size, h);
  weight("pos_emb", e.max_positions, h);
  bias("emb_ln_g", h);
  bias("emb_ln_b", h);
  for (int l = 0; l < e.layers; ++l) {
    const std::string prefix = "L" + std::to_string(l) + ".";
    weight(prefix + "wq", h, h);
    bias(prefix + "bq", h);
    weight(prefix + "wk", h, h);
    bias(prefix + "bk", h);
    weight(prefix + "wv", h, h);
    bias(prefix + "bv", h);
    weight(prefix + "wo", h, h);
    bias(prefix + "bo", h);
    bias(prefix + "ln1_g", h);
    bias(prefix + "ln1_b", h);
    weight(prefix + "ffn_w1", h, e.ffn_size);
    bias(prefix + "ffn_b1", e.ffn_size);
    weight(prefix + "ffn_w2", e.ffn_size, h);
    bias(prefix + "ffn_b2", h);
    bias(prefix + "ln2_g", h);
    bias(prefix + "ln2_b", h);
  }
  weight("mlm_w", h, e.vocab_size);
  bias("mlm_b", e.vocab_size);
  weight("ip_w", h, 1);
  bias("ip_b", 1);
  weight("proj_w1", h, h);
  bias("proj_b1", h);
  weight("proj_w2", h, config_.projection_dim);
  bias("proj_b2", config_.projection_dim);
}

void Model::init(uint64_t seed) {
  Rng rng(derive_seed(seed, {seed_tag::kInit}));
  for (const std::string& name : params_.names()) {
    Tensor& t = params_.get(name);
    // Layer-norm gains are exactly the names ending in "_g"; they start at 1.
    if (name.size() >= 2 && name.compare(name.size() - 2, 2, "_g") == 0) {
      for (double& v : t.mutable_data()) v = 1.0;
      continue;
    }
    if (t.ndim() == 2) {
      for (double& v : t.mutable_data()) v = rng.truncated_normal(0.02);
    }
    // 1D biases and layer-norm shifts stay zero.
  }
  params_.zero_grad();
}

const Tensor& Model::p(const std::string& name) const {
  return params_.get(name);
}

Tensor Model::embed(const std::vector<int>& ids) const {
  const EncoderConfig& e = config_.encoder;
  if (static_cast<int>(ids.size()) > e.max_positions) {
    throw ContractError("encode: sequence of " + std::to_string(ids.size()) +
                        " tokens exceeds max_positions " +
                        std::to_string(e.max_positions));
  }
  std::vector<int> positions(ids.size());
  for (size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= e.vocab_size) {
      throw ContractError("encode: token id " + std::to_string(ids[i]) +
                          " outside vocabulary of " +
                          std::to_string(e.vocab_size));
    }
    positions[i] = static_cast<int>(i);
  }
  return add(gather_rows(p("tok_emb"), ids),
             gather_rows(p("pos_emb"), positions));
}

Tensor Model::encoder_layer(const Tensor& x, int layer,
                            const Tensor& attention_mask, bool train,
                            Rng* dropout_rng) const {
  const EncoderConfig& e = config_.encoder;
  const std::string prefix = "L" + std::to_string(layer) + ".";
  const int head_dim = e.hidden_size / e.heads;
  const double rate = train ? e.dropout_rate : 0.0;

  const Tensor q = add(matmul(x, p(prefix + "wq")), p(prefix + "bq"));
  const Tensor k = add(matmul(x, p(prefix + "wk")), p(prefix + "bk"));
  const Tensor v = add(matmul(x, p(prefix + "wv")), p(prefix + "bv"));

  std::vector<Tensor> head_outputs;
  head_outputs.reserve(static_cast<size_t>(e.heads));
  for (int h = 0; h < e.heads; ++h) {
    const Tensor qh = slice_cols(q, h * head_dim, head_dim);
    const Tensor kh = slice_cols(k, h * head_dim, head_dim);
    const Tensor vh = slice_cols(v, h * head_dim, head_dim);
    Tensor scores =
        scale(matmul(qh, transpose(kh)), 1.0 / std::sqrt(head_dim));
    scores = add(scores, attention_mask);  // -1e9 on PAD keys, row-broadcast
    head_outputs.push_back(matmul(softmax_rows(scores), vh));
  }
  Tensor attn = matmul(concat_cols(head_outputs), p(prefix + "wo"));
  attn = add(attn, p(prefix + "bo"));
  if (rate > 0.0) attn = dropout(attn, rate, *dropout_rng);
  const Tensor mid =
      layer_norm(add(x, attn), p(prefix + "ln1_g"), p(prefix + "ln1_b"));

  Tensor ffn = gelu(add(matmul(mid, p(prefix + "ffn_w1")),
                        p(prefix + "ffn_b1")));
  ffn = add(matmul(ffn, p(prefix + "ffn_w2")), p(prefix + "ffn_b2"));
  if (rate > 0.0) ffn = dropout(ffn, rate, *dropout_rng);
  return layer_norm(add(mid, ffn), p(prefix + "ln2_g"), p(prefix + "ln2_b"));
}

Tensor Model::encode(const std::vector<int>& ids,
                     const std::vector<bool>& is_pad, bool train,
                     Rng* dropout_rng) const {
  const EncoderConfig& e = config_.encoder;
  if (ids.empty()) {
    throw ContractError("encode: empty input");
  }
  if (ids.size() != is_pad.size()) {
    throw DimensionError("encode: " + std::to_string(ids.size()) +
                         " ids but " + std::to_string(is_pad.size()) +
                         " pad flags");
  }
  if (train && e.dropout_rate > 0.0 && dropout_rng == nullptr) {
    throw ContractError("encode: training with dropout needs an rng");
  }

  std::vector<double> mask(ids.size(), 0.0);
  for (size_t i = 0; i < ids.size(); ++i) {
    if (is_pad[i]) mask[i] = -1e9;
  }
  const Tensor attention_mask =
      Tensor::from_data({static_cast<int>(ids.size())}, mask);

  Tensor x = embed(ids);
  x = layer_norm(x, p("emb_ln_g"), p("emb_ln_b"));
  if (train && e.dropout_rate > 0.0) {
    x = dropout(x, e.dropout_rate, *dropout_rng);
  }
  for (int l = 0; l < e.layers; ++l) {
    x = encoder_layer(x, l, attention_mask, train, dropout_rng);
  }
  return x;
}

Tensor Model::encode(const std::vector<int>& ids) const {
  return encode(ids, std::vector<bool>(ids.size(), false));
}

Tensor Model::pooled(const Tensor& hidden,
                     const std::vector<bool>& is_pad) const {
  const int h = config_.encoder.hidden_size;
  if (config_.pooling == Pooling::Cls) {
    if (is_pad.empty() || is_pad[0]) {
      throw ContractError("pooled: position 0 is not a real token");
    }
    return reshape(gather_rows(hidden, {0}), {h});
  }
  std::vector<int> rows;
  for (size_t i = 0; i < is_pad.size(); ++i) {
    if (!is_pad[i]) rows.push_back(static_cast<int>(i));
  }
  if (rows.empty()) {
    throw ContractError("pooled: every position is padding");
  }
  return mean_rows(gather_rows(hidden, rows));
}

Tensor Model::project(const Tensor& pooled) const {
  const int h = config_.encoder.hidden_size;
  const Tensor row = reshape(pooled, {1, h});
  const Tensor mid = tanh(add(matmul(row, p("proj_w1")), p("proj_b1")));
  const Tensor out = add(matmul(mid, p("proj_w2")), p("proj_b2"));
  return reshape(out, {config_.projection_dim});
}

Tensor Model::mlm_logits(const Tensor& hidden,
                         const std::vector<int>& positions) const {
  return add(matmul(gather_rows(hidden, positions), p("mlm_w")), p("mlm_b"));
}

Tensor Model::ip_logits(const Tensor& hidden,
                        const std::vector<int>& positions) const {
  const Tensor logits =
      add(matmul(gather_rows(hidden, positions), p("ip_w")), p("ip_b"));
  return reshape(logits, {static_cast<int>(positions.size())});
}

}  // namespace tricode
