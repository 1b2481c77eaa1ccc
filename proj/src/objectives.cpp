#include "tricode/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "tricode/errors.hpp"
#include "tricode/rng.hpp"

namespace tricode {

namespace {

bool maskable_segment(Segment s) {
  return s == Segment::NL || s == Segment::PL || s == Segment::AST;
}

std::vector<double> labels_to_doubles(const std::vector<bool>& labels) {
  std::vector<double> out(labels.size());
  for (size_t i = 0; i < labels.size(); ++i) {
    out[i] = labels[i] ? 1.0 : 0.0;
  }
  return out;
}

// x[i] as a 1D vector, for dot products against other rows.
Tensor row_vector(const Tensor& x, int i) {
  return reshape(gather_rows(x, {i}), {x.dim(1)});
}

// Binary cross-entropy from logits: softplus(z) - z*y per element, which is
// -[y ln s(z) + (1-y) ln(1-s(z))] without ever forming the probability.
Tensor bce_from_logits(const Tensor& logits, const std::vector<bool>& labels,
                       bool sum_reduction) {
  const Tensor y = Tensor::from_data({static_cast<int>(labels.size())},
                                     labels_to_doubles(labels));
  const Tensor per_pair = sub(softplus(logits), mul(logits, y));
  const Tensor total = sum_all(per_pair);
  if (sum_reduction) {
    return total;
  }
  return scale(total, 1.0 / static_cast<double>(labels.size()));
}

}  // namespace

MaskPlan plan_mmlm(const PackedInput& packed, const Vocab& vocab,
                   uint64_t seed) {
  std::vector<int> maskable;
  for (int i = 0; i < packed.length(); ++i) {
    if (maskable_segment(packed.segments[static_cast<size_t>(i)])) {
      maskable.push_back(i);
    }
  }
  if (maskable.empty()) {
    throw ContractError("plan_mmlm: packed input has no maskable positions");
  }

  // Round-half-up 15%, at least one position.
  int count = static_cast<int>(
      std::floor(0.15 * static_cast<double>(maskable.size()) + 0.5));
  count = std::max(count, 1);

  Rng rng(seed);
  const std::vector<int> picks =
      rng.sample_without_replacement(static_cast<int>(maskable.size()), count);

  MaskPlan plan;
  plan.positions.reserve(picks.size());
  for (int pick : picks) {
    const int pos = maskable[static_cast<size_t>(pick)];
    const int original = packed.ids[static_cast<size_t>(pos)];
    const double u = rng.next_double();
    MaskPlan::Action action;
    int replacement;
    if (u < 0.8) {
      action = MaskPlan::Action::Mask;
      replacement = Vocab::kMask;
    } else if (u < 0.9) {
      action = MaskPlan::Action::Random;
      const uint64_t span =
          static_cast<uint64_t>(vocab.size()) - Vocab::kNumSpecials;
      replacement =
          Vocab::kNumSpecials + static_cast<int>(rng.below(span));
    } else {
      action = MaskPlan::Action::Keep;
      replacement = original;
    }
    plan.positions.push_back(pos);
    plan.actions.push_back(action);
    plan.replacements.push_back(replacement);
    plan.original_ids.push_back(original);
  }
  return plan;
}

std::vector<int> apply_mask(const PackedInput& packed, const MaskPlan& plan) {
  std::vector<int> ids = packed.ids;
  for (size_t i = 0; i < plan.positions.size(); ++i) {
    const int pos = plan.positions[i];
    if (pos < 0 || pos >= static_cast<int>(ids.size())) {
      throw ContractError("apply_mask: plan position " + std::to_string(pos) +
                          " outside packed input of length " +
                          std::to_string(ids.size()));
    }
    ids[static_cast<size_t>(pos)] = plan.replacements[i];
  }
  return ids;
}

Tensor loss_mmlm(const Tensor& logits, const MaskPlan& plan,
                 bool sum_reduction) {
  if (logits.ndim() != 2) {
    throw DimensionError("loss_mmlm: logits must be 2D, got " +
                         shape_str(logits.shape()));
  }
  if (static_cast<size_t>(logits.dim(0)) != plan.size()) {
    throw ContractError("loss_mmlm: " + std::to_string(logits.dim(0)) +
                        " logit rows for " + std::to_string(plan.size()) +
                        " masked positions");
  }
  const Tensor log_probs = log_softmax_rows(logits);
  const Tensor picked = pick_per_row(log_probs, plan.original_ids);
  const Tensor total = scale(sum_all(picked), -1.0);
  if (sum_reduction) {
    return total;
  }
  return scale(total, 1.0 / static_cast<double>(plan.size()));
}

Tensor loss_ip(const Tensor& probabilities, const std::vector<bool>& labels,
               bool sum_reduction) {
  if (probabilities.numel() != static_cast<int64_t>(labels.size())) {
    throw ContractError("loss_ip: " + std::to_string(probabilities.numel()) +
                        " probabilities for " + std::to_string(labels.size()) +
                        " labels");
  }
  if (labels.empty()) {
    throw ContractError("loss_ip: empty label set");
  }
  for (double p : probabilities.data()) {
    if (!(p > 0.0 && p < 1.0)) {
      throw DomainError("loss_ip: probability " + std::to_string(p) +
                        " outside (0, 1)");
    }
  }
  const Tensor y = Tensor::from_data({static_cast<int>(labels.size())},
                                     labels_to_doubles(labels));
  const Tensor one_minus_y = add_scalar(scale(y, -1.0), 1.0);
  const Tensor one_minus_p = add_scalar(scale(probabilities, -1.0), 1.0);
  const Tensor per_token = add(mul(y, log(probabilities)),
                               mul(one_minus_y, log(one_minus_p)));
  const Tensor total = scale(sum_all(per_token), -1.0);
  if (sum_reduction) {
    return total;
  }
  return scale(total, 1.0 / static_cast<double>(labels.size()));
}

Tensor loss_ip_from_logits(const Tensor& logits,
                           const std::vector<bool>& labels,
                           bool sum_reduction) {
  if (logits.numel() != static_cast<int64_t>(labels.size())) {
    throw ContractError("loss_ip_from_logits: " +
                        std::to_string(logits.numel()) + " logits for " +
                        std::to_string(labels.size()) + " labels");
  }
  if (labels.empty()) {
    throw ContractError("loss_ip_from_logits: empty label set");
  }
  return bce_from_logits(logits, labels, sum_reduction);
}

TepPlan plan_tep(const PackedInput& packed, uint64_t seed,
                 int negatives_per_positive, bool full_pairs) {
  TepPlan plan;
  if (packed.edge_pairs.empty()) {
    return plan;
  }
  if (!full_pairs && negatives_per_positive < 1) {
    throw ContractError("plan_tep: negatives_per_positive must be positive");
  }

  for (const auto& edge : packed.edge_pairs) {
    plan.pairs.push_back(edge);
    plan.labels.push_back(true);
  }

  const std::set<std::pair<int, int>> edge_set(packed.edge_pairs.begin(),
                                               packed.edge_pairs.end());
  std::vector<std::pair<int, int>> non_edges;
  const auto& nodes = packed.ast_node_positions;
  for (size_t a = 0; a < nodes.size(); ++a) {
    for (size_t b = a + 1; b < nodes.size(); ++b) {
      const std::pair<int, int> candidate{nodes[a], nodes[b]};
      if (edge_set.count(candidate) == 0) {
        non_edges.push_back(candidate);
      }
    }
  }

  if (full_pairs) {
    for (const auto& pair : non_edges) {
      plan.pairs.push_back(pair);
      plan.labels.push_back(false);
    }
    return plan;
  }

  const size_t wanted = packed.edge_pairs.size() *
                        static_cast<size_t>(negatives_per_positive);
  const int take = static_cast<int>(std::min(wanted, non_edges.size()));
  Rng rng(seed);
  const std::vector<int> picks =
      rng.sample_without_replacement(static_cast<int>(non_edges.size()), take);
  for (int pick : picks) {
    plan.pairs.push_back(non_edges[static_cast<size_t>(pick)]);
    plan.labels.push_back(false);
  }
  return plan;
}

Tensor loss_tep(const Tensor& hidden, const TepPlan& plan,
                bool sum_reduction) {
  if (plan.empty()) {
    throw ContractError("loss_tep: empty plan");
  }
  if (hidden.ndim() != 2) {
    throw DimensionError("loss_tep: hidden states must be 2D, got " +
                         shape_str(hidden.shape()));
  }
  std::vector<int> firsts;
  std::vector<int> seconds;
  firsts.reserve(plan.size());
  seconds.reserve(plan.size());
  for (const auto& [i, j] : plan.pairs) {
    if (i < 0 || i >= hidden.dim(0) || j < 0 || j >= hidden.dim(0)) {
      throw ContractError("loss_tep: pair (" + std::to_string(i) + ", " +
                          std::to_string(j) + ") outside sequence of length " +
                          std::to_string(hidden.dim(0)));
    }
    firsts.push_back(i);
    seconds.push_back(j);
  }
  // Per-pair edge logit is the dot product of the two node vectors.
  const Tensor products =
      mul(gather_rows(hidden, firsts), gather_rows(hidden, seconds));
  const Tensor ones = Tensor::full({hidden.dim(1), 1}, 1.0);
  const Tensor dots =
      reshape(matmul(products, ones), {static_cast<int>(plan.size())});
  return bce_from_logits(dots, plan.labels, sum_reduction);
}

const char* pair_scheme_name(PairScheme s) {
  switch (s) {
    case PairScheme::NlVsPlAst:
      return "NL_vs_PLAST";
    case PairScheme::TripleVsSwapped:
      return "TRIPLE_vs_SWAPPED";
    case PairScheme::PairVsSwapped:
      return "PAIR_vs_SWAPPED";
  }
  return "?";
}

ContrastiveBatch build_contrastive_batch(const std::vector<ModalTriple>& triples,
                                         const Budgets& budgets,
                                         const Vocab& vocab,
                                         PairScheme paired_scheme,
                                         uint64_t seed) {
  if (triples.size() < 2) {
    throw ContractError(
        "build_contrastive_batch: need at least 2 examples, got " +
        std::to_string(triples.size()));
  }
  const bool paired = triples.front().has_nl;
  for (const auto& t : triples) {
    if (t.has_nl != paired) {
      throw ContractError(
          "build_contrastive_batch: batch mixes paired and unpaired examples");
    }
  }
  if (paired && paired_scheme == PairScheme::PairVsSwapped) {
    throw ContractError(
        "build_contrastive_batch: PAIR_vs_SWAPPED applies to unpaired batches");
  }
  const PairScheme scheme =
      paired ? paired_scheme : PairScheme::PairVsSwapped;

  ContrastiveBatch batch;
  batch.pairs.reserve(triples.size());
  for (size_t i = 0; i < triples.size(); ++i) {
    const ModalTriple& triple = triples[i];
    ContrastivePair pair;
    pair.scheme = scheme;
    if (scheme == PairScheme::NlVsPlAst) {
      // Both sides stay unmasked; the contrast is purely cross-modal.
      pair.anchor = pack_nl_only(triple, budgets);
      pair.positive = pack_pl_ast(triple, budgets);
    } else {
      pair.anchor = pack(triple, budgets);
      pair.positive = pack(swap_pl_ast(triple), budgets);
      const uint64_t anchor_seed =
          derive_seed(seed, {static_cast<uint64_t>(i), seed_tag::kMclAnchor});
      const uint64_t positive_seed =
          derive_seed(seed, {static_cast<uint64_t>(i), seed_tag::kMclPositive});
      pair.anchor.ids =
          apply_mask(pair.anchor, plan_mmlm(pair.anchor, vocab, anchor_seed));
      pair.positive.ids = apply_mask(
          pair.positive, plan_mmlm(pair.positive, vocab, positive_seed));
    }
    batch.pairs.push_back(std::move(pair));
  }
  return batch;
}

std::vector<std::pair<bool, int>> mcl_negative_indices(int batch_size, int i) {
  if (batch_size < 2) {
    throw ContractError("mcl_negative_indices: batch size must be at least 2");
  }
  if (i < 0 || i >= batch_size) {
    throw ContractError("mcl_negative_indices: index " + std::to_string(i) +
                        " outside batch of " + std::to_string(batch_size));
  }
  std::vector<std::pair<bool, int>> negatives;
  negatives.reserve(2 * static_cast<size_t>(batch_size) - 2);
  for (int j = 0; j < batch_size; ++j) {
    if (j != i) {
      negatives.emplace_back(false, j);  // other anchors
    }
  }
  for (int j = 0; j < batch_size; ++j) {
    if (j != i) {
      negatives.emplace_back(true, j);  // other positives
    }
  }
  return negatives;
}

Tensor mcl_pair_loss(const Tensor& anchors, const Tensor& positives, int i) {
  if (anchors.ndim() != 2 || positives.ndim() != 2 ||
      anchors.shape() != positives.shape()) {
    throw DimensionError("mcl_pair_loss: want matching 2D batches, got " +
                         shape_str(anchors.shape()) + " and " +
                         shape_str(positives.shape()));
  }
  const int n = anchors.dim(0);
  const Tensor vi = row_vector(anchors, i);

  std::vector<Tensor> dots;
  dots.reserve(2 * static_cast<size_t>(n) - 1);
  dots.push_back(dot(vi, row_vector(positives, i)));
  for (const auto& [from_positives, j] : mcl_negative_indices(n, i)) {
    dots.push_back(
        dot(vi, row_vector(from_positives ? positives : anchors, j)));
  }

  const Tensor stacked = stack_scalars(dots);
  // log-sum-exp shifted by the (constant) max; exact for any shift.
  const double shift =
      *std::max_element(stacked.data().begin(), stacked.data().end());
  const Tensor lse = add_scalar(
      log(sum_all(exp(add_scalar(stacked, -shift)))), shift);
  return sub(lse, dots.front());
}

Tensor loss_mcl(const Tensor& anchors, const Tensor& positives) {
  if (anchors.ndim() != 2 || anchors.dim(0) < 2) {
    throw ContractError(
        "loss_mcl: need a 2D batch of at least two projections, got " +
        shape_str(anchors.shape()));
  }
  std::vector<Tensor> terms;
  terms.reserve(2 * static_cast<size_t>(anchors.dim(0)));
  for (int i = 0; i < anchors.dim(0); ++i) {
    terms.push_back(mcl_pair_loss(anchors, positives, i));
    terms.push_back(mcl_pair_loss(positives, anchors, i));
  }
  return sum_all(stack_scalars(terms));
}

}  // namespace tricode
