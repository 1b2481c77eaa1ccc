#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "tricode/assembly.hpp"
#include "tricode/bpe.hpp"
#include "tricode/tensor.hpp"

namespace tricode {

// Masked-token plan: which packed positions are hidden, what replaces each
// (the 80/10/10 rule), and the original ids the model must recover.
struct MaskPlan {
  enum class Action { Mask, Random, Keep };
  std::vector<int> positions;     // ascending packed positions
  std::vector<Action> actions;    // parallel
  std::vector<int> replacements;  // parallel: id actually placed at position
  std::vector<int> original_ids;  // parallel: the prediction labels
  size_t size() const { return positions.size(); }
};

// Selects round-half-up 15% of non-structural positions (never CLS/SEP/PAD),
// minimum one.  Deterministic in `seed`.  Throws ContractError when nothing
// is maskable.
MaskPlan plan_mmlm(const PackedInput& packed, const Vocab& vocab,
                   uint64_t seed);

// The packed ids with the plan applied.
std::vector<int> apply_mask(const PackedInput& packed, const MaskPlan& plan);

// Mean (or summed) cross-entropy of the true ids under `logits`, one row per
// masked position in plan order.
Tensor loss_mmlm(const Tensor& logits, const MaskPlan& plan,
                 bool sum_reduction = false);

// Binary cross-entropy of per-code-token identifier probabilities.  The
// probability form checks p in (0,1) and throws DomainError otherwise; the
// logit form is the numerically safe training path.
Tensor loss_ip(const Tensor& probabilities, const std::vector<bool>& labels,
               bool sum_reduction = false);
Tensor loss_ip_from_logits(const Tensor& logits,
                           const std::vector<bool>& labels,
                           bool sum_reduction = false);

// Sampled node-pair plan for edge prediction: every retained tree edge is a
// positive; negatives are uniformly sampled non-edge node pairs.
struct TepPlan {
  std::vector<std::pair<int, int>> pairs;  // packed position pairs
  std::vector<bool> labels;                // parallel: true = tree edge
  bool empty() const { return pairs.empty(); }
  size_t size() const { return pairs.size(); }
};

// Empty plan when the example retains no edges (TEP skipped).  With
// `full_pairs` the plan enumerates every node pair instead of sampling.
TepPlan plan_tep(const PackedInput& packed, uint64_t seed,
                 int negatives_per_positive = 1, bool full_pairs = false);

// Edge probability is sigmoid of the dot product of the two node vectors;
// the loss is binary cross-entropy over the plan's pairs.
Tensor loss_tep(const Tensor& hidden, const TepPlan& plan,
                bool sum_reduction = false);

// How a contrastive positive is built from an example.
enum class PairScheme { NlVsPlAst, TripleVsSwapped, PairVsSwapped };

const char* pair_scheme_name(PairScheme s);

struct ContrastivePair {
  PackedInput anchor;
  PackedInput positive;
  PairScheme scheme;
};

struct ContrastiveBatch {
  std::vector<ContrastivePair> pairs;
  size_t size() const { return pairs.size(); }
};

// Builds anchor/positive packed inputs for one batch of triples.  All
// triples must share pairedness; `paired_scheme` picks between the NL-vs-code
// and swapped-triple constructions for paired batches (unpaired batches
// always use the swapped-pair construction).  Swap-scheme sides are masked
// independently with seeds derived from `seed`.  Throws ContractError for
// batches smaller than two (no negatives would exist).
ContrastiveBatch build_contrastive_batch(const std::vector<ModalTriple>& triples,
                                         const Budgets& budgets,
                                         const Vocab& vocab,
                                         PairScheme paired_scheme,
                                         uint64_t seed);

// The other 2N-2 in-batch vectors that serve as negatives for anchor i:
// (false, j) = anchors[j], (true, j) = positives[j], j != i.
std::vector<std::pair<bool, int>> mcl_negative_indices(int batch_size, int i);

// One direction of the contrastive loss for item i: anchors[i] against its
// positive and the 2N-2 in-batch negatives, raw dot-product similarity.
Tensor mcl_pair_loss(const Tensor& anchors, const Tensor& positives, int i);

// Both directions for every item, summed over the batch.  anchors/positives:
// N x D projection outputs.
Tensor loss_mcl(const Tensor& anchors, const Tensor& positives);

}  // namespace tricode
