#pragma once

#include <string>
#include <utility>
#include <vector>

#include "tricode/ast.hpp"
#include "tricode/bpe.hpp"
#include "tricode/errors.hpp"

namespace tricode {

enum class Segment { CLS, NL, SEP, PL, AST, PAD };

const char* segment_name(Segment s);

// One example's three modalities as token ids, before packing.  AST edges
// index into `ast` and connect the first subword of each serialized node
// (identifier leaves may span several subwords; the anchor is the first).
struct ModalTriple {
  bool has_nl = false;
  std::vector<int> nl;
  std::vector<int> pl;
  std::vector<bool> pl_identifier;          // parallel to pl
  std::vector<int> ast;
  std::vector<int> ast_node_starts;         // first-subword index per node
  std::vector<std::pair<int, int>> ast_edges;  // anchor-index pairs into ast
  bool ast_before_pl = false;               // segment-order swap marker
};

// Per-segment token budgets applied at pack time (tail truncation).
struct Budgets {
  int nl = 32;
  int pl = 48;
  int ast = 64;
};

// The concatenated encoder input: [CLS] w [SEP] c [SEP] a [SEP] for paired
// examples, [CLS] c [SEP] a [SEP] for unpaired, with c and a exchanged when
// the triple carries the swap marker.
struct PackedInput {
  std::vector<int> ids;
  std::vector<Segment> segments;
  std::vector<int> nl_positions;
  std::vector<int> pl_positions;
  std::vector<int> ast_positions;
  std::vector<int> ast_node_positions;         // packed anchor positions
  std::vector<std::pair<int, int>> edge_pairs;  // packed position pairs
  std::vector<bool> identifier_labels;          // parallel to pl_positions
  int length() const { return static_cast<int>(ids.size()); }
};

PackedInput pack(const ModalTriple& triple, const Budgets& budgets);

// The NL-only and PL+AST-only projections of one example (the two sides of
// the comment-vs-code contrastive pairing).
PackedInput pack_nl_only(const ModalTriple& triple, const Budgets& budgets);
PackedInput pack_pl_ast(const ModalTriple& triple, const Budgets& budgets);

// Toggles the segment-order marker; packing the result places AST before PL.
ModalTriple swap_pl_ast(const ModalTriple& triple);

// Extends with [PAD] up to `length`; PAD positions carry no labels.
void pad_to(PackedInput* packed, int length);

// One line of the corpus JSONL.  Exactly one of `code` / `ast_file` is set.
struct CorpusExample {
  bool has_comment = false;
  std::string comment;
  std::string code;
  std::string ast_file;
  int cluster_id = -1;  // -1 when absent
};

std::vector<CorpusExample> load_corpus_jsonl(const std::string& path);
CorpusExample corpus_example_from_json_line(const std::string& line,
                                            int line_no);
std::string corpus_example_to_json_line(const CorpusExample& example);
void save_corpus_jsonl(const std::vector<CorpusExample>& examples,
                       const std::string& path);

// Tokenizes one corpus example into its three modalities.  `base_dir` is
// prepended to relative ast_file references.
ModalTriple build_triple(const CorpusExample& example, const Vocab& vocab,
                         const std::string& base_dir = "");

// The AST kind inventory referenced by a corpus (grammar kinds plus any
// kinds found in ingested tree files), for vocabulary reservation.
std::vector<std::string> collect_corpus_kinds(
    const std::vector<CorpusExample>& examples,
    const std::string& base_dir = "");

// All surface strings of a corpus (NL comments, code token surfaces, AST
// leaf texts), the BPE training stream.
std::vector<std::string> collect_corpus_surfaces(
    const std::vector<CorpusExample>& examples,
    const std::string& base_dir = "");

}  // namespace tricode
