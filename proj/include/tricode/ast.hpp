#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "tricode/errors.hpp"

namespace tricode {

// One node of a syntax tree.  Internal nodes carry a grammar-symbol kind and
// ordered children; leaves carry the surface text of exactly one source token.
// Anonymous leaves (keywords, operators, punctuation) have kind == text.
struct AstNode {
  std::string kind;
  std::string text;
  bool leaf = false;
  std::vector<AstNode> children;
  // Source byte span for leaves produced by parse(); -1 when unknown
  // (ingested trees).
  int start_byte = -1;
  int end_byte = -1;

  static AstNode make_leaf(std::string kind, std::string text,
                           int start = -1, int end = -1);
  static AstNode make_internal(std::string kind, std::vector<AstNode> children);
};

// Structural equality on (kind, text, leaf, children); byte spans are
// parser metadata and do not participate.
bool operator==(const AstNode& a, const AstNode& b);
inline bool operator!=(const AstNode& a, const AstNode& b) { return !(a == b); }

// Depth-first pre-order rendering of a tree: one token per node, the
// parent-child relation as position pairs, and a per-position identifier flag.
struct AstSequence {
  struct Token {
    std::string surface;
    std::string kind;
  };
  std::vector<Token> tokens;
  std::vector<std::pair<int, int>> edges;  // (parent position, child position)
  std::vector<bool> identifier_flags;
};

// One source token with its identifier label, in source order.
struct CodeTokenSpan {
  std::string surface;
  bool is_identifier = false;
  int start_byte = -1;
  int end_byte = -1;
};

// Parses mini-language source (function definitions, assignments,
// arithmetic/comparison expressions, calls, literals, return/if with
// indentation blocks, # comments).  Throws ParseError with line/column and
// the expected-token set on invalid input.
AstNode parse(const std::string& source);

// Pre-order serialization.  Internal tokens use the kind name as surface,
// leaves their text (kind name if the text is empty, which only ingested
// trees can produce).
AstSequence serialize(const AstNode& root);

// Inverse of serialize for well-formed sequences: positions without children
// become leaves.  Used by round-trip checks.
AstNode tree_from_sequence(const AstSequence& seq);

// Every source leaf in order with its identifier flag.
std::vector<CodeTokenSpan> code_token_labels(const AstNode& root);

// JSON tree exchange format: {"kind": K, "text": T} for leaves,
// {"kind": K, "children": [...]} for internal nodes.
AstNode ingest_ast(const std::string& path);
AstNode ast_from_json_text(const std::string& text);
std::string ast_to_json_text(const AstNode& root, bool pretty = false);

// Internal-node kind inventory of the mini-language grammar.  These names
// appear as surface tokens in serialized sequences and are reserved atomic
// vocabulary entries.
const std::vector<std::string>& grammar_internal_kinds();

// Collects every internal-node kind appearing in a tree (for reserving kinds
// of ingested foreign-language trees).
void collect_internal_kinds(const AstNode& root, std::vector<std::string>* out);

}  // namespace tricode
