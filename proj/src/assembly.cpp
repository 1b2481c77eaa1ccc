#include "tricode/assembly.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace tricode {

namespace {

using nlohmann::json;

void check_budgets(const Budgets& budgets) {
  if (budgets.nl <= 0) {
    throw ConfigError("budget nl must be positive, got " +
                      std::to_string(budgets.nl));
  }
  if (budgets.pl <= 0) {
    throw ConfigError("budget pl must be positive, got " +
                      std::to_string(budgets.pl));
  }
  if (budgets.ast <= 0) {
    throw ConfigError("budget ast must be positive, got " +
                      std::to_string(budgets.ast));
  }
}

void append_segment(PackedInput* out, Segment tag,
                    const std::vector<int>& ids, int limit,
                    std::vector<int>* positions) {
  const int n = std::min<int>(static_cast<int>(ids.size()), limit);
  for (int i = 0; i < n; ++i) {
    positions->push_back(out->length());
    out->ids.push_back(ids[static_cast<size_t>(i)]);
    out->segments.push_back(tag);
  }
  out->ids.push_back(Vocab::kSep);
  out->segments.push_back(Segment::SEP);
}

std::string joined_path(const std::string& base_dir, const std::string& file) {
  if (base_dir.empty() || file.empty() || file.front() == '/') {
    return file;
  }
  return base_dir + "/" + file;
}

AstNode example_tree(const CorpusExample& example,
                     const std::string& base_dir) {
  if (!example.code.empty()) {
    return parse(example.code);
  }
  return ingest_ast(joined_path(base_dir, example.ast_file));
}

}  // namespace

const char* segment_name(Segment s) {
  switch (s) {
    case Segment::CLS:
      return "CLS";
    case Segment::NL:
      return "NL";
    case Segment::SEP:
      return "SEP";
    case Segment::PL:
      return "PL";
    case Segment::AST:
      return "AST";
    case Segment::PAD:
      return "PAD";
  }
  return "?";
}

PackedInput pack(const ModalTriple& triple, const Budgets& budgets) {
  check_budgets(budgets);
  if (triple.pl.empty()) {
    throw ContractError("pack: triple has an empty PL segment");
  }
  if (triple.pl_identifier.size() != triple.pl.size()) {
    throw ContractError("pack: identifier flags not parallel to PL tokens");
  }

  PackedInput out;
  out.ids.push_back(Vocab::kCls);
  out.segments.push_back(Segment::CLS);

  auto append_pl = [&] {
    append_segment(&out, Segment::PL, triple.pl, budgets.pl,
                   &out.pl_positions);
    for (size_t i = 0; i < out.pl_positions.size(); ++i) {
      out.identifier_labels.push_back(triple.pl_identifier[i]);
    }
  };
  auto append_ast = [&] {
    const int ast_start = out.length();
    append_segment(&out, Segment::AST, triple.ast, budgets.ast,
                   &out.ast_positions);
    const int kept = static_cast<int>(out.ast_positions.size());
    for (int anchor : triple.ast_node_starts) {
      if (anchor < kept) {
        out.ast_node_positions.push_back(ast_start + anchor);
      }
    }
    for (const auto& [a, b] : triple.ast_edges) {
      if (a < kept && b < kept) {
        out.edge_pairs.emplace_back(ast_start + a, ast_start + b);
      }
    }
  };

  if (triple.has_nl) {
    append_segment(&out, Segment::NL, triple.nl, budgets.nl,
                   &out.nl_positions);
  }
  if (triple.ast_before_pl) {
    append_ast();
    append_pl();
  } else {
    append_pl();
    append_ast();
  }
  return out;
}

PackedInput pack_nl_only(const ModalTriple& triple, const Budgets& budgets) {
  check_budgets(budgets);
  if (!triple.has_nl) {
    throw ContractError("pack_nl_only: example has no NL comment");
  }
  PackedInput out;
  out.ids.push_back(Vocab::kCls);
  out.segments.push_back(Segment::CLS);
  append_segment(&out, Segment::NL, triple.nl, budgets.nl, &out.nl_positions);
  return out;
}

PackedInput pack_pl_ast(const ModalTriple& triple, const Budgets& budgets) {
  ModalTriple code_only = triple;
  code_only.has_nl = false;
  code_only.nl.clear();
  return pack(code_only, budgets);
}

ModalTriple swap_pl_ast(const ModalTriple& triple) {
  ModalTriple swapped = triple;
  swapped.ast_before_pl = !triple.ast_before_pl;
  return swapped;
}

void pad_to(PackedInput* packed, int length) {
  if (length < packed->length()) {
    throw ContractError("pad_to: target " + std::to_string(length) +
                        " shorter than packed length " +
                        std::to_string(packed->length()));
  }
  while (packed->length() < length) {
    packed->ids.push_back(Vocab::kPad);
    packed->segments.push_back(Segment::PAD);
  }
}

CorpusExample corpus_example_from_json_line(const std::string& line,
                                            int line_no) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw FormatError("corpus line " + std::to_string(line_no) +
                      ": invalid JSON: " + e.what());
  }
  if (!j.is_object()) {
    throw FormatError("corpus line " + std::to_string(line_no) +
                      ": not an object");
  }
  CorpusExample ex;
  if (j.contains("comment") && !j.at("comment").is_null()) {
    if (!j.at("comment").is_string()) {
      throw FormatError("corpus line " + std::to_string(line_no) +
                        ": \"comment\" is not a string");
    }
    ex.comment = j.at("comment").get<std::string>();
    ex.has_comment = !ex.comment.empty();
  }
  const bool has_code = j.contains("code");
  const bool has_ast = j.contains("ast_file");
  if (has_code == has_ast) {
    throw FormatError("corpus line " + std::to_string(line_no) +
                      ": need exactly one of \"code\" and \"ast_file\"");
  }
  if (has_code) {
    if (!j.at("code").is_string() || j.at("code").get<std::string>().empty()) {
      throw FormatError("corpus line " + std::to_string(line_no) +
                        ": \"code\" must be a non-empty string");
    }
    ex.code = j.at("code").get<std::string>();
  } else {
    if (!j.at("ast_file").is_string() ||
        j.at("ast_file").get<std::string>().empty()) {
      throw FormatError("corpus line " + std::to_string(line_no) +
                        ": \"ast_file\" must be a non-empty string");
    }
    ex.ast_file = j.at("ast_file").get<std::string>();
  }
  if (j.contains("cluster_id")) {
    if (!j.at("cluster_id").is_number_integer() ||
        j.at("cluster_id").get<int>() < 0) {
      throw FormatError("corpus line " + std::to_string(line_no) +
                        ": \"cluster_id\" must be a non-negative integer");
    }
    ex.cluster_id = j.at("cluster_id").get<int>();
  }
  return ex;
}

std::vector<CorpusExample> load_corpus_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw FormatError("cannot open corpus file '" + path + "'");
  }
  std::vector<CorpusExample> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) {
      continue;
    }
    out.push_back(corpus_example_from_json_line(line, line_no));
  }
  return out;
}

std::string corpus_example_to_json_line(const CorpusExample& example) {
  nlohmann::ordered_json j;
  if (example.has_comment) {
    j["comment"] = example.comment;
  }
  if (!example.code.empty()) {
    j["code"] = example.code;
  } else {
    j["ast_file"] = example.ast_file;
  }
  if (example.cluster_id >= 0) {
    j["cluster_id"] = example.cluster_id;
  }
  return j.dump();
}

void save_corpus_jsonl(const std::vector<CorpusExample>& examples,
                       const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw FormatError("cannot write corpus file '" + path + "'");
  }
  for (const CorpusExample& example : examples) {
    out << corpus_example_to_json_line(example) << "\n";
  }
  if (!out) {
    throw FormatError("short write to corpus file '" + path + "'");
  }
}

ModalTriple build_triple(const CorpusExample& example, const Vocab& vocab,
                         const std::string& base_dir) {
  ModalTriple triple;
  if (example.has_comment) {
    triple.nl = vocab.encode(example.comment);
    triple.has_nl = !triple.nl.empty();
  }

  const AstNode root = example_tree(example, base_dir);

  // PL: each source token becomes its subwords; identifier flags propagate
  // to every subword of a flagged token.
  for (const CodeTokenSpan& span : code_token_labels(root)) {
    for (int id : vocab.encode(span.surface)) {
      triple.pl.push_back(id);
      triple.pl_identifier.push_back(span.is_identifier);
    }
  }
  if (triple.pl.empty()) {
    throw FormatError("corpus example yields no code tokens");
  }

  // AST: internal nodes are single reserved kind ids, leaves are subword
  // runs; edges connect the first subword of each endpoint node.
  const AstSequence seq = serialize(root);
  for (size_t node = 0; node < seq.tokens.size(); ++node) {
    triple.ast_node_starts.push_back(static_cast<int>(triple.ast.size()));
    const auto& tok = seq.tokens[node];
    const bool internal =
        std::find_if(seq.edges.begin(), seq.edges.end(),
                     [&](const auto& e) {
                       return e.first == static_cast<int>(node);
                     }) != seq.edges.end();
    if (internal) {
      triple.ast.push_back(vocab.kind_id(tok.kind));
    } else {
      const std::vector<int> ids = vocab.encode(tok.surface);
      if (ids.empty()) {
        // Surface can only be empty for an empty-text leaf; represent the
        // node by its kind so the position exists.
        triple.ast.push_back(vocab.kind_id(tok.kind));
      } else {
        triple.ast.insert(triple.ast.end(), ids.begin(), ids.end());
      }
    }
  }
  for (const auto& [p, c] : seq.edges) {
    triple.ast_edges.emplace_back(
        triple.ast_node_starts[static_cast<size_t>(p)],
        triple.ast_node_starts[static_cast<size_t>(c)]);
  }
  return triple;
}

std::vector<std::string> collect_corpus_kinds(
    const std::vector<CorpusExample>& examples, const std::string& base_dir) {
  std::vector<std::string> kinds = grammar_internal_kinds();
  for (const CorpusExample& ex : examples) {
    if (!ex.ast_file.empty()) {
      collect_internal_kinds(example_tree(ex, base_dir), &kinds);
    }
  }
  return kinds;
}

std::vector<std::string> collect_corpus_surfaces(
    const std::vector<CorpusExample>& examples, const std::string& base_dir) {
  std::vector<std::string> out;
  for (const CorpusExample& ex : examples) {
    if (ex.has_comment) {
      out.push_back(ex.comment);
    }
    for (const CodeTokenSpan& span : code_token_labels(example_tree(ex, base_dir))) {
      if (!span.surface.empty()) {
        out.push_back(span.surface);
      }
    }
  }
  return out;
}

}  // namespace tricode
