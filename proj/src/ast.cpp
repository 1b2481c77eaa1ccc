#include "tricode/ast.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace tricode {

namespace {

struct Token {
  enum class Type { Name, Number, Str, Op, Newline, Indent, Dedent, End };
  Type type;
  std::string text;
  int line;
  int col;
  int start;
  int end;
};

const char* describe(const Token& t) {
  switch (t.type) {
    case Token::Type::Newline:
      return "end of line";
    case Token::Type::Indent:
      return "indented block";
    case Token::Type::Dedent:
      return "end of block";
    case Token::Type::End:
      return "end of input";
    default:
      return nullptr;
  }
}

std::string quoted(const Token& t) {
  if (const char* d = describe(t)) {
    return d;
  }
  return "'" + t.text + "'";
}

bool is_keyword(const std::string& s) {
  return s == "def" || s == "return" || s == "if" || s == "else" || s == "not";
}

class Lexer {
 public:
  explicit Lexer(const std::string& src) : src_(src) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    std::vector<int> indents{0};
    size_t pos = 0;
    int line = 1;
    while (pos < src_.size()) {
      // Leading whitespace of a physical line.
      size_t indent_start = pos;
      while (pos < src_.size() && src_[pos] == ' ') {
        ++pos;
      }
      if (pos < src_.size() && src_[pos] == '\t') {
        throw ParseError(line, column(pos, indent_start), "tab in indentation");
      }
      if (pos >= src_.size()) {
        break;
      }
      if (src_[pos] == '\n') {
        ++pos;
        ++line;
        continue;
      }
      if (src_[pos] == '#') {
        while (pos < src_.size() && src_[pos] != '\n') {
          ++pos;
        }
        continue;
      }
      const int indent = static_cast<int>(pos - indent_start);
      const int indent_col = indent + 1;
      if (indent > indents.back()) {
        indents.push_back(indent);
        out.push_back({Token::Type::Indent, "", line, indent_col,
                       static_cast<int>(pos), static_cast<int>(pos)});
      } else {
        while (indent < indents.back()) {
          indents.pop_back();
          out.push_back({Token::Type::Dedent, "", line, indent_col,
                         static_cast<int>(pos), static_cast<int>(pos)});
        }
        if (indent != indents.back()) {
          throw ParseError(line, indent_col,
                           "inconsistent indentation (no enclosing block at "
                           "this depth)");
        }
      }
      lex_line(out, pos, line, indent_start);
      out.push_back({Token::Type::Newline, "", line,
                     column(pos, indent_start), static_cast<int>(pos),
                     static_cast<int>(pos)});
      if (pos < src_.size() && src_[pos] == '\n') {
        ++pos;
        ++line;
      }
    }
    while (indents.back() > 0) {
      indents.pop_back();
      out.push_back({Token::Type::Dedent, "", line, 1,
                     static_cast<int>(src_.size()),
                     static_cast<int>(src_.size())});
    }
    out.push_back({Token::Type::End, "", line, 1,
                   static_cast<int>(src_.size()),
                   static_cast<int>(src_.size())});
    return out;
  }

 private:
  static int column(size_t pos, size_t line_start) {
    return static_cast<int>(pos - line_start) + 1;
  }

  void lex_line(std::vector<Token>& out, size_t& pos, int line,
                size_t line_start) {
    while (pos < src_.size() && src_[pos] != '\n') {
      const char c = src_[pos];
      if (c == ' ' || c == '\t') {
        ++pos;
        continue;
      }
      if (c == '#') {
        while (pos < src_.size() && src_[pos] != '\n') {
          ++pos;
        }
        return;
      }
      const int col = column(pos, line_start);
      const size_t start = pos;
      if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        while (pos < src_.size() &&
               (std::isalnum(static_cast<unsigned char>(src_[pos])) ||
                src_[pos] == '_')) {
          ++pos;
        }
        out.push_back({Token::Type::Name, src_.substr(start, pos - start),
                       line, col, static_cast<int>(start),
                       static_cast<int>(pos)});
        continue;
      }
      if (std::isdigit(static_cast<unsigned char>(c))) {
        while (pos < src_.size() &&
               std::isdigit(static_cast<unsigned char>(src_[pos]))) {
          ++pos;
        }
        if (pos + 1 < src_.size() && src_[pos] == '.' &&
            std::isdigit(static_cast<unsigned char>(src_[pos + 1]))) {
          ++pos;
          while (pos < src_.size() &&
                 std::isdigit(static_cast<unsigned char>(src_[pos]))) {
            ++pos;
          }
        }
        out.push_back({Token::Type::Number, src_.substr(start, pos - start),
                       line, col, static_cast<int>(start),
                       static_cast<int>(pos)});
        continue;
      }
      if (c == '"') {
        ++pos;
        while (pos < src_.size() && src_[pos] != '"' && src_[pos] != '\n') {
          if (src_[pos] == '\\' && pos + 1 < src_.size() &&
              src_[pos + 1] != '\n') {
            pos += 2;
          } else {
            ++pos;
          }
        }
        if (pos >= src_.size() || src_[pos] != '"') {
          throw ParseError(line, col, "unterminated string literal");
        }
        ++pos;
        out.push_back({Token::Type::Str, src_.substr(start, pos - start),
                       line, col, static_cast<int>(start),
                       static_cast<int>(pos)});
        continue;
      }
      static const char* kTwoCharOps[] = {"==", "!=", "<=", ">="};
      bool matched = false;
      for (const char* op : kTwoCharOps) {
        if (src_.compare(pos, 2, op) == 0) {
          out.push_back({Token::Type::Op, op, line, col,
                         static_cast<int>(pos), static_cast<int>(pos + 2)});
          pos += 2;
          matched = true;
          break;
        }
      }
      if (matched) {
        continue;
      }
      static const std::string kSingleOps = "=+-*/%(),:<>";
      if (kSingleOps.find(c) != std::string::npos) {
        out.push_back({Token::Type::Op, std::string(1, c), line, col,
                       static_cast<int>(pos), static_cast<int>(pos + 1)});
        ++pos;
        continue;
      }
      throw ParseError(line, col,
                       std::string("unexpected character '") + c + "'");
    }
  }

  const std::string& src_;
};

AstNode leaf_from(const Token& t, const std::string& kind) {
  return AstNode::make_leaf(kind, t.text, t.start, t.end);
}

AstNode anon_leaf(const Token& t) { return leaf_from(t, t.text); }

class Parser {
 public:
  explicit Parser(std::vector<Token> tokens) : tokens_(std::move(tokens)) {}

  AstNode parse_module() {
    if (at(Token::Type::End)) {
      throw ParseError(1, 1, "expected a statement, got end of input");
    }
    std::vector<AstNode> stmts;
    while (!at(Token::Type::End)) {
      stmts.push_back(parse_statement());
    }
    return AstNode::make_internal("module", std::move(stmts));
  }

 private:
  const Token& peek(size_t ahead = 0) const {
    const size_t i = std::min(index_ + ahead, tokens_.size() - 1);
    return tokens_[i];
  }

  bool at(Token::Type type) const { return peek().type == type; }

  bool at_op(const char* text) const {
    return peek().type == Token::Type::Op && peek().text == text;
  }

  bool at_word(const char* text) const {
    return peek().type == Token::Type::Name && peek().text == text;
  }

  Token take() { return tokens_[index_++]; }

  [[noreturn]] void fail(const std::string& expected) const {
    const Token& t = peek();
    throw ParseError(t.line, t.col,
                     "expected " + expected + ", got " + quoted(t));
  }

  Token expect_op(const char* text) {
    if (!at_op(text)) {
      fail(std::string("'") + text + "'");
    }
    return take();
  }

  Token expect_word(const char* text) {
    if (!at_word(text)) {
      fail(std::string("'") + text + "'");
    }
    return take();
  }

  Token expect_identifier() {
    if (!at(Token::Type::Name) || is_keyword(peek().text)) {
      fail("an identifier");
    }
    return take();
  }

  void expect_newline() {
    if (!at(Token::Type::Newline)) {
      fail("end of line");
    }
    take();
  }

  AstNode parse_statement() {
    if (at_word("def")) {
      return parse_function_definition();
    }
    if (at_word("if")) {
      return parse_if();
    }
    if (at_word("return")) {
      return parse_return();
    }
    if (at(Token::Type::Name) && !is_keyword(peek().text) &&
        peek(1).type == Token::Type::Op && peek(1).text == "=") {
      return parse_assignment();
    }
    AstNode expr = parse_expression();
    expect_newline();
    return expr;
  }

  AstNode parse_function_definition() {
    std::vector<AstNode> kids;
    kids.push_back(anon_leaf(expect_word("def")));
    kids.push_back(leaf_from(expect_identifier(), "identifier"));
    kids.push_back(parse_parameters());
    kids.push_back(anon_leaf(expect_op(":")));
    expect_newline();
    kids.push_back(parse_block());
    return AstNode::make_internal("function_definition", std::move(kids));
  }

  AstNode parse_parameters() {
    std::vector<AstNode> kids;
    kids.push_back(anon_leaf(expect_op("(")));
    if (!at_op(")")) {
      kids.push_back(leaf_from(expect_identifier(), "identifier"));
      while (at_op(",")) {
        kids.push_back(anon_leaf(take()));
        kids.push_back(leaf_from(expect_identifier(), "identifier"));
      }
    }
    if (!at_op(")")) {
      fail("')' or ','");
    }
    kids.push_back(anon_leaf(take()));
    return AstNode::make_internal("parameters", std::move(kids));
  }

  AstNode parse_block() {
    if (!at(Token::Type::Indent)) {
      fail("an indented block");
    }
    take();
    std::vector<AstNode> stmts;
    while (!at(Token::Type::Dedent) && !at(Token::Type::End)) {
      stmts.push_back(parse_statement());
    }
    if (at(Token::Type::Dedent)) {
      take();
    }
    return AstNode::make_internal("block", std::move(stmts));
  }

  AstNode parse_if() {
    std::vector<AstNode> kids;
    kids.push_back(anon_leaf(expect_word("if")));
    kids.push_back(parse_expression());
    kids.push_back(anon_leaf(expect_op(":")));
    expect_newline();
    kids.push_back(parse_block());
    if (at_word("else")) {
      kids.push_back(anon_leaf(take()));
      kids.push_back(anon_leaf(expect_op(":")));
      expect_newline();
      kids.push_back(parse_block());
    }
    return AstNode::make_internal("if_statement", std::move(kids));
  }

  AstNode parse_return() {
    std::vector<AstNode> kids;
    kids.push_back(anon_leaf(expect_word("return")));
    if (!at(Token::Type::Newline)) {
      kids.push_back(parse_expression());
    }
    expect_newline();
    return AstNode::make_internal("return_statement", std::move(kids));
  }

  AstNode parse_assignment() {
    std::vector<AstNode> kids;
    kids.push_back(leaf_from(expect_identifier(), "identifier"));
    kids.push_back(anon_leaf(expect_op("=")));
    kids.push_back(parse_expression());
    expect_newline();
    return AstNode::make_internal("assignment", std::move(kids));
  }

  AstNode parse_expression() { return parse_comparison(); }

  AstNode parse_comparison() {
    AstNode left = parse_arith();
    static const char* kCompOps[] = {"==", "!=", "<=", ">=", "<", ">"};
    for (const char* op : kCompOps) {
      if (at_op(op)) {
        std::vector<AstNode> kids;
        kids.push_back(std::move(left));
        kids.push_back(anon_leaf(take()));
        kids.push_back(parse_arith());
        return AstNode::make_internal("comparison_operator", std::move(kids));
      }
    }
    return left;
  }

  AstNode parse_arith() {
    AstNode left = parse_term();
    while (at_op("+") || at_op("-")) {
      std::vector<AstNode> kids;
      kids.push_back(std::move(left));
      kids.push_back(anon_leaf(take()));
      kids.push_back(parse_term());
      left = AstNode::make_internal("binary_operator", std::move(kids));
    }
    return left;
  }

  AstNode parse_term() {
    AstNode left = parse_factor();
    while (at_op("*") || at_op("/") || at_op("%")) {
      std::vector<AstNode> kids;
      kids.push_back(std::move(left));
      kids.push_back(anon_leaf(take()));
      kids.push_back(parse_factor());
      left = AstNode::make_internal("binary_operator", std::move(kids));
    }
    return left;
  }

  AstNode parse_factor() {
    if (at_op("-") || at_word("not")) {
      std::vector<AstNode> kids;
      kids.push_back(anon_leaf(take()));
      kids.push_back(parse_factor());
      return AstNode::make_internal("unary_operator", std::move(kids));
    }
    return parse_postfix();
  }

  AstNode parse_postfix() {
    AstNode node = parse_atom();
    while (at_op("(")) {
      std::vector<AstNode> kids;
      kids.push_back(std::move(node));
      kids.push_back(parse_argument_list());
      node = AstNode::make_internal("call", std::move(kids));
    }
    return node;
  }

  AstNode parse_argument_list() {
    std::vector<AstNode> kids;
    kids.push_back(anon_leaf(expect_op("(")));
    if (!at_op(")")) {
      kids.push_back(parse_expression());
      while (at_op(",")) {
        kids.push_back(anon_leaf(take()));
        kids.push_back(parse_expression());
      }
    }
    if (!at_op(")")) {
      fail("')' or ','");
    }
    kids.push_back(anon_leaf(take()));
    return AstNode::make_internal("argument_list", std::move(kids));
  }

  AstNode parse_atom() {
    if (at(Token::Type::Name) && !is_keyword(peek().text)) {
      return leaf_from(take(), "identifier");
    }
    if (at(Token::Type::Number)) {
      return leaf_from(take(), "number");
    }
    if (at(Token::Type::Str)) {
      return leaf_from(take(), "string");
    }
    if (at_op("(")) {
      std::vector<AstNode> kids;
      kids.push_back(anon_leaf(take()));
      kids.push_back(parse_expression());
      kids.push_back(anon_leaf(expect_op(")")));
      return AstNode::make_internal("parenthesized_expression",
                                    std::move(kids));
    }
    fail("an expression");
  }

  std::vector<Token> tokens_;
  size_t index_ = 0;
};

void serialize_walk(const AstNode& node, int parent_pos, AstSequence* out) {
  const int pos = static_cast<int>(out->tokens.size());
  std::string surface;
  if (node.leaf) {
    surface = node.text.empty() ? node.kind : node.text;
  } else {
    surface = node.kind;
  }
  out->tokens.push_back({std::move(surface), node.kind});
  out->identifier_flags.push_back(node.leaf && node.kind == "identifier");
  if (parent_pos >= 0) {
    out->edges.emplace_back(parent_pos, pos);
  }
  for (const AstNode& child : node.children) {
    serialize_walk(child, pos, out);
  }
}

void labels_walk(const AstNode& node, std::vector<CodeTokenSpan>* out) {
  if (node.leaf) {
    out->push_back({node.text, node.kind == "identifier", node.start_byte,
                    node.end_byte});
    return;
  }
  for (const AstNode& child : node.children) {
    labels_walk(child, out);
  }
}

using nlohmann::json;

AstNode node_from_json(const json& j, const std::string& path) {
  if (!j.is_object()) {
    throw FormatError("at " + path + ": node is not an object");
  }
  if (!j.contains("kind") || !j.at("kind").is_string()) {
    throw FormatError("at " + path + ": missing string field \"kind\"");
  }
  const std::string kind = j.at("kind").get<std::string>();
  const bool has_text = j.contains("text");
  const bool has_children = j.contains("children");
  if (has_text && has_children) {
    throw FormatError("at " + path + ": node has both text and children");
  }
  if (has_text) {
    if (!j.at("text").is_string()) {
      throw FormatError("at " + path + ": \"text\" is not a string");
    }
    return AstNode::make_leaf(kind, j.at("text").get<std::string>());
  }
  if (!has_children) {
    throw FormatError("at " + path + ": node has neither text nor children");
  }
  if (!j.at("children").is_array()) {
    throw FormatError("at " + path + ": \"children\" is not an array");
  }
  const auto& arr = j.at("children");
  if (arr.empty()) {
    // Smallest legal tree: a single node with no children ingests as a leaf
    // whose serialized surface is the kind name.
    return AstNode::make_leaf(kind, "");
  }
  std::vector<AstNode> children;
  children.reserve(arr.size());
  for (size_t i = 0; i < arr.size(); ++i) {
    children.push_back(node_from_json(
        arr[i], path + ".children[" + std::to_string(i) + "]"));
  }
  return AstNode::make_internal(kind, std::move(children));
}

json node_to_json(const AstNode& node) {
  json j;
  j["kind"] = node.kind;
  if (node.leaf) {
    j["text"] = node.text;
  } else {
    json kids = json::array();
    for (const AstNode& child : node.children) {
      kids.push_back(node_to_json(child));
    }
    j["children"] = std::move(kids);
  }
  return j;
}

}  // namespace

AstNode AstNode::make_leaf(std::string kind, std::string text, int start,
                           int end) {
  AstNode n;
  n.kind = std::move(kind);
  n.text = std::move(text);
  n.leaf = true;
  n.start_byte = start;
  n.end_byte = end;
  return n;
}

AstNode AstNode::make_internal(std::string kind, std::vector<AstNode> children) {
  AstNode n;
  n.kind = std::move(kind);
  n.leaf = false;
  n.children = std::move(children);
  return n;
}

bool operator==(const AstNode& a, const AstNode& b) {
  return a.kind == b.kind && a.text == b.text && a.leaf == b.leaf &&
         a.children == b.children;
}

AstNode parse(const std::string& source) {
  Lexer lexer(source);
  Parser parser(lexer.run());
  return parser.parse_module();
}

AstSequence serialize(const AstNode& root) {
  AstSequence seq;
  serialize_walk(root, -1, &seq);
  return seq;
}

AstNode tree_from_sequence(const AstSequence& seq) {
  const int n = static_cast<int>(seq.tokens.size());
  if (n == 0) {
    throw ContractError("tree_from_sequence: empty sequence");
  }
  std::vector<std::vector<int>> children(static_cast<size_t>(n));
  std::vector<bool> has_parent(static_cast<size_t>(n), false);
  for (const auto& [p, c] : seq.edges) {
    if (p < 0 || c < 0 || p >= n || c >= n || p >= c) {
      throw ContractError("tree_from_sequence: edge (" + std::to_string(p) +
                          ", " + std::to_string(c) + ") malformed");
    }
    if (has_parent[static_cast<size_t>(c)]) {
      throw ContractError("tree_from_sequence: position " + std::to_string(c) +
                          " has two parents");
    }
    has_parent[static_cast<size_t>(c)] = true;
    children[static_cast<size_t>(p)].push_back(c);
  }
  for (auto& kids : children) {
    std::sort(kids.begin(), kids.end());
  }
  auto build = [&](auto&& self, int pos) -> AstNode {
    const auto& tok = seq.tokens[static_cast<size_t>(pos)];
    if (children[static_cast<size_t>(pos)].empty()) {
      return AstNode::make_leaf(tok.kind, tok.surface);
    }
    std::vector<AstNode> kids;
    for (int c : children[static_cast<size_t>(pos)]) {
      kids.push_back(self(self, c));
    }
    return AstNode::make_internal(tok.kind, std::move(kids));
  };
  return build(build, 0);
}

std::vector<CodeTokenSpan> code_token_labels(const AstNode& root) {
  std::vector<CodeTokenSpan> out;
  labels_walk(root, &out);
  return out;
}

AstNode ast_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("tree file is not valid JSON: ") + e.what());
  }
  return node_from_json(j, "$");
}

AstNode ingest_ast(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw FormatError("cannot open tree file '" + path + "'");
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return ast_from_json_text(buf.str());
}

std::string ast_to_json_text(const AstNode& root, bool pretty) {
  const json j = node_to_json(root);
  return pretty ? j.dump(2) : j.dump();
}

const std::vector<std::string>& grammar_internal_kinds() {
  static const std::vector<std::string> kKinds = {
      "module",         "function_definition",
      "parameters",     "block",
      "assignment",     "binary_operator",
      "comparison_operator", "unary_operator",
      "call",           "argument_list",
      "return_statement", "if_statement",
      "parenthesized_expression",
  };
  return kKinds;
}

void collect_internal_kinds(const AstNode& root,
                            std::vector<std::string>* out) {
  if (!root.leaf) {
    if (std::find(out->begin(), out->end(), root.kind) == out->end()) {
      out->push_back(root.kind);
    }
    for (const AstNode& child : root.children) {
      collect_internal_kinds(child, out);
    }
  }
}

}  // namespace tricode
