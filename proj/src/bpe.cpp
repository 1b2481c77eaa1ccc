#include "tricode/bpe.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace tricode {

namespace {

const char* kSpecialNames[] = {"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"};

std::string escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (unsigned char c : s) {
    switch (c) {
      case '\\':
        out += "\\\\";
        break;
      case '\n':
        out += "\\n";
        break;
      case '\r':
        out += "\\r";
        break;
      case '\t':
        out += "\\t";
        break;
      default:
        if (c < 0x20 || c == 0x7f) {
          char buf[5];
          std::snprintf(buf, sizeof(buf), "\\x%02x", c);
          out += buf;
        } else {
          out += static_cast<char>(c);
        }
    }
  }
  return out;
}

std::string unescape(const std::string& s, int line_no) {
  std::string out;
  for (size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '\\') {
      out += s[i];
      continue;
    }
    if (i + 1 >= s.size()) {
      throw FormatError("vocab line " + std::to_string(line_no) +
                        ": dangling escape");
    }
    const char c = s[++i];
    switch (c) {
      case '\\':
        out += '\\';
        break;
      case 'n':
        out += '\n';
        break;
      case 'r':
        out += '\r';
        break;
      case 't':
        out += '\t';
        break;
      case 'x': {
        if (i + 2 >= s.size()) {
          throw FormatError("vocab line " + std::to_string(line_no) +
                            ": truncated \\x escape");
        }
        const std::string hex = s.substr(i + 1, 2);
        char* end = nullptr;
        const long v = std::strtol(hex.c_str(), &end, 16);
        if (end != hex.c_str() + 2) {
          throw FormatError("vocab line " + std::to_string(line_no) +
                            ": bad \\x escape");
        }
        out += static_cast<char>(v);
        i += 2;
        break;
      }
      default:
        throw FormatError("vocab line " + std::to_string(line_no) +
                          ": unknown escape \\" + std::string(1, c));
    }
  }
  return out;
}

// Fuses every non-overlapping left-to-right occurrence of (left, right).
void apply_merge(std::vector<std::string>& pieces, const std::string& left,
                 const std::string& right) {
  size_t w = 0;
  for (size_t r = 0; r < pieces.size();) {
    if (r + 1 < pieces.size() && pieces[r] == left && pieces[r + 1] == right) {
      pieces[w++] = left + right;
      r += 2;
    } else {
      if (w != r) {  // guard: self-move-assignment leaves a string unspecified
        pieces[w] = std::move(pieces[r]);
      }
      ++w;
      r += 1;
    }
  }
  pieces.resize(w);
}

}  // namespace

int Vocab::intern(const std::string& token) {
  auto [it, inserted] =
      index_.emplace(token, static_cast<int>(tokens_.size()));
  if (inserted) {
    tokens_.push_back(token);
  }
  return it->second;
}

Vocab Vocab::train(const std::vector<std::string>& corpus, int target_size,
                   const std::vector<std::string>& reserved_kinds) {
  if (corpus.empty()) {
    throw ContractError("train_bpe: empty corpus");
  }
  Vocab v;
  for (const char* name : kSpecialNames) {
    v.intern(name);
  }
  for (const std::string& kind : reserved_kinds) {
    if (kind.empty()) {
      throw ContractError("train_bpe: empty reserved kind name");
    }
    v.intern(kind);
  }
  v.num_kinds_ = static_cast<int>(v.tokens_.size()) - kNumSpecials;

  std::set<unsigned char> byte_set;
  for (const std::string& s : corpus) {
    for (unsigned char c : s) {
      byte_set.insert(c);
    }
  }
  std::set<std::string> reserved(v.tokens_.begin(), v.tokens_.end());
  for (unsigned char c : byte_set) {
    v.intern(std::string(1, static_cast<char>(c)));
  }
  if (target_size <= static_cast<int>(v.tokens_.size())) {
    throw ContractError(
        "train_bpe: target_size " + std::to_string(target_size) +
        " must exceed " + std::to_string(v.reserved_count()) +
        " reserved entries plus " + std::to_string(byte_set.size()) +
        " byte entries");
  }

  std::vector<std::vector<std::string>> sequences;
  sequences.reserve(corpus.size());
  for (const std::string& s : corpus) {
    std::vector<std::string> pieces;
    pieces.reserve(s.size());
    for (char c : s) {
      pieces.emplace_back(1, c);
    }
    sequences.push_back(std::move(pieces));
  }

  while (static_cast<int>(v.tokens_.size()) < target_size) {
    // std::map iteration is ascending, so the first pair at the maximal
    // count is the lexicographically smallest: the declared tie-break.
    std::map<std::pair<std::string, std::string>, int64_t> counts;
    for (const auto& seq : sequences) {
      for (size_t i = 0; i + 1 < seq.size(); ++i) {
        ++counts[{seq[i], seq[i + 1]}];
      }
    }
    std::pair<std::string, std::string> best;
    int64_t best_count = 0;
    for (const auto& [pair, count] : counts) {
      if (count > best_count && !reserved.count(pair.first + pair.second)) {
        best = pair;
        best_count = count;
      }
    }
    if (best_count < 2) {
      break;  // Corpus exhausted: vocab stays below target_size.
    }
    v.merges_.push_back(best);
    v.intern(best.first + best.second);
    for (auto& seq : sequences) {
      apply_merge(seq, best.first, best.second);
    }
  }
  return v;
}

const std::string& Vocab::token(int id) const {
  if (id < 0 || id >= size()) {
    throw ContractError("token id " + std::to_string(id) +
                        " out of range for vocab of " + std::to_string(size()));
  }
  return tokens_[static_cast<size_t>(id)];
}

int Vocab::id_of(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? -1 : it->second;
}

int Vocab::kind_id(const std::string& kind) const {
  const int id = id_of(kind);
  if (id < 0 || !is_kind(id)) {
    throw ContractError("'" + kind + "' is not a reserved kind token");
  }
  return id;
}

std::vector<int> Vocab::encode(const std::string& text) const {
  if (text.empty()) {
    return {};
  }
  {
    const int id = id_of(text);
    if (id >= 0 && is_kind(id)) {
      return {id};
    }
  }
  // Unknown bytes become empty pieces, which no merge rule can touch.
  std::vector<std::string> pieces;
  pieces.reserve(text.size());
  for (char c : text) {
    const std::string byte(1, c);
    pieces.push_back(id_of(byte) >= 0 ? byte : std::string());
  }
  for (const auto& [left, right] : merges_) {
    apply_merge(pieces, left, right);
  }
  std::vector<int> ids;
  ids.reserve(pieces.size());
  for (const std::string& piece : pieces) {
    ids.push_back(piece.empty() ? kUnk : id_of(piece));
  }
  return ids;
}

std::string Vocab::decode(const std::vector<int>& ids) const {
  std::string out;
  for (int id : ids) {
    if (id == kUnk) {
      out += "\xef\xbf\xbd";  // U+FFFD
    } else {
      out += token(id);
    }
  }
  return out;
}

std::string Vocab::to_file_string() const {
  std::ostringstream out;
  out << "tricode-vocab v1 tokens=" << size()
      << " reserved=" << reserved_count() << " merges=" << merge_count()
      << "\n";
  for (const std::string& t : tokens_) {
    out << escape(t) << "\n";
  }
  for (const auto& [left, right] : merges_) {
    out << escape(left) << "\t" << escape(right) << "\n";
  }
  return out.str();
}

void Vocab::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw FormatError("cannot write vocab file '" + path + "'");
  }
  out << to_file_string();
  if (!out) {
    throw FormatError("failed writing vocab file '" + path + "'");
  }
}

Vocab Vocab::from_file_string(const std::string& text) {
  std::istringstream in(text);
  std::string header;
  if (!std::getline(in, header)) {
    throw FormatError("vocab file is empty");
  }
  int n_tokens = -1, n_reserved = -1, n_merges = -1;
  if (std::sscanf(header.c_str(),
                  "tricode-vocab v1 tokens=%d reserved=%d merges=%d",
                  &n_tokens, &n_reserved, &n_merges) != 3 ||
      n_tokens < 0 || n_reserved < kNumSpecials || n_merges < 0 ||
      n_reserved > n_tokens) {
    throw FormatError("vocab file has a malformed header: " + header);
  }
  Vocab v;
  v.num_kinds_ = n_reserved - kNumSpecials;
  std::string line;
  for (int i = 0; i < n_tokens; ++i) {
    if (!std::getline(in, line)) {
      throw FormatError("vocab file truncated: expected " +
                        std::to_string(n_tokens) + " tokens, got " +
                        std::to_string(i));
    }
    const std::string tok = unescape(line, i + 2);
    if (tok.empty()) {
      throw FormatError("vocab line " + std::to_string(i + 2) +
                        ": empty token");
    }
    if (v.index_.count(tok)) {
      throw FormatError("vocab line " + std::to_string(i + 2) +
                        ": duplicate token '" + escape(tok) + "'");
    }
    v.intern(tok);
  }
  for (int i = 0; i < kNumSpecials; ++i) {
    if (v.tokens_[static_cast<size_t>(i)] != kSpecialNames[i]) {
      throw FormatError(std::string("vocab id ") + std::to_string(i) +
                        " must be " + kSpecialNames[i]);
    }
  }
  for (int i = 0; i < n_merges; ++i) {
    if (!std::getline(in, line)) {
      throw FormatError("vocab file truncated: expected " +
                        std::to_string(n_merges) + " merges, got " +
                        std::to_string(i));
    }
    const int line_no = n_tokens + i + 2;
    const size_t tab = line.find('\t');
    if (tab == std::string::npos) {
      throw FormatError("vocab line " + std::to_string(line_no) +
                        ": merge rule lacks a tab separator");
    }
    const std::string left = unescape(line.substr(0, tab), line_no);
    const std::string right = unescape(line.substr(tab + 1), line_no);
    if (v.id_of(left) < 0 || v.id_of(right) < 0 || v.id_of(left + right) < 0) {
      throw FormatError("vocab line " + std::to_string(line_no) +
                        ": merge rule references unknown tokens");
    }
    v.merges_.emplace_back(left, right);
  }
  if (std::getline(in, line) && !line.empty()) {
    throw FormatError("vocab file has trailing content: " + line);
  }
  return v;
}

Vocab Vocab::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw FormatError("cannot open vocab file '" + path + "'");
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_file_string(buf.str());
}

}  // namespace tricode
