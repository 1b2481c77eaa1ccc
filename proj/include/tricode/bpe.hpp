#pragma once

#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "tricode/errors.hpp"

namespace tricode {

// Byte-pair-encoding vocabulary shared by NL, PL, and AST surfaces.
//
// Id layout: five bracket specials, then the reserved grammar-kind tokens,
// then every byte seen in the training corpus, then one entry per merge.
// Kind tokens are atomic: encoding a string equal to a kind name yields that
// single id, and no merge chain can assemble a reserved string.  The bracket
// specials are never produced by encode(); callers place them explicitly.
class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kCls = 2;
  static constexpr int kSep = 3;
  static constexpr int kMask = 4;
  static constexpr int kNumSpecials = 5;

  // Learns merges by descending adjacent-pair frequency (lexicographic
  // tie-break on the pair) until target_size entries exist or no pair occurs
  // twice.  reserved_kinds become atomic tokens before any byte entries.
  static Vocab train(const std::vector<std::string>& corpus, int target_size,
                     const std::vector<std::string>& reserved_kinds);

  int size() const { return static_cast<int>(tokens_.size()); }
  int reserved_count() const { return kNumSpecials + num_kinds_; }
  int merge_count() const { return static_cast<int>(merges_.size()); }
  const std::string& token(int id) const;
  // -1 when the string is not a vocabulary entry.
  int id_of(const std::string& token) const;

  bool is_special(int id) const { return id >= 0 && id < kNumSpecials; }
  bool is_kind(int id) const {
    return id >= kNumSpecials && id < reserved_count();
  }
  // Id of a reserved kind token; throws ContractError for unknown kinds.
  int kind_id(const std::string& kind) const;

  std::vector<int> encode(const std::string& text) const;
  std::string decode(const std::vector<int>& ids) const;

  void save(const std::string& path) const;
  std::string to_file_string() const;
  static Vocab load(const std::string& path);
  static Vocab from_file_string(const std::string& text);

  const std::vector<std::pair<std::string, std::string>>& merges() const {
    return merges_;
  }

 private:
  Vocab() = default;
  int intern(const std::string& token);
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
  std::vector<std::pair<std::string, std::string>> merges_;
  int num_kinds_ = 0;
};

}  // namespace tricode
