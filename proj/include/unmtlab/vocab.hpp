#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include <unmtlab/common.hpp>
#include <unmtlab/synthlang.hpp>

namespace unmtlab {

using TokenSeq = std::vector<int32_t>;
using synthlang::Words;

// Joint vocabulary over both languages with reserved specials at fixed low
// ids. The mask id doubles as the blank symbol for denoising.
class Vocab {
 public:
  static constexpr int32_t kPad = 0;
  static constexpr int32_t kBos = 1;
  static constexpr int32_t kEos = 2;
  static constexpr int32_t kUnk = 3;
  static constexpr int32_t kMask = 4;
  static constexpr int32_t kNumSpecials = 5;

  Vocab();

  int32_t add(const std::string& token);
  int32_t encode(const std::string& token) const;
  TokenSeq encode(const Words& words) const;
  const std::string& decode(int32_t id) const;
  Words decode(const TokenSeq& ids) const;

  int32_t size() const { return static_cast<int32_t>(id_to_token_.size()); }
  bool is_special(int32_t id) const { return id < kNumSpecials; }
  uint64_t fingerprint() const;

  void save(const std::string& path) const;
  static Vocab load(const std::string& path);

 private:
  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, int32_t> token_to_id_;
};

// Joint vocabulary over segmented corpora; ids assigned by (count desc,
// token asc) so assignment is stable across runs. Tokens under min_count are
// left out and encode to unk.
Vocab build_vocab(const std::vector<std::vector<Words>>& segmented_corpora, int64_t min_count = 1);

}  // namespace unmtlab
