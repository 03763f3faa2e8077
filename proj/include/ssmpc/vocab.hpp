#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ssmpc/corpus.hpp"

namespace ssmpc {

enum class StructureKind { kIdx, kSpk, kIdxNone, kSpkNone, kMaskIdx, kMaskSpk };

struct StructureTokenInfo {
  StructureKind kind;
  int ordinal = 0;  // meaningful for kIdx / kSpk only
};

// Token-id space: specials (PAD,BOS,EOS,UNK), then the base vocabulary in
// lexicographic order, then the structure-token block
//   [IDX_1..IDX_Nmax] [IDX_None] [SPK_1..SPK_Mmax] [SPK_None] [Mask_IDX] [Mask_SPK].
// The layout is a pure function of (base vocabulary, Nmax, Mmax).
class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kUnk = 3;
  static constexpr int kNumSpecials = 4;

  Vocab() = default;
  Vocab(std::vector<std::string> base_tokens, int nmax, int mmax);

  int size() const { return kNumSpecials + base_size() + structure_block_size(); }
  int base_size() const { return static_cast<int>(base_tokens_.size()); }
  int structure_block_size() const { return nmax_ + 1 + mmax_ + 1 + 2; }
  int structure_block_start() const { return kNumSpecials + base_size(); }
  int nmax() const { return nmax_; }
  int mmax() const { return mmax_; }

  // Free text only; never produces structure ids.
  std::vector<int> encode_text(std::string_view text) const;
  std::vector<int> encode_tokens(const std::vector<std::string>& tokens) const;

  int structure_token_id(StructureKind kind, int ordinal = 0) const;
  std::optional<StructureTokenInfo> structure_token_info(int id) const;
  bool is_structure_id(int id) const {
    return id >= structure_block_start() && id < size();
  }

  std::string token_string(int id) const;  // inverse of encode for base/specials; bracket names for structure
  std::string decode_text(const std::vector<int>& ids, bool skip_specials = true) const;

  std::string serialize() const;
  static Vocab deserialize(const std::string& content);
  void save(const std::string& path) const;
  static Vocab load(const std::string& path);

  // Stable digest of the id space; checkpoints carry it.
  uint64_t hash() const;

 private:
  std::vector<std::string> base_tokens_;
  std::map<std::string, int> base_ids_;
  int nmax_ = 0;
  int mmax_ = 0;
};

// Frequency-cut whitespace vocabulary over all utterance and response tokens.
// Throws if any dialogue needs more than Nmax index or Mmax speaker tokens
// (the response slot occupies index n+1).
Vocab build_vocab(const std::vector<Dialogue>& corpus, int min_freq, int nmax, int mmax);

}  // namespace ssmpc
