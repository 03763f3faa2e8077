#include "ssmpc/vocab.hpp"

#include <algorithm>
#include <map>
#include <sstream>
#include <stdexcept>

#include "ssmpc/io.hpp"

namespace ssmpc {

Vocab::Vocab(std::vector<std::string> base_tokens, int nmax, int mmax)
    : base_tokens_(std::move(base_tokens)), nmax_(nmax), mmax_(mmax) {
  if (nmax_ < 1 || mmax_ < 1) throw std::invalid_argument("vocab: Nmax and Mmax must be >= 1");
  std::sort(base_tokens_.begin(), base_tokens_.end());
  base_tokens_.erase(std::unique(base_tokens_.begin(), base_tokens_.end()), base_tokens_.end());
  for (size_t i = 0; i < base_tokens_.size(); ++i)
    base_ids_[base_tokens_[i]] = kNumSpecials + static_cast<int>(i);
}

std::vector<int> Vocab::encode_tokens(const std::vector<std::string>& tokens) const {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) {
    auto it = base_ids_.find(t);
    ids.push_back(it == base_ids_.end() ? kUnk : it->second);
  }
  return ids;
}

std::vector<int> Vocab::encode_text(std::string_view text) const {
  return encode_tokens(tokenize_words(text));
}

int Vocab::structure_token_id(StructureKind kind, int ordinal) const {
  const int s = structure_block_start();
  switch (kind) {
    case StructureKind::kIdx:
      if (ordinal < 1 || ordinal > nmax_)
        throw std::out_of_range("IDX ordinal " + std::to_string(ordinal) + " outside 1.." +
                                std::to_string(nmax_));
      return s + ordinal - 1;
    case StructureKind::kIdxNone:
      return s + nmax_;
    case StructureKind::kSpk:
      if (ordinal < 1 || ordinal > mmax_)
        throw std::out_of_range("SPK ordinal " + std::to_string(ordinal) + " outside 1.." +
                                std::to_string(mmax_));
      return s + nmax_ + 1 + ordinal - 1;
    case StructureKind::kSpkNone:
      return s + nmax_ + 1 + mmax_;
    case StructureKind::kMaskIdx:
      return s + nmax_ + 1 + mmax_ + 1;
    case StructureKind::kMaskSpk:
      return s + nmax_ + 1 + mmax_ + 2;
  }
  throw std::invalid_argument("unknown structure kind");
}

std::optional<StructureTokenInfo> Vocab::structure_token_info(int id) const {
  if (!is_structure_id(id)) return std::nullopt;
  int off = id - structure_block_start();
  if (off < nmax_) return StructureTokenInfo{StructureKind::kIdx, off + 1};
  off -= nmax_;
  if (off == 0) return StructureTokenInfo{StructureKind::kIdxNone, 0};
  off -= 1;
  if (off < mmax_) return StructureTokenInfo{StructureKind::kSpk, off + 1};
  off -= mmax_;
  if (off == 0) return StructureTokenInfo{StructureKind::kSpkNone, 0};
  off -= 1;
  if (off == 0) return StructureTokenInfo{StructureKind::kMaskIdx, 0};
  return StructureTokenInfo{StructureKind::kMaskSpk, 0};
}

std::string Vocab::token_string(int id) const {
  static const char* specials[] = {"<pad>", "<bos>", "<eos>", "<unk>"};
  if (id < 0 || id >= size()) throw std::out_of_range("token id out of range");
  if (id < kNumSpecials) return specials[id];
  if (id < structure_block_start()) return base_tokens_[static_cast<size_t>(id - kNumSpecials)];
  const auto info = *structure_token_info(id);
  switch (info.kind) {
    case StructureKind::kIdx: return "[IDX_" + std::to_string(info.ordinal) + "]";
    case StructureKind::kIdxNone: return "[IDX_None]";
    case StructureKind::kSpk: return "[SPK_" + std::to_string(info.ordinal) + "]";
    case StructureKind::kSpkNone: return "[SPK_None]";
    case StructureKind::kMaskIdx: return "[Mask_IDX]";
    case StructureKind::kMaskSpk: return "[Mask_SPK]";
  }
  return "?";
}

std::string Vocab::decode_text(const std::vector<int>& ids, bool skip_specials) const {
  std::string out;
  for (int id : ids) {
    if (skip_specials && id < kNumSpecials && id != kUnk) continue;
    if (!out.empty()) out += ' ';
    out += token_string(id);
  }
  return out;
}

namespace {

const char* kind_tag(StructureKind k) {
  switch (k) {
    case StructureKind::kIdx: return "idx";
    case StructureKind::kIdxNone: return "idx_none";
    case StructureKind::kSpk: return "spk";
    case StructureKind::kSpkNone: return "spk_none";
    case StructureKind::kMaskIdx: return "mask_idx";
    case StructureKind::kMaskSpk: return "mask_spk";
  }
  return "?";
}

}  // namespace

std::string Vocab::serialize() const {
  std::ostringstream out;
  out << "nmax\t" << nmax_ << "\tmmax\t" << mmax_ << "\tbase\t" << base_size() << "\n";
  for (int id = 0; id < size(); ++id) {
    out << token_string(id) << '\t' << id;
    if (id < kNumSpecials)
      out << "\tspecial";
    else if (id < structure_block_start())
      out << "\tbase";
    else
      out << '\t' << kind_tag(structure_token_info(id)->kind);
    out << '\n';
  }
  return out.str();
}

Vocab Vocab::deserialize(const std::string& content) {
  std::istringstream in(content);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("vocab file: empty");
  // A run-provenance header (JSON object line) may precede the table.
  if (!line.empty() && line.front() == '{')
    if (!std::getline(in, line)) throw std::runtime_error("vocab file: empty after header");
  int nmax = 0, mmax = 0, base = 0;
  {
    std::istringstream head(line);
    std::string k1, k2, k3;
    if (!(head >> k1 >> nmax >> k2 >> mmax >> k3 >> base) || k1 != "nmax" || k2 != "mmax" ||
        k3 != "base")
      throw std::runtime_error("vocab file: bad header line");
  }
  std::vector<std::string> base_tokens;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const size_t tab1 = line.find('\t');
    const size_t tab2 = line.find('\t', tab1 + 1);
    if (tab1 == std::string::npos || tab2 == std::string::npos)
      throw std::runtime_error("vocab file: malformed line " + std::to_string(line_no));
    const std::string token = line.substr(0, tab1);
    const std::string cls = line.substr(tab2 + 1);
    if (cls == "base") base_tokens.push_back(token);
  }
  if (static_cast<int>(base_tokens.size()) != base)
    throw std::runtime_error("vocab file: base token count mismatch");
  Vocab v(std::move(base_tokens), nmax, mmax);
  return v;
}

void Vocab::save(const std::string& path) const { atomic_write(path, serialize()); }

Vocab Vocab::load(const std::string& path) { return deserialize(read_file(path)); }

uint64_t Vocab::hash() const { return fnv1a64(serialize()); }

Vocab build_vocab(const std::vector<Dialogue>& corpus, int min_freq, int nmax, int mmax) {
  if (min_freq < 1) throw std::invalid_argument("build_vocab: min_freq must be >= 1");
  std::map<std::string, long> freq;
  for (const auto& d : corpus) {
    const int slots = d.num_utterances() + (d.response ? 1 : 0);
    if (slots > nmax)
      throw std::invalid_argument("build_vocab: dialogue needs " + std::to_string(slots) +
                                  " index tokens but Nmax is " + std::to_string(nmax));
    int m = d.num_context_speakers();
    if (d.response) m = std::max(m, d.response->speaker);
    if (m > mmax)
      throw std::invalid_argument("build_vocab: dialogue has " + std::to_string(m) +
                                  " speakers but Mmax is " + std::to_string(mmax));
    for (const auto& u : d.utterances)
      for (const auto& t : u.tokens) ++freq[t];
    if (d.response)
      for (const auto& t : d.response->tokens) ++freq[t];
  }
  std::vector<std::string> base;
  for (const auto& [token, count] : freq) {
    if (count >= min_freq) base.push_back(token);
  }
  return Vocab(std::move(base), nmax, mmax);
}

}  // namespace ssmpc
