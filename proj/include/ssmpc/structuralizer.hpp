#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ssmpc/corpus.hpp"
#include "ssmpc/vocab.hpp"

namespace ssmpc {

// Per-position role labels of a sequence-structured input. Each utterance
// contributes OWN_IDX, TGT_IDX, SPK, ADR then its UTT tokens; the trailing
// response slot contributes the four RESP_* positions and no UTT tokens.
enum class Role : uint8_t {
  kOwnIdx,
  kTgtIdx,
  kSpk,
  kAdr,
  kUtt,
  kRespOwnIdx,
  kRespTgtIdx,
  kRespSpk,
  kRespAdr,
};

const char* role_name(Role r);
bool is_idx_role(Role r);  // index-kind roles take [IDX_*]/[Mask_IDX]
bool is_spk_role(Role r);

struct MaskTarget {
  int position = 0;
  std::optional<int> original;  // absent when the gold value itself was unknown
};

struct SequenceInput {
  std::vector<int> ids;
  std::vector<Role> roles;
  std::vector<MaskTarget> mask_targets;

  int length() const { return static_cast<int>(ids.size()); }
};

// Visibility of the response slot's structure. Absent fields are
// encoded as mask tokens and recorded without an original.
struct ResponseStructure {
  std::optional<int> target_index;
  std::optional<int> speaker;
  std::optional<int> addressee;
};

using RoleSet = uint16_t;  // bit per Role value

inline RoleSet role_bit(Role r) { return static_cast<RoleSet>(1u << static_cast<unsigned>(r)); }
inline bool role_in(RoleSet set, Role r) { return (set & role_bit(r)) != 0; }
RoleSet parse_role_set(const std::string& csv);  // e.g. "tgt_idx,adr,resp_tgt_idx,resp_adr"
std::string role_set_to_string(RoleSet set);

// Default post-training scope: reply structure only; own-index and speaker
// tokens stay visible.
inline constexpr RoleSet kDefaultMaskScope =
    (1u << static_cast<unsigned>(Role::kTgtIdx)) | (1u << static_cast<unsigned>(Role::kAdr)) |
    (1u << static_cast<unsigned>(Role::kRespTgtIdx)) |
    (1u << static_cast<unsigned>(Role::kRespAdr));

struct MaskSpec {
  double p = 0.0;
  RoleSet scope = kDefaultMaskScope;
  uint64_t seed = 0;
};

struct Segment {
  std::vector<int> ids;
  std::vector<Role> roles;
};

// Gold response-slot visibility for a dialogue that carries a response:
// whatever fields the response has are visible, the rest stay masked.
ResponseStructure response_structure_of(const Dialogue& d);

// [IDX_i][IDX_j][SPK_k][SPK_l] then the utterance tokens; absent target ->
// [IDX_None], absent addressee -> [SPK_None].
Segment structuralize_utterance(const Utterance& u, const Vocab& v);

SequenceInput structuralize_dialogue(const Dialogue& d, const ResponseStructure& response,
                                     const Vocab& v);

// Independent Bernoulli(p) replacement per in-scope structure position;
// originals are appended to mask_targets. Positions already masked are left
// alone. UTT positions are never in scope.
SequenceInput apply_masking(const SequenceInput& s, const MaskSpec& m, const Vocab& v);

// Masks exactly one position (used by per-slot structure evaluation).
SequenceInput mask_position(const SequenceInput& s, int position, const Vocab& v);

// Puts recorded originals back; inverse of apply_masking for targets that
// carry an original.
SequenceInput restore_masks(const SequenceInput& s);

// Bracketed-token rendering, one utterance per line.
std::string render_debug(const SequenceInput& s, const Vocab& v);

}  // namespace ssmpc
