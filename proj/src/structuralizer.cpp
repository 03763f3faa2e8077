#include "ssmpc/structuralizer.hpp"

#include <sstream>
#include <stdexcept>

#include "ssmpc/rng.hpp"

namespace ssmpc {

const char* role_name(Role r) {
  switch (r) {
    case Role::kOwnIdx: return "own_idx";
    case Role::kTgtIdx: return "tgt_idx";
    case Role::kSpk: return "spk";
    case Role::kAdr: return "adr";
    case Role::kUtt: return "utt";
    case Role::kRespOwnIdx: return "resp_own_idx";
    case Role::kRespTgtIdx: return "resp_tgt_idx";
    case Role::kRespSpk: return "resp_spk";
    case Role::kRespAdr: return "resp_adr";
  }
  return "?";
}

bool is_idx_role(Role r) {
  return r == Role::kOwnIdx || r == Role::kTgtIdx || r == Role::kRespOwnIdx ||
         r == Role::kRespTgtIdx;
}

bool is_spk_role(Role r) {
  return r == Role::kSpk || r == Role::kAdr || r == Role::kRespSpk || r == Role::kRespAdr;
}

RoleSet parse_role_set(const std::string& csv) {
  RoleSet set = 0;
  std::istringstream in(csv);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (item.empty()) continue;
    bool found = false;
    for (int r = 0; r <= static_cast<int>(Role::kRespAdr); ++r) {
      if (item == role_name(static_cast<Role>(r))) {
        set |= role_bit(static_cast<Role>(r));
        found = true;
        break;
      }
    }
    if (!found) throw std::invalid_argument("unknown role name: " + item);
  }
  return set;
}

std::string role_set_to_string(RoleSet set) {
  std::string out;
  for (int r = 0; r <= static_cast<int>(Role::kRespAdr); ++r) {
    if (role_in(set, static_cast<Role>(r))) {
      if (!out.empty()) out += ',';
      out += role_name(static_cast<Role>(r));
    }
  }
  return out;
}

Segment structuralize_utterance(const Utterance& u, const Vocab& v) {
  Segment seg;
  seg.ids.push_back(v.structure_token_id(StructureKind::kIdx, u.index));
  seg.roles.push_back(Role::kOwnIdx);
  seg.ids.push_back(u.target_index ? v.structure_token_id(StructureKind::kIdx, *u.target_index)
                                   : v.structure_token_id(StructureKind::kIdxNone));
  seg.roles.push_back(Role::kTgtIdx);
  seg.ids.push_back(v.structure_token_id(StructureKind::kSpk, u.speaker));
  seg.roles.push_back(Role::kSpk);
  seg.ids.push_back(u.addressee ? v.structure_token_id(StructureKind::kSpk, *u.addressee)
                                : v.structure_token_id(StructureKind::kSpkNone));
  seg.roles.push_back(Role::kAdr);
  for (int id : v.encode_tokens(u.tokens)) {
    seg.ids.push_back(id);
    seg.roles.push_back(Role::kUtt);
  }
  return seg;
}

ResponseStructure response_structure_of(const Dialogue& d) {
  if (!d.response) throw std::invalid_argument("dialogue has no response");
  ResponseStructure rs;
  rs.target_index = d.response->target_index;
  rs.speaker = d.response->speaker;
  rs.addressee = d.response->addressee;
  return rs;
}

SequenceInput structuralize_dialogue(const Dialogue& d, const ResponseStructure& response,
                                     const Vocab& v) {
  const int n = d.num_utterances();
  if (n < 1) throw std::invalid_argument("structuralize_dialogue: empty dialogue");
  if (response.target_index && (*response.target_index < 1 || *response.target_index > n))
    throw std::out_of_range("response target_index outside 1..n");

  SequenceInput s;
  for (const auto& u : d.utterances) {
    Segment seg = structuralize_utterance(u, v);
    s.ids.insert(s.ids.end(), seg.ids.begin(), seg.ids.end());
    s.roles.insert(s.roles.end(), seg.roles.begin(), seg.roles.end());
  }

  auto push = [&](int id, Role role) {
    s.ids.push_back(id);
    s.roles.push_back(role);
  };
  auto push_masked = [&](Role role) {
    const StructureKind mask = is_idx_role(role) ? StructureKind::kMaskIdx : StructureKind::kMaskSpk;
    s.mask_targets.push_back(MaskTarget{s.length(), std::nullopt});
    push(v.structure_token_id(mask), role);
  };

  push(v.structure_token_id(StructureKind::kIdx, n + 1), Role::kRespOwnIdx);
  if (response.target_index)
    push(v.structure_token_id(StructureKind::kIdx, *response.target_index), Role::kRespTgtIdx);
  else
    push_masked(Role::kRespTgtIdx);
  if (response.speaker)
    push(v.structure_token_id(StructureKind::kSpk, *response.speaker), Role::kRespSpk);
  else
    push_masked(Role::kRespSpk);
  if (response.addressee)
    push(v.structure_token_id(StructureKind::kSpk, *response.addressee), Role::kRespAdr);
  else
    push_masked(Role::kRespAdr);
  return s;
}

SequenceInput apply_masking(const SequenceInput& s, const MaskSpec& m, const Vocab& v) {
  if (m.p < 0.0 || m.p > 1.0) throw std::invalid_argument("mask probability outside [0,1]");
  if (m.p > 0.0 && m.scope == 0) throw std::invalid_argument("mask scope empty with p > 0");
  SequenceInput out = s;
  if (m.p == 0.0) return out;
  const int mask_idx = v.structure_token_id(StructureKind::kMaskIdx);
  const int mask_spk = v.structure_token_id(StructureKind::kMaskSpk);
  Rng rng(m.seed);
  for (int pos = 0; pos < out.length(); ++pos) {
    const Role role = out.roles[static_cast<size_t>(pos)];
    if (role == Role::kUtt || !role_in(m.scope, role)) continue;
    int& id = out.ids[static_cast<size_t>(pos)];
    if (id == mask_idx || id == mask_spk) continue;  // absent gold, already masked
    if (!rng.bernoulli(m.p)) continue;
    out.mask_targets.push_back(MaskTarget{pos, id});
    id = is_idx_role(role) ? mask_idx : mask_spk;
  }
  return out;
}

SequenceInput mask_position(const SequenceInput& s, int position, const Vocab& v) {
  if (position < 0 || position >= s.length()) throw std::out_of_range("mask position out of range");
  const Role role = s.roles[static_cast<size_t>(position)];
  if (role == Role::kUtt) throw std::invalid_argument("UTT positions are never masked");
  SequenceInput out = s;
  int& id = out.ids[static_cast<size_t>(position)];
  out.mask_targets.push_back(MaskTarget{position, id});
  id = v.structure_token_id(is_idx_role(role) ? StructureKind::kMaskIdx : StructureKind::kMaskSpk);
  return out;
}

SequenceInput restore_masks(const SequenceInput& s) {
  SequenceInput out;
  out.ids = s.ids;
  out.roles = s.roles;
  for (const auto& t : s.mask_targets) {
    if (t.original)
      out.ids[static_cast<size_t>(t.position)] = *t.original;
    else
      out.mask_targets.push_back(t);  // unknown gold stays masked
  }
  return out;
}

std::string render_debug(const SequenceInput& s, const Vocab& v) {
  std::string out;
  for (int pos = 0; pos < s.length(); ++pos) {
    const Role role = s.roles[static_cast<size_t>(pos)];
    const bool line_start = role == Role::kOwnIdx || role == Role::kRespOwnIdx;
    if (line_start && pos > 0) out += '\n';
    else if (pos > 0) out += ' ';
    out += v.token_string(s.ids[static_cast<size_t>(pos)]);
  }
  out += '\n';
  return out;
}

}  // namespace ssmpc
