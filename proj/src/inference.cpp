#include "ssmpc/inference.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace ssmpc {

void DecodeOptions::validate() const {
  if (max_len < 1) throw std::invalid_argument("decode: max_len must be >= 1");
  if (beam < 1 || beam > 5) throw std::invalid_argument("decode: beam width outside 1..5");
}

namespace {

int context_size(const SequenceInput& seq) {
  int n = 0;
  for (Role r : seq.roles)
    if (r == Role::kOwnIdx) ++n;
  return n;
}

int speaker_count(const Vocab& vocab, const SequenceInput& seq) {
  int m = 0;
  for (int pos = 0; pos < seq.length(); ++pos) {
    if (seq.roles[static_cast<size_t>(pos)] != Role::kSpk) continue;
    const auto info = vocab.structure_token_info(seq.ids[static_cast<size_t>(pos)]);
    if (info && info->kind == StructureKind::kSpk) m = std::max(m, info->ordinal);
  }
  return m;
}

// Candidates in tie-break preference order, most recent utterance first,
// None always last.
std::vector<int> idx_candidates(const Vocab& vocab, int n) {
  std::vector<int> out;
  out.reserve(static_cast<size_t>(n) + 1);
  for (int k = n; k >= 1; --k) out.push_back(vocab.structure_token_id(StructureKind::kIdx, k));
  out.push_back(vocab.structure_token_id(StructureKind::kIdxNone));
  return out;
}

// Candidates ordered by each speaker's most recent visible utterance.
std::vector<int> spk_candidates(const Vocab& vocab, const SequenceInput& seq, int m) {
  std::vector<int> last_active(static_cast<size_t>(m) + 1, 0);
  int utt_index = 0;
  for (int pos = 0; pos < seq.length(); ++pos) {
    const Role role = seq.roles[static_cast<size_t>(pos)];
    if (role == Role::kOwnIdx) ++utt_index;
    if (role != Role::kSpk) continue;
    const auto info = vocab.structure_token_info(seq.ids[static_cast<size_t>(pos)]);
    if (info && info->kind == StructureKind::kSpk && info->ordinal <= m)
      last_active[static_cast<size_t>(info->ordinal)] =
          std::max(last_active[static_cast<size_t>(info->ordinal)], utt_index);
  }
  std::vector<int> ordinals(static_cast<size_t>(m));
  std::iota(ordinals.begin(), ordinals.end(), 1);
  std::stable_sort(ordinals.begin(), ordinals.end(), [&](int a, int b) {
    return last_active[static_cast<size_t>(a)] > last_active[static_cast<size_t>(b)];
  });
  std::vector<int> out;
  out.reserve(ordinals.size() + 1);
  for (int k : ordinals) out.push_back(vocab.structure_token_id(StructureKind::kSpk, k));
  out.push_back(vocab.structure_token_id(StructureKind::kSpkNone));
  return out;
}

int ordinal_of(const Vocab& vocab, int id) {
  const auto info = vocab.structure_token_info(id);
  if (!info) throw std::logic_error("expected a structure token");
  return (info->kind == StructureKind::kIdx || info->kind == StructureKind::kSpk) ? info->ordinal
                                                                                  : 0;
}

}  // namespace

std::vector<SlotPrediction> predict_structure(const Model& model, const Vocab& vocab,
                                              const SequenceInput& seq) {
  const int mask_idx = vocab.structure_token_id(StructureKind::kMaskIdx);
  const int mask_spk = vocab.structure_token_id(StructureKind::kMaskSpk);
  std::vector<int> masked_positions;
  for (int pos = 0; pos < seq.length(); ++pos) {
    const int id = seq.ids[static_cast<size_t>(pos)];
    if (id == mask_idx || id == mask_spk) masked_positions.push_back(pos);
  }
  if (masked_positions.empty())
    throw std::invalid_argument("predict_structure: no masked structure positions");

  const int n = context_size(seq);
  const int m = speaker_count(vocab, seq);
  const auto acts = model.encoder_forward(seq.ids, /*want_logits=*/true);

  std::vector<SlotPrediction> preds;
  preds.reserve(masked_positions.size());
  for (int pos : masked_positions) {
    const Role role = seq.roles[static_cast<size_t>(pos)];
    const std::vector<int> cands =
        is_idx_role(role) ? idx_candidates(vocab, n) : spk_candidates(vocab, seq, m);

    const auto row = acts.logits.row(pos);
    int best = cands.front();
    for (int c : cands)
      if (row(c) > row(best)) best = c;  // strict >: earlier (more recent) wins ties

    // Softmax over the candidate set only.
    double denom = 0.0;
    const double mx = static_cast<double>(row(best));
    for (int c : cands) denom += std::exp(static_cast<double>(row(c)) - mx);

    SlotPrediction p;
    p.position = pos;
    p.role = role;
    p.ordinal = ordinal_of(vocab, best);
    p.confidence = 1.0 / denom * std::exp(static_cast<double>(row(best)) - mx);
    preds.push_back(p);
  }
  return preds;
}

SequenceInput resolve_structure(const SequenceInput& seq, const Vocab& vocab,
                                const std::vector<SlotPrediction>& preds) {
  SequenceInput out = seq;
  std::vector<char> resolved(static_cast<size_t>(seq.length()), 0);
  for (const auto& p : preds) {
    if (p.position < 0 || p.position >= seq.length())
      throw std::out_of_range("resolve_structure: position out of range");
    const bool idx = is_idx_role(p.role);
    int id;
    if (p.ordinal > 0)
      id = vocab.structure_token_id(idx ? StructureKind::kIdx : StructureKind::kSpk, p.ordinal);
    else
      id = vocab.structure_token_id(idx ? StructureKind::kIdxNone : StructureKind::kSpkNone);
    out.ids[static_cast<size_t>(p.position)] = id;
    resolved[static_cast<size_t>(p.position)] = 1;
  }
  out.mask_targets.erase(
      std::remove_if(out.mask_targets.begin(), out.mask_targets.end(),
                     [&](const MaskTarget& t) { return resolved[static_cast<size_t>(t.position)]; }),
      out.mask_targets.end());
  return out;
}

namespace {

std::vector<char> blocked_ids(const Vocab& vocab) {
  std::vector<char> blocked(static_cast<size_t>(vocab.size()), 0);
  blocked[Vocab::kPad] = 1;
  blocked[Vocab::kBos] = 1;
  for (int id = vocab.structure_block_start(); id < vocab.size(); ++id)
    blocked[static_cast<size_t>(id)] = 1;
  return blocked;
}

std::vector<int> decode_greedy(const Model& model, const Model::Mat& enc_h, const Vocab& vocab,
                               int max_len) {
  const auto blocked = blocked_ids(vocab);
  std::vector<int> prefix = {Vocab::kBos};
  std::vector<int> out;
  for (int t = 0; t < max_len; ++t) {
    const auto acts = model.decoder_forward(prefix, enc_h, /*want_logits=*/true);
    const auto row = acts.logits.row(static_cast<long>(prefix.size()) - 1);
    int best = -1;
    for (int j = 0; j < vocab.size(); ++j) {
      if (blocked[static_cast<size_t>(j)]) continue;
      if (best < 0 || row(j) > row(best)) best = j;
    }
    if (best == Vocab::kEos) break;
    out.push_back(best);
    prefix.push_back(best);
  }
  return out;
}

struct Beam {
  std::vector<int> prefix;  // starts with BOS; EOS never appended
  double logprob = 0.0;
  int emitted = 0;  // tokens emitted, EOS included
  bool done = false;
};

std::vector<int> decode_beam(const Model& model, const Model::Mat& enc_h, const Vocab& vocab,
                             const DecodeOptions& opts) {
  const auto blocked = blocked_ids(vocab);
  const int width = opts.beam;
  std::vector<Beam> beams = {Beam{{Vocab::kBos}, 0.0, 0, false}};

  for (int step = 0; step < opts.max_len; ++step) {
    bool any_open = false;
    std::vector<Beam> next;
    for (const auto& b : beams) {
      if (b.done) {
        next.push_back(b);
        continue;
      }
      any_open = true;
      const auto acts = model.decoder_forward(b.prefix, enc_h, /*want_logits=*/true);
      const auto row = acts.logits.row(static_cast<long>(b.prefix.size()) - 1);
      const float mx = row.maxCoeff();
      double denom = 0.0;
      for (long j = 0; j < row.cols(); ++j) denom += std::exp(static_cast<double>(row(j) - mx));
      const double lse = static_cast<double>(mx) + std::log(denom);

      // Collect the top `width` legal continuations of this beam.
      std::vector<std::pair<double, int>> cands;
      for (int j = 0; j < vocab.size(); ++j) {
        if (blocked[static_cast<size_t>(j)]) continue;
        cands.emplace_back(static_cast<double>(row(j)) - lse, j);
      }
      std::partial_sort(cands.begin(),
                        cands.begin() + std::min<size_t>(width, cands.size()), cands.end(),
                        [](const auto& a, const auto& b2) {
                          if (a.first != b2.first) return a.first > b2.first;
                          return a.second < b2.second;
                        });
      for (size_t c = 0; c < std::min<size_t>(width, cands.size()); ++c) {
        Beam nb = b;
        nb.logprob += cands[c].first;
        nb.emitted += 1;
        if (cands[c].second == Vocab::kEos)
          nb.done = true;
        else
          nb.prefix.push_back(cands[c].second);
        next.push_back(std::move(nb));
      }
    }
    if (!any_open) break;
    std::sort(next.begin(), next.end(), [](const Beam& a, const Beam& b) {
      if (a.logprob != b.logprob) return a.logprob > b.logprob;
      return a.prefix < b.prefix;
    });
    if (next.size() > static_cast<size_t>(width)) next.resize(static_cast<size_t>(width));
    beams = std::move(next);
  }

  // Length-normalized selection, finished beams preferred.
  const Beam* best = nullptr;
  double best_score = 0.0;
  for (const auto& b : beams) {
    const double score = b.logprob / std::max(1, b.emitted);
    if (best == nullptr || (b.done && !best->done) ||
        (b.done == best->done && score > best_score)) {
      best = &b;
      best_score = score;
    }
  }
  std::vector<int> out(best->prefix.begin() + 1, best->prefix.end());
  return out;
}

}  // namespace

std::vector<int> decode(const Model& model, const Model::Mat& enc_h, const Vocab& vocab,
                        const DecodeOptions& opts) {
  opts.validate();
  if (opts.beam == 1) return decode_greedy(model, enc_h, vocab, opts.max_len);
  return decode_beam(model, enc_h, vocab, opts);
}

GenerationResult generate_response(const Model& model, const Vocab& vocab, const Dialogue& d,
                                   const ResponseStructure& response, const DecodeOptions& opts) {
  opts.validate();
  const SequenceInput seq = structuralize_dialogue(d, response, vocab);

  GenerationResult res;
  SequenceInput resolved = seq;
  const int mask_idx = vocab.structure_token_id(StructureKind::kMaskIdx);
  const int mask_spk = vocab.structure_token_id(StructureKind::kMaskSpk);
  const bool any_masked =
      std::any_of(seq.ids.begin(), seq.ids.end(),
                  [&](int id) { return id == mask_idx || id == mask_spk; });
  if (any_masked) {
    res.predicted_structure = predict_structure(model, vocab, seq);
    resolved = resolve_structure(seq, vocab, res.predicted_structure);
  }

  const auto enc = model.encoder_forward(resolved.ids, /*want_logits=*/false);
  res.response_ids = decode(model, enc.h, vocab, opts);
  res.text = vocab.decode_text(res.response_ids);
  return res;
}

RealWorldStep real_world_step(const Model& model, const Vocab& vocab, Dialogue& history,
                              int next_speaker, const DecodeOptions& opts,
                              bool enforce_consistency) {
  opts.validate();
  const int n = history.num_utterances();
  const int m = history.num_context_speakers();
  if (n < 1) throw std::invalid_argument("real_world_step: empty history");
  if (next_speaker < 1 || next_speaker > m + 1)
    throw std::invalid_argument("real_world_step: next_speaker outside 1..m+1");
  if (next_speaker > vocab.mmax())
    throw std::invalid_argument("real_world_step: next_speaker exceeds vocabulary Mmax");

  ResponseStructure rs;  // target and addressee masked, speaker known
  rs.speaker = next_speaker;
  const SequenceInput seq = structuralize_dialogue(history, rs, vocab);

  RealWorldStep step;
  auto preds = predict_structure(model, vocab, seq);
  size_t adr_at = preds.size();
  for (size_t i = 0; i < preds.size(); ++i) {
    if (preds[i].role == Role::kRespTgtIdx) step.predicted_target = preds[i].ordinal;
    if (preds[i].role == Role::kRespAdr) {
      step.predicted_addressee = preds[i].ordinal;
      adr_at = i;
    }
  }
  const int target_speaker =
      step.predicted_target > 0
          ? history.utterances[static_cast<size_t>(step.predicted_target) - 1].speaker
          : 0;
  if (enforce_consistency && adr_at < preds.size()) {
    step.predicted_addressee = target_speaker;
    preds[adr_at].ordinal = target_speaker;
  }
  step.consistent = step.predicted_target > 0 ? step.predicted_addressee == target_speaker
                                              : step.predicted_addressee == 0;

  const SequenceInput resolved = resolve_structure(seq, vocab, preds);
  const auto enc = model.encoder_forward(resolved.ids, /*want_logits=*/false);
  step.result.response_ids = decode(model, enc.h, vocab, opts);
  step.result.text = vocab.decode_text(step.result.response_ids);
  step.result.predicted_structure = preds;

  Utterance u;
  u.index = n + 1;
  u.speaker = next_speaker;
  if (step.predicted_target > 0) u.target_index = step.predicted_target;
  if (step.predicted_addressee > 0) u.addressee = step.predicted_addressee;
  u.text = step.result.text;
  u.tokens = tokenize_words(u.text);
  history.utterances.push_back(std::move(u));
  if (next_speaker == m + 1)
    history.speaker_labels.push_back("spk" + std::to_string(next_speaker));
  return step;
}

StructureEval evaluate_structure(const Model& model, const Vocab& vocab,
                                 const std::vector<Dialogue>& corpus, RoleSet slots) {
  if (corpus.empty()) throw std::invalid_argument("evaluate_structure: empty corpus");
  StructureEval ev;
  long target_hits = 0, addressee_hits = 0;
  for (const auto& d : corpus) {
    const ResponseStructure rs =
        d.response ? response_structure_of(d) : ResponseStructure{};
    const SequenceInput seq = structuralize_dialogue(d, rs, vocab);
    for (int pos = 0; pos < seq.length(); ++pos) {
      const Role role = seq.roles[static_cast<size_t>(pos)];
      if (role == Role::kUtt || !role_in(slots, role)) continue;
      const auto info = vocab.structure_token_info(seq.ids[static_cast<size_t>(pos)]);
      if (!info || (info->kind != StructureKind::kIdx && info->kind != StructureKind::kSpk))
        continue;  // absent gold (None) or already masked: not evaluable
      const int gold = info->ordinal;

      const SequenceInput masked = mask_position(seq, pos, vocab);
      const auto preds = predict_structure(model, vocab, masked);
      const auto it = std::find_if(preds.begin(), preds.end(),
                                   [pos](const SlotPrediction& p) { return p.position == pos; });
      if (it == preds.end()) continue;
      const bool hit = it->ordinal == gold;
      if (is_idx_role(role)) {
        ev.target_slots += 1;
        target_hits += hit ? 1 : 0;
      } else {
        ev.addressee_slots += 1;
        addressee_hits += hit ? 1 : 0;
      }
    }
  }
  if (ev.target_slots > 0)
    ev.target_p1 = static_cast<double>(target_hits) / static_cast<double>(ev.target_slots);
  if (ev.addressee_slots > 0)
    ev.addressee_p1 =
        static_cast<double>(addressee_hits) / static_cast<double>(ev.addressee_slots);
  return ev;
}

EvalReport evaluate_generation_corpus(const Model& model, const Vocab& vocab,
                                      const std::vector<Dialogue>& corpus,
                                      const DecodeOptions& opts) {
  std::vector<std::string> candidates, references;
  for (const auto& d : corpus) {
    if (!d.response) continue;
    const auto res = generate_response(model, vocab, d, response_structure_of(d), opts);
    candidates.push_back(res.text);
    references.push_back(d.response->text);
  }
  if (candidates.empty())
    throw std::invalid_argument("evaluate_generation_corpus: no dialogues with responses");
  return evaluate_generation(candidates, references);
}

}  // namespace ssmpc
