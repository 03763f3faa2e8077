#pragma once

#include <string>
#include <vector>

#include "ssmpc/corpus.hpp"
#include "ssmpc/metrics.hpp"
#include "ssmpc/model.hpp"
#include "ssmpc/structuralizer.hpp"
#include "ssmpc/vocab.hpp"

namespace ssmpc {

using Model = ModelT<float>;

struct SlotPrediction {
  int position = 0;        // position in the sequence input
  Role role = Role::kUtt;  // which slot kind was filled
  int ordinal = 0;         // 1..n / 1..m; 0 means None
  double confidence = 0.0;  // softmax probability over the legal candidate set
};

struct DecodeOptions {
  int max_len = 50;
  int beam = 1;  // 1 = greedy; 2..5 = length-normalized beam search

  void validate() const;
};

struct GenerationResult {
  std::vector<int> response_ids;  // generated content tokens (EOS excluded)
  std::string text;
  std::vector<SlotPrediction> predicted_structure;  // empty when nothing was masked
};

// Argmax over the encoder logits at each masked position, restricted to the
// legal candidates: IDX-kind slots draw from {IDX_1..IDX_n, IDX_None}, SPK-kind
// slots from {SPK_1..SPK_m, SPK_None}, with n and m read off the sequence.
// Ties break toward the most recent utterance / most recently active speaker.
std::vector<SlotPrediction> predict_structure(const Model& model, const Vocab& vocab,
                                              const SequenceInput& seq);

// Returns a copy of seq with the predicted slots written in as real structure
// tokens and their mask records dropped.
SequenceInput resolve_structure(const SequenceInput& seq, const Vocab& vocab,
                                const std::vector<SlotPrediction>& preds);

// Decode conditioned on encoder states. Structure tokens, PAD and BOS are
// never emitted; decoding stops at EOS or after max_len emissions.
std::vector<int> decode(const Model& model, const Model::Mat& enc_h, const Vocab& vocab,
                        const DecodeOptions& opts);

// Full pipeline: structuralize (absent response fields masked), predict any
// masked slots, re-encode the resolved sequence, decode the response.
GenerationResult generate_response(const Model& model, const Vocab& vocab, const Dialogue& d,
                                   const ResponseStructure& response, const DecodeOptions& opts);

// One step of the real-world accumulation loop: the response slot carries the
// given speaker with target and addressee masked; the generated utterance is
// appended to history with its predicted structure. With enforce_consistency
// the addressee is overwritten by the predicted target's speaker before the
// response is generated.
struct RealWorldStep {
  GenerationResult result;
  int predicted_target = 0;    // 0 = None
  int predicted_addressee = 0;  // 0 = None
  bool consistent = false;  // predicted addressee == speaker of predicted target
};

RealWorldStep real_world_step(const Model& model, const Vocab& vocab, Dialogue& history,
                              int next_speaker, const DecodeOptions& opts,
                              bool enforce_consistency = false);

// Per-slot masked recovery over a gold corpus: every slot in `slots` that has
// a gold value is masked alone, predicted, and compared. Index-kind and
// speaker-kind slots are pooled separately.
struct StructureEval {
  double target_p1 = 0.0;
  double addressee_p1 = 0.0;
  long target_slots = 0;
  long addressee_slots = 0;
};

StructureEval evaluate_structure(const Model& model, const Vocab& vocab,
                                 const std::vector<Dialogue>& corpus,
                                 RoleSet slots = kDefaultMaskScope);

// Greedy generation with full gold structure visible, scored against the gold
// responses.
EvalReport evaluate_generation_corpus(const Model& model, const Vocab& vocab,
                                      const std::vector<Dialogue>& corpus,
                                      const DecodeOptions& opts);

}  // namespace ssmpc
