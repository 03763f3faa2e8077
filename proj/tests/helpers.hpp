#pragma once

// Shared builders for the test binaries: tiny model configs, hand-made
// dialogues, and parameter-space distances.

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "ssmpc/corpus.hpp"
#include "ssmpc/model.hpp"
#include "ssmpc/vocab.hpp"

namespace test_helpers {

inline ssmpc::ModelConfig tiny_config(int vocab_size, uint64_t seed = 1) {
  ssmpc::ModelConfig c;
  c.d_model = 16;
  c.n_heads = 2;
  c.n_enc_layers = 1;
  c.n_dec_layers = 1;
  c.ffn_dim = 32;
  c.max_positions = 160;
  c.vocab_size = vocab_size;
  c.init_seed = seed;
  return c;
}

inline ssmpc::Utterance utt(int index, int speaker, std::optional<int> target,
                            std::optional<int> addressee, const std::string& text) {
  ssmpc::Utterance u;
  u.index = index;
  u.speaker = speaker;
  u.target_index = target;
  u.addressee = addressee;
  u.text = text;
  u.tokens = ssmpc::tokenize_words(text);
  return u;
}

// Three utterances, two speakers, full structure, plus a gold response.
inline ssmpc::Dialogue golden_dialogue() {
  ssmpc::Dialogue d;
  d.speaker_labels = {"alice", "bob"};
  d.utterances.push_back(utt(1, 1, std::nullopt, std::nullopt, "hello there"));
  d.utterances.push_back(utt(2, 2, 1, 1, "hi alice"));
  d.utterances.push_back(utt(3, 1, 2, 2, "how are you"));
  d.response = utt(4, 2, 3, 1, "fine thanks");
  return d;
}

// Four base words, two speakers, full structure: with Nmax 5 / Mmax 3 the
// vocabulary built from it has exactly 4 + 4 + 12 = 20 ids.
inline ssmpc::Dialogue four_word_dialogue() {
  ssmpc::Dialogue d;
  d.speaker_labels = {"s1", "s2"};
  d.utterances.push_back(utt(1, 1, std::nullopt, std::nullopt, "aa bb"));
  d.utterances.push_back(utt(2, 2, 1, 1, "cc aa"));
  d.utterances.push_back(utt(3, 1, 2, 2, "bb dd"));
  d.response = utt(4, 2, 3, 1, "aa dd");
  return d;
}

inline ssmpc::Vocab tiny_vocab() {
  return ssmpc::build_vocab({four_word_dialogue()}, /*min_freq=*/1, /*nmax=*/5, /*mmax=*/3);
}

// Largest absolute difference across all parameter tensors.
template <typename S>
double param_distance(ssmpc::ModelT<S>& a, ssmpc::ModelT<S>& b) {
  auto ta = a.params.tensors();
  auto tb = b.params.tensors();
  double worst = 0.0;
  for (size_t i = 0; i < ta.size(); ++i) {
    const double diff =
        static_cast<double>((*ta[i].mat - *tb[i].mat).array().abs().maxCoeff());
    worst = std::max(worst, diff);
  }
  return worst;
}

}  // namespace test_helpers
