#pragma once

#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "ssmpc/model.hpp"
#include "ssmpc/structuralizer.hpp"
#include "ssmpc/vocab.hpp"

namespace ssmpc {

// Losses use sum reduction internally and report the supervised-position count;
// callers divide at update time so that gradient accumulation is exactly
// equivalent to large-batch training regardless of how examples are split.
struct LossStats {
  double loss_sum = 0.0;
  long count = 0;
  long correct = 0;  // argmax hits over the supervised positions

  double mean() const { return count > 0 ? loss_sum / static_cast<double>(count) : 0.0; }
  void operator+=(const LossStats& o) {
    loss_sum += o.loss_sum;
    count += o.count;
    correct += o.correct;
  }
};

// Cross entropy summed over (row, target-id) pairs. When dlogits is non-null it
// must be zero-initialized to the logits shape; rows receive softmax - onehot.
template <typename S>
LossStats cross_entropy_rows(const typename ModelT<S>::Mat& logits,
                             const std::vector<std::pair<long, int>>& targets,
                             typename ModelT<S>::Mat* dlogits) {
  LossStats stats;
  for (const auto& [row, tgt] : targets) {
    if (row < 0 || row >= logits.rows() || tgt < 0 || tgt >= logits.cols())
      throw std::invalid_argument("cross entropy: target outside logits");
    const auto x = logits.row(row);
    const S mx = x.maxCoeff();
    double sum_exp = 0.0;
    for (long j = 0; j < x.cols(); ++j) sum_exp += std::exp(static_cast<double>(x(j) - mx));
    const double lse = static_cast<double>(mx) + std::log(sum_exp);
    stats.loss_sum += lse - static_cast<double>(x(tgt));
    stats.count += 1;
    long argmax = 0;
    x.maxCoeff(&argmax);
    if (static_cast<int>(argmax) == tgt) stats.correct += 1;
    if (dlogits != nullptr) {
      for (long j = 0; j < x.cols(); ++j)
        (*dlogits)(row, j) +=
            static_cast<S>(std::exp(static_cast<double>(x(j) - mx)) / sum_exp);
      (*dlogits)(row, tgt) -= S(1);
    }
  }
  return stats;
}

// Supervised positions for the post-training objective: every masked structure
// position (recovering its original token) plus every utterance-token position
// (reconstructing itself). With all_positions, visible structure tokens are
// supervised as themselves too.
inline std::vector<std::pair<long, int>> post_train_targets(const SequenceInput& seq,
                                                            bool all_positions) {
  std::vector<std::pair<long, int>> out;
  std::vector<char> is_masked(seq.length(), 0);
  for (const auto& mt : seq.mask_targets) {
    if (mt.position < 0 || mt.position >= static_cast<int>(seq.length()))
      throw std::invalid_argument("post-train targets: mask position out of range");
    is_masked[mt.position] = 1;
    if (mt.original.has_value()) out.emplace_back(mt.position, *mt.original);
  }
  for (size_t i = 0; i < seq.length(); ++i) {
    if (is_masked[i]) continue;
    if (seq.roles[i] == Role::kUtt || all_positions) out.emplace_back(i, seq.ids[i]);
  }
  if (out.empty()) throw std::invalid_argument("post-train loss: no supervised positions");
  return out;
}

// Encoder masked-recovery pass over one prepared (already masked) sequence.
// Gradients are accumulated unnormalized into *grads when non-null.
template <typename S>
LossStats post_train_example(const ModelT<S>& model, const SequenceInput& masked,
                             bool all_positions, typename ModelT<S>::Params* grads,
                             Rng* dropout_rng = nullptr) {
  const auto targets = post_train_targets(masked, all_positions);
  auto acts = model.encoder_forward(masked.ids, /*want_logits=*/true, dropout_rng);
  if (grads == nullptr) return cross_entropy_rows<S>(acts.logits, targets, nullptr);

  typename ModelT<S>::Mat dlogits =
      ModelT<S>::Mat::Zero(acts.logits.rows(), acts.logits.cols());
  const LossStats stats = cross_entropy_rows<S>(acts.logits, targets, &dlogits);
  model.encoder_backward(acts, dlogits, typename ModelT<S>::Mat(), *grads);
  return stats;
}

// Teacher-forced decoder pass: prefix = BOS + response tokens, targets =
// response tokens + EOS, conditioned on the structured context encoding.
template <typename S>
LossStats fine_tune_example(const ModelT<S>& model, const std::vector<int>& context_ids,
                            const std::vector<int>& response_ids,
                            typename ModelT<S>::Params* grads, Rng* dropout_rng = nullptr) {
  std::vector<int> prefix;
  prefix.reserve(response_ids.size() + 1);
  prefix.push_back(Vocab::kBos);
  prefix.insert(prefix.end(), response_ids.begin(), response_ids.end());
  std::vector<std::pair<long, int>> targets;
  targets.reserve(prefix.size());
  for (size_t i = 0; i < response_ids.size(); ++i) targets.emplace_back(i, response_ids[i]);
  targets.emplace_back(static_cast<long>(response_ids.size()), Vocab::kEos);

  auto enc = model.encoder_forward(context_ids, /*want_logits=*/false, dropout_rng);
  auto dec = model.decoder_forward(prefix, enc.h, /*want_logits=*/true, dropout_rng);
  if (grads == nullptr) return cross_entropy_rows<S>(dec.logits, targets, nullptr);

  typename ModelT<S>::Mat dlogits =
      ModelT<S>::Mat::Zero(dec.logits.rows(), dec.logits.cols());
  const LossStats stats = cross_entropy_rows<S>(dec.logits, targets, &dlogits);
  const auto d_enc_h = model.decoder_backward(dec, dlogits, *grads);
  model.encoder_backward(enc, typename ModelT<S>::Mat(), d_enc_h, *grads);
  return stats;
}

}  // namespace ssmpc
