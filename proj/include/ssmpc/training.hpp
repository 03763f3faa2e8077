#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ssmpc/corpus.hpp"
#include "ssmpc/losses.hpp"
#include "ssmpc/metrics.hpp"
#include "ssmpc/model.hpp"
#include "ssmpc/structuralizer.hpp"
#include "ssmpc/vocab.hpp"

namespace ssmpc {

enum class TrainPhase { kPost, kFine };

struct TrainConfig {
  TrainPhase phase = TrainPhase::kFine;
  double lr = 3e-4;
  int epochs = 10;
  int batch_size = 8;
  int accum_steps = 1;  // examples per optimizer update = batch_size * accum_steps
  double weight_decay = 0.01;
  double mask_p = 0.25;                  // post phase only
  RoleSet mask_scope = kDefaultMaskScope;  // post phase only
  bool loss_all_positions = false;
  uint64_t seed = 1;
  int checkpoint_every = 0;     // epochs between checkpoint files; 0 = none
  std::string checkpoint_dir;  // empty = never write checkpoints
  double stop_at_train_accuracy = 0.0;  // early exit once reached; 0 = off

  void validate() const;
};

// A dialogue pre-encoded once: the full-structure input sequence plus the
// encoded response tokens. content_hash keys per-example masking streams so
// that masking follows the example, not its position in the corpus.
struct PreparedExample {
  SequenceInput seq;
  std::vector<int> response_ids;
  bool has_response = false;
  uint64_t content_hash = 0;
};

std::vector<PreparedExample> prepare_examples(const std::vector<Dialogue>& corpus,
                                              const Vocab& vocab);

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double valid_loss = 0.0;  // NaN when no validation set
  double token_accuracy = 0.0;
  double lr = 0.0;
};

struct TrainResult {
  std::vector<EpochLog> curve;
  int best_epoch = -1;
  double best_loss = 0.0;  // validation loss when available, else train loss
  long updates = 0;
};

std::string render_curve(const std::vector<EpochLog>& curve);

// Adam with decoupled weight decay. Holds first/second moment state shaped
// like the model parameters.
class AdamW {
 public:
  explicit AdamW(const ModelT<float>& model, double beta1 = 0.9, double beta2 = 0.999,
                 double eps = 1e-8);
  void step(typename ModelT<float>::Params& params, typename ModelT<float>::Params& grads,
            double lr, double weight_decay);
  long steps_taken() const { return t_; }

 private:
  typename ModelT<float>::Params m_, v_;
  long t_ = 0;
  double beta1_, beta2_, eps_;
};

// Runs one training phase. Gradients are summed over each accumulation window
// and scaled by the window's supervised-position count at update time, so any
// split of a window into micro-batches produces the same update. Learning rate
// decays linearly to zero over the planned number of updates. The best model
// (by validation loss when valid is given, else training loss) is restored
// into `model` before returning. Throws on NaN/Inf divergence.
TrainResult train(ModelT<float>& model, const std::vector<Dialogue>& train_set,
                  const std::vector<Dialogue>* valid_set, const Vocab& vocab,
                  const TrainConfig& cfg, std::ostream* log = nullptr);

// --- masking-rate sweep -----------------------------------------------------

struct SweepArmResult {
  std::string label;
  bool post_trained = false;
  double p = 0.0;
  double target_p1 = 0.0;     // held-out masked target-slot precision@1
  double addressee_p1 = 0.0;  // held-out masked addressee-slot precision@1
  EvalReport generation;      // held-out generation metrics
};

struct SweepConfig {
  std::vector<double> p_values;  // one post-trained arm per value
  ModelConfig model;
  TrainConfig post;  // phase/mask_p overridden per arm
  TrainConfig fine;
  int max_len = 50;
};

// Baseline arm (no post-training) plus one arm per p value: each arm starts
// from an identically initialized model, post-trains (except the baseline),
// fine-tunes, then evaluates structure recovery and generation on held_out.
std::vector<SweepArmResult> masking_sweep(const std::vector<Dialogue>& train_set,
                                          const std::vector<Dialogue>& held_out,
                                          const Vocab& vocab, const SweepConfig& cfg,
                                          std::ostream* log = nullptr);

std::string render_sweep_table(const std::vector<SweepArmResult>& arms);

}  // namespace ssmpc
