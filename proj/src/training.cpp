#include "ssmpc/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "ssmpc/inference.hpp"
#include "ssmpc/io.hpp"

namespace ssmpc {

namespace {
// Stream tags for deriving independent RNG streams from one run seed.
constexpr uint64_t kShuffleTag = 0x73687566;  // per-epoch example order
constexpr uint64_t kMaskTag = 0x6d61736b;     // per-(epoch, example) masking
constexpr uint64_t kValidTag = 0x76616c64;    // fixed validation masking
}  // namespace

void TrainConfig::validate() const {
  if (lr < 0.0 || !std::isfinite(lr)) throw std::invalid_argument("train: bad learning rate");
  if (epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
  if (batch_size < 1 || accum_steps < 1)
    throw std::invalid_argument("train: batch size and accumulation steps must be >= 1");
  if (mask_p < 0.0 || mask_p > 1.0) throw std::invalid_argument("train: mask_p outside [0,1]");
  if (weight_decay < 0.0) throw std::invalid_argument("train: negative weight decay");
  if (checkpoint_every < 0) throw std::invalid_argument("train: negative checkpoint cadence");
}

std::vector<PreparedExample> prepare_examples(const std::vector<Dialogue>& corpus,
                                              const Vocab& vocab) {
  std::vector<PreparedExample> out;
  out.reserve(corpus.size());
  for (size_t i = 0; i < corpus.size(); ++i) {
    const Dialogue& d = corpus[i];
    PreparedExample ex;
    const ResponseStructure rs = d.response ? response_structure_of(d) : ResponseStructure{};
    ex.seq = structuralize_dialogue(d, rs, vocab);
    if (d.response) {
      ex.has_response = true;
      ex.response_ids = vocab.encode_tokens(d.response->tokens);
    }
    std::string key;
    key.reserve(ex.seq.ids.size() * 3);
    for (int id : ex.seq.ids) {
      key += std::to_string(id);
      key += ',';
    }
    ex.content_hash = fnv1a64(key);
    out.push_back(std::move(ex));
  }
  return out;
}

// --- optimizer -------------------------------------------------------------

AdamW::AdamW(const ModelT<float>& model, double beta1, double beta2, double eps)
    : m_(model.zero_grads()), v_(model.zero_grads()), beta1_(beta1), beta2_(beta2), eps_(eps) {}

void AdamW::step(typename ModelT<float>::Params& params, typename ModelT<float>::Params& grads,
                 double lr, double weight_decay) {
  t_ += 1;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  auto prefs = params.tensors();
  auto grefs = grads.tensors();
  auto mrefs = m_.tensors();
  auto vrefs = v_.tensors();
  for (size_t i = 0; i < prefs.size(); ++i) {
    auto& p = *prefs[i].mat;
    auto& g = *grefs[i].mat;
    auto& m = *mrefs[i].mat;
    auto& v = *vrefs[i].mat;
    m = static_cast<float>(beta1_) * m + static_cast<float>(1.0 - beta1_) * g;
    v = (static_cast<float>(beta2_) * v.array() +
         static_cast<float>(1.0 - beta2_) * g.array().square())
            .matrix();
    // Decoupled weight decay (weight matrices only; biases and layer norms
    // are 1-row tensors), then the Adam step with bias correction.
    if (p.rows() > 1) p *= static_cast<float>(1.0 - lr * weight_decay);
    p.array() -= static_cast<float>(lr) * (m.array() / static_cast<float>(bc1)) /
                 ((v.array() / static_cast<float>(bc2)).sqrt() + static_cast<float>(eps_));
  }
}

// --- training loop --------------------------------------------------------

namespace {

LossStats run_example(const ModelT<float>& model, const PreparedExample& ex,
                      const TrainConfig& cfg, const Vocab& vocab, uint64_t mask_seed,
                      typename ModelT<float>::Params* grads) {
  if (cfg.phase == TrainPhase::kPost) {
    MaskSpec spec;
    spec.p = cfg.mask_p;
    spec.scope = cfg.mask_scope;
    spec.seed = mask_seed;
    const SequenceInput masked = apply_masking(ex.seq, spec, vocab);
    return post_train_example(model, masked, cfg.loss_all_positions, grads);
  }
  if (!ex.has_response) throw std::invalid_argument("fine-tuning example lacks a response");
  return fine_tune_example(model, ex.seq.ids, ex.response_ids, grads);
}

}  // namespace

std::string render_curve(const std::vector<EpochLog>& curve) {
  std::ostringstream out;
  out << "epoch  train_loss  valid_loss  token_acc        lr\n";
  char buf[128];
  for (const auto& e : curve) {
    if (std::isnan(e.valid_loss))
      std::snprintf(buf, sizeof(buf), "%5d  %10.4f  %10s  %9.4f  %.2e\n", e.epoch, e.train_loss,
                    "-", e.token_accuracy, e.lr);
    else
      std::snprintf(buf, sizeof(buf), "%5d  %10.4f  %10.4f  %9.4f  %.2e\n", e.epoch, e.train_loss,
                    e.valid_loss, e.token_accuracy, e.lr);
    out << buf;
  }
  return out.str();
}

TrainResult train(ModelT<float>& model, const std::vector<Dialogue>& train_set,
                  const std::vector<Dialogue>* valid_set, const Vocab& vocab,
                  const TrainConfig& cfg, std::ostream* log) {
  cfg.validate();
  if (train_set.empty()) throw std::invalid_argument("train: empty training set");
  if (model.cfg.vocab_size != vocab.size())
    throw std::invalid_argument("train: model vocabulary size does not match the vocabulary");

  const auto examples = prepare_examples(train_set, vocab);
  std::vector<PreparedExample> valid_examples;
  if (valid_set != nullptr) valid_examples = prepare_examples(*valid_set, vocab);

  const long n = static_cast<long>(examples.size());
  const long window = static_cast<long>(cfg.batch_size) * cfg.accum_steps;
  const long updates_per_epoch = (n + window - 1) / window;
  const long total_updates = updates_per_epoch * cfg.epochs;

  AdamW opt(model);
  auto grads = model.zero_grads();
  TrainResult result;
  typename ModelT<float>::Params best_params = model.params;
  double best_loss = std::numeric_limits<double>::infinity();

  std::vector<size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Rng shuffle_rng(derive_seed(cfg.seed, {kShuffleTag, static_cast<uint64_t>(epoch)}));
    shuffle_rng.shuffle(order);

    LossStats epoch_stats;
    double epoch_lr = 0.0;
    long done = 0;
    while (done < n) {
      const long take = std::min(window, n - done);
      grads.set_zero();
      LossStats window_stats;
      for (long k = 0; k < take; ++k) {
        const auto& ex = examples[order[static_cast<size_t>(done + k)]];
        const uint64_t mask_seed =
            derive_seed(cfg.seed, {kMaskTag, static_cast<uint64_t>(epoch), ex.content_hash});
        window_stats += run_example(model, ex, cfg, vocab, mask_seed, &grads);
      }
      if (window_stats.count == 0)
        throw std::invalid_argument("train: update window with zero supervised positions");
      if (!std::isfinite(window_stats.loss_sum))
        throw std::runtime_error("training diverged: non-finite loss at update " +
                                 std::to_string(result.updates));

      // Sum-reduced gradients scaled once per window: splitting a window into
      // micro-batches cannot change the update.
      const float inv = 1.0f / static_cast<float>(window_stats.count);
      for (auto& t : grads.tensors()) (*t.mat) *= inv;

      const double frac =
          1.0 - static_cast<double>(result.updates) / static_cast<double>(total_updates);
      epoch_lr = cfg.lr * frac;
      opt.step(model.params, grads, epoch_lr, cfg.weight_decay);
      result.updates += 1;
      if (!model.params.all_finite())
        throw std::runtime_error("training diverged: non-finite parameter after update " +
                                 std::to_string(result.updates));
      epoch_stats += window_stats;
      done += take;
    }

    EpochLog el;
    el.epoch = epoch;
    el.train_loss = epoch_stats.mean();
    el.token_accuracy = epoch_stats.count > 0 ? static_cast<double>(epoch_stats.correct) /
                                                    static_cast<double>(epoch_stats.count)
                                              : 0.0;
    el.lr = epoch_lr;
    el.valid_loss = std::numeric_limits<double>::quiet_NaN();

    if (!valid_examples.empty()) {
      LossStats vs;
      for (const auto& ex : valid_examples) {
        const uint64_t mask_seed = derive_seed(cfg.seed, {kValidTag, ex.content_hash});
        vs += run_example(model, ex, cfg, vocab, mask_seed, nullptr);
      }
      el.valid_loss = vs.mean();
    }

    const double select_loss = !valid_examples.empty() ? el.valid_loss : el.train_loss;
    if (select_loss < best_loss) {
      best_loss = select_loss;
      best_params = model.params;
      result.best_epoch = epoch;
      result.best_loss = best_loss;
    }

    result.curve.push_back(el);
    if (log != nullptr) {
      char buf[160];
      if (std::isnan(el.valid_loss))
        std::snprintf(buf, sizeof(buf), "epoch %3d  train %.4f  valid -       acc %.4f  lr %.2e\n",
                      epoch, el.train_loss, el.token_accuracy, el.lr);
      else
        std::snprintf(buf, sizeof(buf), "epoch %3d  train %.4f  valid %.4f  acc %.4f  lr %.2e\n",
                      epoch, el.train_loss, el.valid_loss, el.token_accuracy, el.lr);
      (*log) << buf << std::flush;
    }

    if (!cfg.checkpoint_dir.empty() && cfg.checkpoint_every > 0 &&
        epoch % cfg.checkpoint_every == 0) {
      CheckpointMeta meta;
      meta.vocab_hash = vocab.hash();
      meta.seed = cfg.seed;
      char name[64];
      std::snprintf(name, sizeof(name), "/epoch_%04d.ckpt", epoch);
      save_checkpoint(cfg.checkpoint_dir + name, model, meta);
    }

    if (cfg.stop_at_train_accuracy > 0.0 && el.token_accuracy >= cfg.stop_at_train_accuracy)
      break;
  }

  model.params = std::move(best_params);
  if (!cfg.checkpoint_dir.empty()) {
    CheckpointMeta meta;
    meta.vocab_hash = vocab.hash();
    meta.seed = cfg.seed;
    save_checkpoint(cfg.checkpoint_dir + "/best.ckpt", model, meta);
  }
  return result;
}

// --- masking sweep ------------------------------------------------------------

std::vector<SweepArmResult> masking_sweep(const std::vector<Dialogue>& train_set,
                                          const std::vector<Dialogue>& held_out,
                                          const Vocab& vocab, const SweepConfig& cfg,
                                          std::ostream* log) {
  for (double p : cfg.p_values)
    if (p < 0.0 || p > 1.0) throw std::invalid_argument("sweep: p outside [0,1]");

  std::vector<SweepArmResult> arms;
  const int total_arms = static_cast<int>(cfg.p_values.size()) + 1;
  for (int arm = 0; arm < total_arms; ++arm) {
    SweepArmResult res;
    res.post_trained = arm > 0;
    res.p = arm > 0 ? cfg.p_values[static_cast<size_t>(arm) - 1] : 0.0;
    if (arm == 0) {
      res.label = "none";
    } else {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "p=%.2f", res.p);
      res.label = buf;
    }
    if (log != nullptr) (*log) << "[sweep] arm " << res.label << "\n";

    ModelT<float> model(cfg.model);  // identical initialization across arms
    if (res.post_trained) {
      TrainConfig post = cfg.post;
      post.phase = TrainPhase::kPost;
      post.mask_p = res.p;
      train(model, train_set, nullptr, vocab, post, log);
    }
    TrainConfig fine = cfg.fine;
    fine.phase = TrainPhase::kFine;
    train(model, train_set, nullptr, vocab, fine, log);

    const StructureEval sev = evaluate_structure(model, vocab, held_out);
    res.target_p1 = sev.target_p1;
    res.addressee_p1 = sev.addressee_p1;
    DecodeOptions opts;
    opts.max_len = cfg.max_len;
    res.generation = evaluate_generation_corpus(model, vocab, held_out, opts);
    arms.push_back(std::move(res));
  }
  return arms;
}

std::string render_sweep_table(const std::vector<SweepArmResult>& arms) {
  std::ostringstream out;
  out << "arm       tgt_p@1   adr_p@1";
  if (!arms.empty())
    for (const auto& [name, score] : arms.front().generation.scores) out << "  " << name;
  out << "\n";
  char buf[64];
  for (const auto& a : arms) {
    std::snprintf(buf, sizeof(buf), "%-8s  %7.4f   %7.4f", a.label.c_str(), a.target_p1,
                  a.addressee_p1);
    out << buf;
    for (const auto& [name, score] : a.generation.scores) {
      std::snprintf(buf, sizeof(buf), "  %*.2f", static_cast<int>(name.size()), score * 100.0);
      out << buf;
    }
    out << "\n";
  }
  return out.str();
}

}  // namespace ssmpc
