// Acceptance suite: ten behavioral criteria for the whole pipeline, each
// printed as one PASS/FAIL line. Exits nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "gradcheck.hpp"
#include "helpers.hpp"
#include "ssmpc/corpus.hpp"
#include "ssmpc/inference.hpp"
#include "ssmpc/io.hpp"
#include "ssmpc/losses.hpp"
#include "ssmpc/metrics.hpp"
#include "ssmpc/model.hpp"
#include "ssmpc/structuralizer.hpp"
#include "ssmpc/training.hpp"
#include "ssmpc/vocab.hpp"

namespace fs = std::filesystem;
using namespace ssmpc;

namespace {

struct Failure : std::runtime_error {
  explicit Failure(const std::string& what) : std::runtime_error(what) {}
};

template <typename... Args>
std::string fmt(const char* f, Args... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return std::string(buf);
}

void require(bool ok, const std::string& detail) {
  if (!ok) throw Failure(detail);
}

std::vector<Dialogue> cued(int count, uint64_t seed, int n_min, int n_max, int m_min, int m_max,
                           int words, int t_min = 3, int t_max = 6) {
  SynthSpec spec;
  spec.dialogue_count = count;
  spec.n_min = n_min;
  spec.n_max = n_max;
  spec.m_min = m_min;
  spec.m_max = m_max;
  spec.vocab_size = words;
  spec.rule = StructureRule::kCued;
  spec.seed = seed;
  spec.text_len_min = t_min;
  spec.text_len_max = t_max;
  return synth_corpus(spec);
}

// State shared between the structure-prediction criterion and the loop
// criterion, which reuses its corpora and post-trained model.
struct Shared {
  std::optional<Vocab> vocab;
  std::vector<Dialogue> train, held;
  std::optional<ModelT<float>> post_model;
  double target_p1 = 0.0;
  double addressee_p1 = 0.0;
};
Shared g;

// --- criterion 1: golden structuralization ----------------------------------

std::string c1_golden_structuralization() {
  const Dialogue d = test_helpers::golden_dialogue();
  const Vocab vocab = build_vocab({d}, /*min_freq=*/1, /*nmax=*/4, /*mmax=*/2);
  const SequenceInput seq = structuralize_dialogue(d, response_structure_of(d), vocab);

  const std::string got = render_debug(seq, vocab);
  const std::string want = read_file(std::string(SSMPC_TEST_DATA_DIR) + "/golden_structuralization.txt");
  require(got == want, "rendered token sequence differs from the committed golden file");

  // The same template, spelled out in raw ids.
  const std::vector<int> ids = {13, 17, 18, 20, 7, 11, 14, 13, 19, 18, 8,  4,
                                15, 14, 18, 19, 9, 5,  12, 16, 15, 19, 18};
  require(seq.ids == ids, "token ids differ from the hand-computed sequence");
  return "dialogue renders to the committed template, ids exact";
}

// --- criterion 2: masking statistics -----------------------------------------

std::string c2_masking_statistics() {
  const auto corpus = cued(1500, 7, 4, 8, 2, 4, 60);
  const Vocab vocab = build_vocab(corpus, 1, 9, 4);

  long in_scope = 0, masked = 0;
  for (size_t i = 0; i < corpus.size(); ++i) {
    const SequenceInput seq =
        structuralize_dialogue(corpus[i], response_structure_of(corpus[i]), vocab);
    long scope_here = 0;
    for (const Role r : seq.roles)
      if (role_in(kDefaultMaskScope, r)) ++scope_here;
    in_scope += scope_here;

    MaskSpec spec;
    spec.p = 0.25;
    spec.seed = derive_seed(99, {i});
    const SequenceInput out = apply_masking(seq, spec, vocab);
    masked += static_cast<long>(out.mask_targets.size());

    // Rate zero: bit-identical input.
    MaskSpec zero;
    zero.p = 0.0;
    const SequenceInput same = apply_masking(seq, zero, vocab);
    require(same.ids == seq.ids && same.mask_targets.size() == seq.mask_targets.size(),
            "zero-rate masking altered the sequence");

    // Rate one: every in-scope position masked.
    MaskSpec all;
    all.p = 1.0;
    all.seed = 1;
    const SequenceInput everything = apply_masking(seq, all, vocab);
    require(static_cast<long>(everything.mask_targets.size()) == scope_here,
            "full-rate masking missed an in-scope position");
  }
  require(in_scope >= 10000, fmt("only %ld in-scope positions generated", in_scope));
  const double rate = static_cast<double>(masked) / static_cast<double>(in_scope);
  require(rate >= 0.23 && rate <= 0.27,
          fmt("empirical mask rate %.4f outside [0.23, 0.27]", rate));
  return fmt("rate %.4f over %ld in-scope positions; p=0 identity, p=1 total", rate, in_scope);
}

// --- criterion 3: gradient correctness ----------------------------------------

std::string c3_gradient_check() {
  const Vocab vocab = test_helpers::tiny_vocab();  // 20 ids
  ModelConfig cfg;
  cfg.d_model = 8;
  cfg.n_heads = 2;
  cfg.n_enc_layers = 1;
  cfg.n_dec_layers = 1;
  cfg.ffn_dim = 16;
  cfg.max_positions = 64;
  cfg.vocab_size = vocab.size();
  cfg.init_seed = 3;
  ModelT<double> model(cfg);

  const Dialogue d = test_helpers::four_word_dialogue();
  const SequenceInput full = structuralize_dialogue(d, response_structure_of(d), vocab);
  MaskSpec spec;
  spec.p = 1.0;
  spec.seed = 9;
  const SequenceInput masked = apply_masking(full, spec, vocab);
  const std::vector<int> response_ids = vocab.encode_tokens(d.response->tokens);

  const auto recovery = [&](ModelT<double>& m, ModelT<double>::Params* grads) {
    return post_train_example<double>(m, masked, false, grads).loss_sum;
  };
  const auto generation = [&](ModelT<double>& m, ModelT<double>::Params* grads) {
    return fine_tune_example<double>(m, full.ids, response_ids, grads).loss_sum;
  };

  const auto r1 = test_helpers::finite_difference_check(model, recovery, 150, 101);
  const auto r2 = test_helpers::finite_difference_check(model, generation, 150, 202);
  require(r1.failed == 0, fmt("recovery loss: %ld/%ld samples off (worst rel %.2e at %s)",
                              r1.failed, r1.checked, r1.worst_rel, r1.worst_tensor.c_str()));
  require(r2.failed == 0, fmt("generation loss: %ld/%ld samples off (worst rel %.2e at %s)",
                              r2.failed, r2.checked, r2.worst_rel, r2.worst_tensor.c_str()));
  return fmt("%ld sampled parameters within 1e-4 of central differences",
             r1.checked + r2.checked);
}

// --- criterion 4: tying witness ------------------------------------------------

void tying_witness(ModelT<float>& model, int vocab_size) {
  const std::vector<int> ids = {4, 5, 6, 7};
  const std::vector<int> prefix = {Vocab::kBos, 4, 5};
  const auto enc0 = model.encoder_forward(ids, true);
  const auto dec0 = model.decoder_forward(prefix, enc0.h);

  const int probe = Vocab::kEos;  // never appears in either input
  model.params.embedding(probe, 3) += 0.25f;
  const auto enc1 = model.encoder_forward(ids, true);
  const auto dec1 = model.decoder_forward(prefix, enc1.h);
  model.params.embedding(probe, 3) -= 0.25f;

  require((enc0.logits.col(probe) - enc1.logits.col(probe)).array().abs().maxCoeff() > 1e-6f,
          "embedding perturbation invisible to the encoder head");
  require((dec0.logits.col(probe) - dec1.logits.col(probe)).array().abs().maxCoeff() > 1e-6f,
          "embedding perturbation invisible to the decoder head");
  for (int j = 0; j < vocab_size; ++j) {
    if (j == probe) continue;
    require((enc0.logits.col(j) - enc1.logits.col(j)).array().abs().maxCoeff() == 0.0f,
            "perturbation leaked into an unrelated logit column");
  }
}

std::string c4_tying_witness() {
  const Vocab vocab = test_helpers::tiny_vocab();
  ModelT<float> model(test_helpers::tiny_config(vocab.size(), 11));
  tying_witness(model, vocab.size());

  const std::string path = (fs::temp_directory_path() / "ssmpc_accept_tying.ckpt").string();
  CheckpointMeta meta;
  meta.vocab_hash = vocab.hash();
  save_checkpoint(path, model, meta);
  auto loaded = load_checkpoint<float>(path, vocab.hash());
  fs::remove(path);
  require(test_helpers::param_distance(model, loaded) == 0.0, "round trip changed parameters");
  tying_witness(loaded, vocab.size());  // single storage survives the round trip
  return "one matrix drives both heads, before and after a checkpoint round trip";
}

// --- criterion 5: overfit oracle -----------------------------------------------

std::string c5_overfit() {
  const auto corpus = cued(32, 11, 4, 6, 2, 3, 40, 3, 5);
  const Vocab vocab = build_vocab(corpus, 1, 7, 3);

  ModelConfig cfg;  // full-size defaults
  cfg.vocab_size = vocab.size();
  cfg.init_seed = 1;
  ModelT<float> model(cfg);

  TrainConfig tc;
  tc.phase = TrainPhase::kFine;
  tc.lr = 1e-3;
  tc.epochs = 200;
  tc.batch_size = 8;
  tc.seed = 1;
  tc.stop_at_train_accuracy = 0.999;
  const TrainResult r = train(model, corpus, nullptr, vocab, tc);

  require(!r.curve.empty() && r.curve.size() <= 200, "epoch budget exceeded");
  const double acc = r.curve.back().token_accuracy;
  require(acc >= 0.95, fmt("token accuracy %.4f below 0.95 after %zu epochs", acc, r.curve.size()));

  DecodeOptions opts;
  opts.max_len = 20;
  int exact = 0;
  for (const auto& d : corpus) {
    const GenerationResult out = generate_response(model, vocab, d, response_structure_of(d), opts);
    if (out.response_ids == vocab.encode_tokens(d.response->tokens)) ++exact;
  }
  require(exact >= 30, fmt("only %d/32 responses reproduced exactly", exact));
  return fmt("accuracy %.4f in %zu epochs; %d/32 exact greedy reproductions", acc,
             r.curve.size(), exact);
}

// --- criterion 6: structure prediction on held-out data -------------------------

std::string c6_structure_prediction() {
  g.train = cued(2000, 21, 4, 8, 2, 4, 60);
  g.held = cued(200, 22, 4, 8, 2, 4, 60);
  // Index capacity covers the longest dialogue plus the loop criterion's growth.
  g.vocab = build_vocab(g.train, 1, 14, 4);

  ModelConfig cfg;  // full-size defaults
  cfg.vocab_size = g.vocab->size();
  cfg.init_seed = 2;
  g.post_model.emplace(cfg);

  TrainConfig tc;
  tc.phase = TrainPhase::kPost;
  tc.lr = 5e-4;
  tc.epochs = 16;
  tc.batch_size = 8;
  tc.mask_p = 0.25;
  tc.seed = 2;
  train(*g.post_model, g.train, nullptr, *g.vocab, tc);

  const StructureEval ev = evaluate_structure(*g.post_model, *g.vocab, g.held);
  g.target_p1 = ev.target_p1;
  g.addressee_p1 = ev.addressee_p1;
  require(ev.addressee_p1 >= 0.90,
          fmt("masked-addressee precision %.4f below 0.90", ev.addressee_p1));
  require(ev.target_p1 >= 0.75, fmt("masked-target precision %.4f below 0.75", ev.target_p1));
  return fmt("held-out precision: addressee %.4f (>= 0.90), target %.4f (>= 0.75)",
             ev.addressee_p1, ev.target_p1);
}

// --- criterion 7: masking-rate ordering ------------------------------------------

std::string c7_masking_rate_ordering() {
  const auto train_set = cued(600, 31, 4, 7, 2, 3, 40);
  const auto held_out = cued(100, 32, 4, 7, 2, 3, 40);
  const Vocab vocab = build_vocab(train_set, 1, 8, 3);

  SweepConfig sc;
  sc.p_values = {0.25, 1.0};
  sc.model.d_model = 64;
  sc.model.n_heads = 4;
  sc.model.n_enc_layers = 1;
  sc.model.n_dec_layers = 1;
  sc.model.ffn_dim = 256;
  sc.model.max_positions = 256;
  sc.model.vocab_size = vocab.size();
  sc.model.init_seed = 4;
  sc.post.lr = 5e-4;
  sc.post.epochs = 6;
  sc.post.batch_size = 8;
  sc.post.seed = 4;
  sc.fine = sc.post;
  sc.fine.epochs = 2;
  sc.max_len = 10;

  const auto arms = masking_sweep(train_set, held_out, vocab, sc);
  require(arms.size() == 3, "expected a baseline arm plus two rates");
  const auto& none = arms[0];
  const auto& quarter = arms[1];
  require(!none.post_trained && quarter.p == 0.25, "unexpected arm layout");
  require(quarter.target_p1 > none.target_p1,
          fmt("target precision %.4f does not exceed the baseline %.4f", quarter.target_p1,
              none.target_p1));
  require(quarter.addressee_p1 > none.addressee_p1,
          fmt("addressee precision %.4f does not exceed the baseline %.4f",
              quarter.addressee_p1, none.addressee_p1));
  return fmt("p=0.25 beats no-post-training: target %.4f > %.4f, addressee %.4f > %.4f",
             quarter.target_p1, none.target_p1, quarter.addressee_p1, none.addressee_p1);
}

// --- criterion 8: real-world accumulation loop ------------------------------------

std::string c8_real_world_loop() {
  require(g.post_model.has_value(), "depends on the structure-prediction criterion's model");

  // Brief generation fine-tuning on top of the recovery-trained model.
  ModelT<float> model = *g.post_model;
  TrainConfig tc;
  tc.phase = TrainPhase::kFine;
  tc.lr = 1e-4;
  tc.epochs = 1;
  tc.batch_size = 8;
  tc.seed = 3;
  train(model, g.train, nullptr, *g.vocab, tc);

  DecodeOptions opts;
  opts.max_len = 12;
  int tgt_hits = 0, adr_hits = 0, loops = 0;
  std::map<int, int> tgt_freq, adr_freq;
  for (int i = 0; i < 100; ++i) {
    const Dialogue& gold = g.held[static_cast<size_t>(i)];
    Dialogue history = gold;
    history.response.reset();
    const int m0 = static_cast<int>(history.speaker_labels.size());
    const size_t n0 = history.utterances.size();
    const int gold_tgt = gold.response->target_index.value_or(0);
    const int gold_adr = gold.response->addressee.value_or(0);
    ++tgt_freq[gold_tgt];
    ++adr_freq[gold_adr];
    ++loops;

    // First step: the gold response's speaker wants to reply; target and
    // addressee are both hidden and must be predicted jointly.
    const RealWorldStep step = real_world_step(model, *g.vocab, history, gold.response->speaker, opts);
    if (step.predicted_target == gold_tgt) ++tgt_hits;
    if (step.predicted_addressee == gold_adr) ++adr_hits;
    require(validate_dialogue(history).ok(), fmt("loop %d: history invalid after step 1", i));

    int next = gold.response->speaker;
    for (int s = 2; s <= 5; ++s) {
      next = (next % m0) + 1;
      real_world_step(model, *g.vocab, history, next, opts);
      require(validate_dialogue(history).ok(), fmt("loop %d: history invalid after step %d", i, s));
    }
    require(history.utterances.size() == n0 + 5, fmt("loop %d: history did not grow by 5", i));
    for (size_t u = n0; u < history.utterances.size(); ++u)
      require(history.utterances[u].index == static_cast<int>(u) + 1,
              fmt("loop %d: bad appended index", i));
  }

  int tgt_major = 0, adr_major = 0;
  for (const auto& [k, v] : tgt_freq) tgt_major = std::max(tgt_major, v);
  for (const auto& [k, v] : adr_freq) adr_major = std::max(adr_major, v);
  const double tp = tgt_hits / 100.0, ap = adr_hits / 100.0;
  const double tb = tgt_major / 100.0, ab = adr_major / 100.0;

  require(tp < g.target_p1, fmt("joint-masked target %.4f did not degrade from %.4f", tp, g.target_p1));
  require(ap < g.addressee_p1,
          fmt("joint-masked addressee %.4f did not degrade from %.4f", ap, g.addressee_p1));
  require(tp > tb, fmt("target %.4f not above the majority baseline %.4f", tp, tb));
  require(ap > ab, fmt("addressee %.4f not above the majority baseline %.4f", ap, ab));
  return fmt("100 loops well-formed; target %.4f (majority %.4f, single-mask %.4f), "
             "addressee %.4f (majority %.4f, single-mask %.4f)",
             tp, tb, g.target_p1, ap, ab, g.addressee_p1);
}

// --- criterion 9: metric oracles ----------------------------------------------------

std::string c9_metric_oracles() {
  require(std::abs(bleu_n({"the cat"}, {"the cat sat"}, 1) - std::exp(-0.5)) <= 1e-4,
          "unigram overlap with brevity penalty is off");
  require(bleu_n({"a b c d"}, {"a b c d"}, 4) == 1.0, "identity must score exactly 1");
  require(bleu_n({"a b"}, {"x y"}, 1) == 0.0, "disjoint must score exactly 0");
  require(std::abs(rouge_l({"a b c"}, {"a c d"}) - 2.0 / 3.0) <= 1e-4,
          "subsequence F1 is off");
  require(rouge_l({"a b c"}, {"a b c"}) == 1.0, "identity must score exactly 1");
  require(rouge_l({"a b"}, {"x y"}) == 0.0, "disjoint must score exactly 0");
  require(std::abs(meteor_lite({"the cat sat"}, {"the sat cat"}) - 0.5) <= 1e-4,
          "fragmentation penalty is off");
  require(std::abs(meteor_lite({"x y z"}, {"x y z"}) - (1.0 - 0.5 / 27.0)) <= 1e-4,
          "identity chunk penalty is off");
  require(meteor_lite({"a b"}, {"x y"}) == 0.0, "disjoint must score exactly 0");
  require(std::abs(precision_at_1({1, 2, 3}, {1, 2, 4}) - 2.0 / 3.0) <= 1e-12,
          "slot precision is off");
  return "all hand-computed scores reproduced; identity and disjoint cases exact";
}

// --- criterion 10: pipeline determinism -----------------------------------------------

int run_cli(const std::string& args) {
  const std::string cmd = std::string(SSMPC_CLI_BIN) + " " + args + " >/dev/null 2>&1";
  return std::system(cmd.c_str());
}

std::string c10_pipeline_determinism() {
  const fs::path root = fs::temp_directory_path() / "ssmpc_accept_pipeline";
  fs::remove_all(root);
  std::vector<fs::path> dirs = {root / "r1", root / "r2"};
  const std::string model_flags =
      " --d-model 64 --heads 4 --enc-layers 1 --dec-layers 1 --ffn 256 --max-pos 256 --quiet";

  for (const auto& dir : dirs) {
    fs::create_directories(dir);
    const auto f = [&](const std::string& name) { return (dir / name).string(); };
    require(run_cli("synth --out " + f("corpus.jsonl") +
                    " --count 300 --seed 41 --rule cued --n-min 4 --n-max 7"
                    " --m-min 2 --m-max 3 --vocab-size 40") == 0,
            "corpus synthesis failed");
    require(run_cli("build-vocab --corpus " + f("corpus.jsonl") + " --out " + f("v.vocab") +
                    " --min-freq 1") == 0,
            "vocabulary build failed");
    require(run_cli("post-train --corpus " + f("corpus.jsonl") + " --vocab " + f("v.vocab") +
                    " --out " + f("post.ckpt") + model_flags +
                    " --epochs 2 --lr 5e-4 --p 0.25 --seed 2") == 0,
            "post-training failed");
    require(run_cli("fine-tune --corpus " + f("corpus.jsonl") + " --vocab " + f("v.vocab") +
                    " --init " + f("post.ckpt") + " --out " + f("fine.ckpt") + model_flags +
                    " --epochs 1 --lr 3e-4 --seed 3") == 0,
            "fine-tuning failed");
    require(run_cli("generate --corpus " + f("corpus.jsonl") + " --vocab " + f("v.vocab") +
                    " --ckpt " + f("fine.ckpt") + " --out " + f("pred.jsonl") +
                    " --max-len 10") == 0,
            "generation failed");
    require(run_cli("evaluate --pred " + f("pred.jsonl") + " --gold " + f("corpus.jsonl") +
                    " --out " + f("report.json")) == 0,
            "evaluation failed");
  }

  const std::vector<std::string> artifacts = {"corpus.jsonl", "v.vocab",    "post.ckpt",
                                              "fine.ckpt",    "pred.jsonl", "report.json"};
  for (const auto& name : artifacts) {
    const std::string a = read_file((dirs[0] / name).string());
    const std::string b = read_file((dirs[1] / name).string());
    require(a == b, "artifact " + name + " differs between identical reruns");
    require(!a.empty(), "artifact " + name + " is empty");
  }
  fs::remove_all(root);
  return fmt("%zu artifacts byte-identical across independent reruns", artifacts.size());
}

}  // namespace

int main() {
  struct Entry {
    const char* name;
    std::string (*fn)();
  };
  const std::vector<Entry> criteria = {
      {"golden structuralization", c1_golden_structuralization},
      {"masking statistics", c2_masking_statistics},
      {"gradient correctness", c3_gradient_check},
      {"weight-tying witness", c4_tying_witness},
      {"overfit oracle", c5_overfit},
      {"structure prediction", c6_structure_prediction},
      {"masking-rate ordering", c7_masking_rate_ordering},
      {"real-world loop", c8_real_world_loop},
      {"metric oracles", c9_metric_oracles},
      {"pipeline determinism", c10_pipeline_determinism},
  };

  int failed = 0;
  for (size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    std::string verdict, detail;
    try {
      detail = criteria[i].fn();
      verdict = "PASS";
    } catch (const std::exception& e) {
      detail = e.what();
      verdict = "FAIL";
      ++failed;
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("criterion %2zu: %s  %-24s  %s (%.1f s)\n", i + 1, verdict.c_str(),
                criteria[i].name, detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("acceptance: %zu/%zu criteria passed\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
