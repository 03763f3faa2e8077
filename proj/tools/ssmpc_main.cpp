// Command-line front end: corpus synthesis, vocabulary building, the two
// training phases, structure prediction, generation, the accumulation loop,
// evaluation, and the masking-rate sweep. Every artifact is written atomically
// and starts with a {"ssmpc": ...} provenance line carrying the effective
// config digest, the seed, and the code version.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ssmpc/config.hpp"
#include "ssmpc/corpus.hpp"
#include "ssmpc/inference.hpp"
#include "ssmpc/io.hpp"
#include "ssmpc/metrics.hpp"
#include "ssmpc/model.hpp"
#include "ssmpc/structuralizer.hpp"
#include "ssmpc/training.hpp"
#include "ssmpc/version.hpp"
#include "ssmpc/vocab.hpp"

namespace {

using json = nlohmann::json;
using namespace ssmpc;

std::string format_double(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Effective settings = built-in defaults < config file < command-line flags.
// The artifact digest is computed over this map, so identical effective runs
// produce identical artifacts.
struct Effective {
  KvConfig kv;

  // The digest captures parameter settings, not file locations: the same run
  // against the same data in a different directory must produce identical
  // bytes. Provenance of the inputs travels in the inputs' own headers.
  uint64_t digest() const {
    static const std::vector<std::string> path_suffixes = {
        ".out",  ".corpus", ".valid", ".vocab", ".ckpt",           ".init",
        ".curve", ".pred",  ".gold",  ".held",  ".checkpoint_dir",
    };
    KvConfig filtered;
    for (const auto& [key, value] : kv.values()) {
      bool is_path = false;
      for (const auto& sfx : path_suffixes)
        if (key.size() > sfx.size() &&
            key.compare(key.size() - sfx.size(), sfx.size(), sfx) == 0)
          is_path = true;
      if (!is_path) filtered.set(key, value);
    }
    return filtered.digest();
  }

  void take(const CLI::Option* opt, const std::string& key, const std::string& v) {
    if (opt != nullptr && opt->count() > 0) kv.set(key, v);
  }
  void take(const CLI::Option* opt, const std::string& key, int v) {
    if (opt != nullptr && opt->count() > 0) kv.set(key, std::to_string(v));
  }
  void take(const CLI::Option* opt, const std::string& key, uint64_t v) {
    if (opt != nullptr && opt->count() > 0) kv.set(key, std::to_string(v));
  }
  void take(const CLI::Option* opt, const std::string& key, double v) {
    if (opt != nullptr && opt->count() > 0) kv.set(key, format_double(v));
  }
  void take(const CLI::Option* opt, const std::string& key, bool v) {
    if (opt != nullptr && opt->count() > 0) kv.set(key, v ? "true" : "false");
  }
};

std::string header_line(const std::string& artifact, uint64_t seed, uint64_t digest) {
  json h;
  h["ssmpc"]["artifact"] = artifact;
  h["ssmpc"]["version"] = kVersion;
  h["ssmpc"]["seed"] = seed;
  h["ssmpc"]["config_digest"] = to_hex(digest);
  return h.dump() + "\n";
}

std::vector<Dialogue> load_corpus_strict(const std::string& path) {
  ParseResult res = parse_corpus(path, /*strict=*/true);
  if (res.dialogues.empty()) throw std::runtime_error("corpus is empty: " + path);
  return std::move(res.dialogues);
}

ModelConfig model_config_from(const KvConfig& kv, int vocab_size, uint64_t seed) {
  ModelConfig mc;
  mc.d_model = kv.get_int("model.d_model", 128);
  mc.n_heads = kv.get_int("model.n_heads", 4);
  mc.n_enc_layers = kv.get_int("model.enc_layers", 2);
  mc.n_dec_layers = kv.get_int("model.dec_layers", 2);
  mc.ffn_dim = kv.get_int("model.ffn_dim", 512);
  mc.max_positions = kv.get_int("model.max_positions", 512);
  mc.dropout = kv.get_double("model.dropout", 0.0);
  mc.init_seed = kv.get_u64("model.init_seed", seed);
  mc.vocab_size = vocab_size;
  return mc;
}

TrainConfig train_config_from(const KvConfig& kv, TrainPhase phase, uint64_t seed) {
  TrainConfig tc;
  tc.phase = phase;
  tc.lr = kv.get_double("train.lr", 3e-4);
  tc.epochs = kv.get_int("train.epochs", 10);
  tc.batch_size = kv.get_int("train.batch_size", 8);
  tc.accum_steps = kv.get_int("train.accum_steps", 1);
  tc.weight_decay = kv.get_double("train.weight_decay", 0.01);
  tc.mask_p = kv.get_double("mask.p", 0.25);
  tc.mask_scope = parse_role_set(kv.get("mask.scope", "tgt_idx,adr,resp_tgt_idx,resp_adr"));
  tc.loss_all_positions = kv.get_bool("train.loss_all_positions", false);
  tc.seed = seed;
  tc.checkpoint_every = kv.get_int("train.checkpoint_every", 0);
  tc.checkpoint_dir = kv.get("train.checkpoint_dir", "");
  tc.stop_at_train_accuracy = kv.get_double("train.stop_at_accuracy", 0.0);
  return tc;
}

DecodeOptions decode_options_from(const KvConfig& kv) {
  DecodeOptions opts;
  opts.max_len = kv.get_int("decode.max_len", 50);
  opts.beam = kv.get_int("decode.beam", 1);
  return opts;
}

json prediction_record(int dialogue_id, const GenerationResult& res) {
  json rec;
  rec["dialogue_id"] = dialogue_id;
  rec["response_text"] = res.text;
  json ps = json::object();
  for (const auto& p : res.predicted_structure) {
    json slot;
    if (p.ordinal > 0)
      slot["ordinal"] = p.ordinal;
    else
      slot["ordinal"] = nullptr;
    slot["confidence"] = p.confidence;
    slot["position"] = p.position;
    ps[role_name(p.role)] = slot;
  }
  rec["predicted_structure"] = ps;
  return rec;
}

// Writes a loss-curve artifact: provenance header then one record per epoch.
void write_curve(const std::string& path, const TrainResult& result, uint64_t seed,
                 uint64_t digest) {
  std::string body = header_line("loss_curve", seed, digest);
  for (const auto& e : result.curve) {
    json rec;
    rec["epoch"] = e.epoch;
    rec["train_loss"] = e.train_loss;
    if (!std::isnan(e.valid_loss)) rec["valid_loss"] = e.valid_loss;
    rec["token_accuracy"] = e.token_accuracy;
    rec["lr"] = e.lr;
    body += rec.dump() + "\n";
  }
  atomic_write(path, body);
}

// --- subcommand implementations ---------------------------------------------

int cmd_synth(const Effective& eff) {
  const auto& kv = eff.kv;
  SynthSpec spec;
  spec.dialogue_count = kv.get_int("synth.count", 200);
  spec.n_min = kv.get_int("synth.n_min", 4);
  spec.n_max = kv.get_int("synth.n_max", 8);
  spec.m_min = kv.get_int("synth.m_min", 2);
  spec.m_max = kv.get_int("synth.m_max", 4);
  spec.vocab_size = kv.get_int("synth.vocab_size", 60);
  spec.text_len_min = kv.get_int("synth.text_min", 3);
  spec.text_len_max = kv.get_int("synth.text_max", 6);
  spec.seed = kv.get_u64("run.seed", 7);
  const std::string rule = kv.get("synth.rule", "cued");
  if (rule == "last")
    spec.rule = StructureRule::kLast;
  else if (rule == "cued")
    spec.rule = StructureRule::kCued;
  else
    throw std::invalid_argument("synth: unknown rule " + rule);

  const auto corpus = synth_corpus(spec);
  const std::string out = kv.get("synth.out", "");
  const std::string body =
      serialize_corpus(corpus, header_line("corpus", spec.seed, eff.digest()));
  atomic_write(out, body);
  std::cout << "wrote " << corpus.size() << " dialogues to " << out << "\n";
  return 0;
}

int cmd_stats(const Effective& eff) {
  const auto& kv = eff.kv;
  const auto corpus = load_corpus_strict(kv.get("stats.corpus", ""));
  const std::string table = render_stats(corpus_stats(corpus));
  std::cout << table;
  const std::string out = kv.get("stats.out", "");
  if (!out.empty())
    atomic_write(out, header_line("stats", kv.get_u64("run.seed", 0), eff.digest()) + table);
  return 0;
}

int cmd_build_vocab(const Effective& eff) {
  const auto& kv = eff.kv;
  const auto corpus = load_corpus_strict(kv.get("vocab.corpus", ""));
  int nmax = kv.get_int("vocab.nmax", 0);
  int mmax = kv.get_int("vocab.mmax", 0);
  if (nmax == 0 || mmax == 0) {
    // Auto-size to the corpus (the response slot needs index n+1).
    for (const auto& d : corpus) {
      const int slots = d.num_utterances() + (d.response ? 1 : 0);
      nmax = std::max(nmax, slots);
      int m = d.num_context_speakers();
      if (d.response) m = std::max(m, d.response->speaker);
      mmax = std::max(mmax, m);
    }
  }
  const Vocab vocab = build_vocab(corpus, kv.get_int("vocab.min_freq", 1), nmax, mmax);
  const std::string out = kv.get("vocab.out", "");
  atomic_write(out, header_line("vocab", kv.get_u64("run.seed", 0), eff.digest()) +
                        vocab.serialize());
  std::cout << "vocabulary: " << vocab.size() << " ids (" << vocab.base_size()
            << " base tokens, Nmax=" << vocab.nmax() << ", Mmax=" << vocab.mmax() << ")\n";
  return 0;
}

int cmd_train(const Effective& eff, TrainPhase phase) {
  const auto& kv = eff.kv;
  const uint64_t seed = kv.get_u64("run.seed", 1);
  const auto corpus = load_corpus_strict(kv.get("train.corpus", ""));
  std::vector<Dialogue> valid;
  const std::string valid_path = kv.get("train.valid", "");
  if (!valid_path.empty()) valid = load_corpus_strict(valid_path);

  const Vocab vocab = Vocab::load(kv.get("train.vocab", ""));
  const std::string init_path = kv.get("train.init", "");
  ModelT<float> model = init_path.empty()
                            ? ModelT<float>(model_config_from(kv, vocab.size(), seed))
                            : load_checkpoint<float>(init_path, vocab.hash());

  const TrainConfig tc = train_config_from(kv, phase, seed);
  const TrainResult result = train(model, corpus, valid.empty() ? nullptr : &valid, vocab, tc,
                                   kv.get_bool("train.quiet", false) ? nullptr : &std::cerr);

  CheckpointMeta meta;
  meta.vocab_hash = vocab.hash();
  meta.seed = seed;
  meta.config_digest = eff.digest();
  const std::string out = kv.get("train.out", "");
  save_checkpoint(out, model, meta);

  const std::string curve_path = kv.get("train.curve", "");
  if (!curve_path.empty()) write_curve(curve_path, result, seed, eff.digest());
  if (!kv.get_bool("train.quiet", false)) std::cout << render_curve(result.curve);
  if (result.best_epoch > 0)
    std::cout << "best epoch " << result.best_epoch << " (loss " << result.best_loss << ")\n";
  return 0;
}

int cmd_generate(const Effective& eff) {
  const auto& kv = eff.kv;
  const auto corpus = load_corpus_strict(kv.get("gen.corpus", ""));
  const Vocab vocab = Vocab::load(kv.get("gen.vocab", ""));
  CheckpointMeta meta;
  const ModelT<float> model = load_checkpoint<float>(kv.get("gen.ckpt", ""), vocab.hash(), &meta);
  const DecodeOptions opts = decode_options_from(kv);

  std::string body = header_line("predictions", kv.get_u64("run.seed", meta.seed), eff.digest());
  for (size_t i = 0; i < corpus.size(); ++i) {
    const Dialogue& d = corpus[i];
    const ResponseStructure rs = d.response ? response_structure_of(d) : ResponseStructure{};
    const GenerationResult res = generate_response(model, vocab, d, rs, opts);
    body += prediction_record(static_cast<int>(i) + 1, res).dump() + "\n";
  }
  const std::string out = kv.get("gen.out", "");
  atomic_write(out, body);
  std::cout << "wrote " << corpus.size() << " predictions to " << out << "\n";
  return 0;
}

int cmd_predict_structure(const Effective& eff) {
  const auto& kv = eff.kv;
  const auto corpus = load_corpus_strict(kv.get("pred.corpus", ""));
  const Vocab vocab = Vocab::load(kv.get("pred.vocab", ""));
  const ModelT<float> model = load_checkpoint<float>(kv.get("pred.ckpt", ""), vocab.hash());
  const std::string also_mask = kv.get("pred.also_mask", "");

  std::string body = header_line("structure_predictions", kv.get_u64("run.seed", 0), eff.digest());
  for (size_t i = 0; i < corpus.size(); ++i) {
    const Dialogue& d = corpus[i];
    const ResponseStructure rs = d.response ? response_structure_of(d) : ResponseStructure{};
    SequenceInput seq = structuralize_dialogue(d, rs, vocab);
    if (!also_mask.empty()) {
      MaskSpec spec;
      spec.p = 1.0;
      spec.scope = parse_role_set(also_mask);
      spec.seed = 0;
      seq = apply_masking(seq, spec, vocab);
    }
    json rec;
    rec["dialogue_id"] = static_cast<int>(i) + 1;
    json preds = json::array();
    for (const auto& p : predict_structure(model, vocab, seq)) {
      json slot;
      slot["role"] = role_name(p.role);
      slot["position"] = p.position;
      if (p.ordinal > 0)
        slot["ordinal"] = p.ordinal;
      else
        slot["ordinal"] = nullptr;
      slot["confidence"] = p.confidence;
      preds.push_back(slot);
    }
    rec["predictions"] = preds;
    body += rec.dump() + "\n";
  }
  const std::string out = kv.get("pred.out", "");
  atomic_write(out, body);
  std::cout << "wrote structure predictions for " << corpus.size() << " dialogues to " << out
            << "\n";
  return 0;
}

int cmd_loop(const Effective& eff) {
  const auto& kv = eff.kv;
  const auto corpus = load_corpus_strict(kv.get("loop.corpus", ""));
  const Vocab vocab = Vocab::load(kv.get("loop.vocab", ""));
  const ModelT<float> model = load_checkpoint<float>(kv.get("loop.ckpt", ""), vocab.hash());
  const DecodeOptions opts = decode_options_from(kv);
  const int steps = kv.get_int("loop.steps", 5);
  const bool enforce = kv.get_bool("loop.enforce_consistency", false);
  if (steps < 1) throw std::invalid_argument("loop: steps must be >= 1");

  std::string body = header_line("loop", kv.get_u64("run.seed", 0), eff.digest());
  long consistent = 0, total = 0;
  for (size_t i = 0; i < corpus.size(); ++i) {
    Dialogue history = corpus[i];
    history.response.reset();  // the loop generates its own turns
    const int m0 = history.num_context_speakers();
    for (int s = 0; s < steps; ++s) {
      const int next_speaker = (s % m0) + 1;  // round-robin over the initial speakers
      const RealWorldStep step = real_world_step(model, vocab, history, next_speaker, opts, enforce);
      json rec;
      rec["dialogue_id"] = static_cast<int>(i) + 1;
      rec["step"] = s + 1;
      rec["speaker"] = next_speaker;
      rec["text"] = step.result.text;
      rec["target"] = step.predicted_target > 0 ? json(step.predicted_target) : json(nullptr);
      rec["addressee"] =
          step.predicted_addressee > 0 ? json(step.predicted_addressee) : json(nullptr);
      rec["consistent"] = step.consistent;
      body += rec.dump() + "\n";
      consistent += step.consistent ? 1 : 0;
      total += 1;
    }
    const ValidationReport rep = validate_dialogue(history);
    if (!rep.ok())
      throw std::runtime_error("loop: grown history failed validation for dialogue " +
                               std::to_string(i + 1) + ": " + rep.hard_errors.front());
  }
  json summary;
  summary["consistency_rate"] = total > 0 ? static_cast<double>(consistent) / total : 0.0;
  summary["steps"] = total;
  body += summary.dump() + "\n";
  const std::string out = kv.get("loop.out", "");
  atomic_write(out, body);
  std::cout << "loop consistency rate: " << (total > 0 ? static_cast<double>(consistent) / total : 0.0)
            << " over " << total << " steps\n";
  return 0;
}

int cmd_evaluate(const Effective& eff) {
  const auto& kv = eff.kv;
  const auto gold = load_corpus_strict(kv.get("eval.gold", ""));
  const auto lines = read_lines(kv.get("eval.pred", ""));

  std::vector<std::string> candidates, references;
  std::vector<int> pred_targets, gold_targets, pred_addressees, gold_addressees;
  for (const auto& line : lines) {
    if (line.empty()) continue;
    const json rec = json::parse(line);
    if (rec.contains("ssmpc")) continue;  // provenance header
    const int id = rec.at("dialogue_id").get<int>();
    if (id < 1 || id > static_cast<int>(gold.size()))
      throw std::runtime_error("evaluate: dialogue_id " + std::to_string(id) +
                               " outside the gold corpus");
    const Dialogue& d = gold[static_cast<size_t>(id) - 1];
    if (!d.response) throw std::runtime_error("evaluate: gold dialogue lacks a response");
    candidates.push_back(rec.at("response_text").get<std::string>());
    references.push_back(d.response->text);

    if (rec.contains("predicted_structure")) {
      const json& ps = rec["predicted_structure"];
      if (ps.contains("resp_tgt_idx") && !ps["resp_tgt_idx"]["ordinal"].is_null() &&
          d.response->target_index) {
        pred_targets.push_back(ps["resp_tgt_idx"]["ordinal"].get<int>());
        gold_targets.push_back(*d.response->target_index);
      }
      if (ps.contains("resp_adr") && !ps["resp_adr"]["ordinal"].is_null() &&
          d.response->addressee) {
        pred_addressees.push_back(ps["resp_adr"]["ordinal"].get<int>());
        gold_addressees.push_back(*d.response->addressee);
      }
    }
  }
  if (candidates.empty()) throw std::runtime_error("evaluate: no prediction records found");

  EvalReport report = evaluate_generation(candidates, references);
  if (!pred_targets.empty())
    report.add("target_p@1", precision_at_1(pred_targets, gold_targets));
  if (!pred_addressees.empty())
    report.add("addressee_p@1", precision_at_1(pred_addressees, gold_addressees));

  const std::string table = report.render_table();
  std::cout << table;
  const std::string out = kv.get("eval.out", "");
  if (!out.empty())
    atomic_write(out, header_line("eval_report", kv.get_u64("run.seed", 0), eff.digest()) +
                          report.to_json_records() + table);
  return 0;
}

int cmd_sweep(const Effective& eff) {
  const auto& kv = eff.kv;
  const uint64_t seed = kv.get_u64("run.seed", 1);
  const auto train_set = load_corpus_strict(kv.get("sweep.corpus", ""));
  const auto held_out = load_corpus_strict(kv.get("sweep.held", ""));
  const Vocab vocab = Vocab::load(kv.get("sweep.vocab", ""));

  SweepConfig sc;
  sc.model = model_config_from(kv, vocab.size(), seed);
  sc.post = train_config_from(kv, TrainPhase::kPost, seed);
  sc.post.epochs = kv.get_int("sweep.post_epochs", sc.post.epochs);
  sc.fine = train_config_from(kv, TrainPhase::kFine, seed);
  sc.fine.epochs = kv.get_int("sweep.fine_epochs", sc.fine.epochs);
  sc.max_len = kv.get_int("decode.max_len", 50);
  std::istringstream plist(kv.get("sweep.p", "0.25,1.0"));
  std::string item;
  while (std::getline(plist, item, ','))
    if (!item.empty()) sc.p_values.push_back(std::stod(item));

  const auto arms = masking_sweep(train_set, held_out, vocab, sc,
                                  kv.get_bool("train.quiet", false) ? nullptr : &std::cerr);

  std::string body = header_line("sweep", seed, eff.digest());
  for (const auto& a : arms) {
    json rec;
    rec["arm"] = a.label;
    rec["post_trained"] = a.post_trained;
    rec["p"] = a.p;
    rec["target_p@1"] = a.target_p1;
    rec["addressee_p@1"] = a.addressee_p1;
    for (const auto& [name, score] : a.generation.scores) rec["metrics"][name] = score;
    body += rec.dump() + "\n";
  }
  const std::string table = render_sweep_table(arms);
  body += table;
  const std::string out = kv.get("sweep.out", "");
  atomic_write(out, body);
  std::cout << table;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sequence-structured multi-party conversation modeling"};
  app.require_subcommand(1);

  std::string config_path = default_config_path();
  app.add_option("--config", config_path, "key = value config file (or $SSMPC_CONFIG)");

  // Per-subcommand locals. Each flag overlays the same dotted key the config
  // file uses, so flags always win over the file.
  struct {
    std::string out, rule;
    int count = 0, n_min = 0, n_max = 0, m_min = 0, m_max = 0, vocab_size = 0, text_min = 0,
        text_max = 0;
    uint64_t seed = 0;
  } sy;
  auto* synth = app.add_subcommand("synth", "generate a synthetic corpus");
  auto* sy_out = synth->add_option("--out", sy.out, "corpus file to write")->required();
  auto* sy_count = synth->add_option("--count", sy.count, "number of dialogues");
  auto* sy_rule = synth->add_option("--rule", sy.rule, "structure rule: last | cued");
  auto* sy_seed = synth->add_option("--seed", sy.seed, "corpus seed");
  auto* sy_nmin = synth->add_option("--n-min", sy.n_min, "min utterances");
  auto* sy_nmax = synth->add_option("--n-max", sy.n_max, "max utterances");
  auto* sy_mmin = synth->add_option("--m-min", sy.m_min, "min speakers");
  auto* sy_mmax = synth->add_option("--m-max", sy.m_max, "max speakers");
  auto* sy_vocab = synth->add_option("--vocab-size", sy.vocab_size, "filler word inventory");
  auto* sy_tmin = synth->add_option("--text-min", sy.text_min, "min words per utterance");
  auto* sy_tmax = synth->add_option("--text-max", sy.text_max, "max words per utterance");

  struct {
    std::string corpus, out;
  } st;
  auto* stats = app.add_subcommand("stats", "corpus statistics");
  auto* st_corpus = stats->add_option("--corpus", st.corpus, "corpus file")->required();
  auto* st_out = stats->add_option("--out", st.out, "optional stats artifact");

  struct {
    std::string corpus, out;
    int min_freq = 0, nmax = 0, mmax = 0;
  } bv;
  auto* build = app.add_subcommand("build-vocab", "build a vocabulary from a corpus");
  auto* bv_corpus = build->add_option("--corpus", bv.corpus, "corpus file")->required();
  auto* bv_out = build->add_option("--out", bv.out, "vocabulary file to write")->required();
  auto* bv_minfreq = build->add_option("--min-freq", bv.min_freq, "frequency cutoff");
  auto* bv_nmax = build->add_option("--nmax", bv.nmax, "index-token capacity (0 = fit corpus)");
  auto* bv_mmax = build->add_option("--mmax", bv.mmax, "speaker-token capacity (0 = fit corpus)");

  struct TrainFlags {
    std::string corpus, valid, vocab, out, init, curve, scope, ckpt_dir;
    double lr = 0, wd = 0, p = 0, dropout = 0, stop_acc = 0;
    int epochs = 0, batch = 0, accum = 0, d_model = 0, heads = 0, enc_layers = 0, dec_layers = 0,
        ffn = 0, max_pos = 0, ckpt_every = 0;
    uint64_t seed = 0, init_seed = 0;
    bool all_positions = false, quiet = false;
  };
  auto add_train_flags = [](CLI::App* sub, TrainFlags& f, bool post) {
    std::map<std::string, CLI::Option*> opts;
    opts["train.corpus"] = sub->add_option("--corpus", f.corpus, "training corpus")->required();
    opts["train.valid"] = sub->add_option("--valid", f.valid, "validation corpus");
    opts["train.vocab"] = sub->add_option("--vocab", f.vocab, "vocabulary file")->required();
    opts["train.out"] = sub->add_option("--out", f.out, "checkpoint to write")->required();
    opts["train.init"] = sub->add_option("--init", f.init, "checkpoint to start from");
    opts["train.curve"] = sub->add_option("--curve", f.curve, "loss-curve artifact");
    opts["train.lr"] = sub->add_option("--lr", f.lr, "learning rate");
    opts["train.epochs"] = sub->add_option("--epochs", f.epochs, "training epochs");
    opts["train.batch_size"] = sub->add_option("--batch", f.batch, "batch size");
    opts["train.accum_steps"] = sub->add_option("--accum", f.accum, "gradient accumulation steps");
    opts["train.weight_decay"] = sub->add_option("--wd", f.wd, "weight decay");
    opts["train.stop_at_accuracy"] =
        sub->add_option("--stop-at-accuracy", f.stop_acc, "early exit at train accuracy");
    opts["train.checkpoint_every"] =
        sub->add_option("--checkpoint-every", f.ckpt_every, "epochs between checkpoints");
    opts["train.checkpoint_dir"] =
        sub->add_option("--checkpoint-dir", f.ckpt_dir, "directory for cadence checkpoints");
    opts["run.seed"] = sub->add_option("--seed", f.seed, "run seed");
    opts["model.d_model"] = sub->add_option("--d-model", f.d_model, "model width");
    opts["model.n_heads"] = sub->add_option("--heads", f.heads, "attention heads");
    opts["model.enc_layers"] = sub->add_option("--enc-layers", f.enc_layers, "encoder layers");
    opts["model.dec_layers"] = sub->add_option("--dec-layers", f.dec_layers, "decoder layers");
    opts["model.ffn_dim"] = sub->add_option("--ffn", f.ffn, "feed-forward width");
    opts["model.max_positions"] = sub->add_option("--max-pos", f.max_pos, "position capacity");
    opts["model.dropout"] = sub->add_option("--dropout", f.dropout, "dropout rate");
    opts["model.init_seed"] = sub->add_option("--init-seed", f.init_seed, "init seed");
    opts["train.quiet"] = sub->add_flag("--quiet", f.quiet, "suppress progress logging");
    if (post) {
      opts["mask.p"] = sub->add_option("--p", f.p, "masking probability");
      opts["mask.scope"] = sub->add_option("--scope", f.scope, "masked roles (csv)");
      opts["train.loss_all_positions"] =
          sub->add_flag("--all-positions", f.all_positions, "supervise visible positions too");
    }
    return opts;
  };
  TrainFlags pt, ft;
  auto* post_train = app.add_subcommand("post-train", "masked structure post-training");
  auto post_opts = add_train_flags(post_train, pt, true);
  auto* fine_tune = app.add_subcommand("fine-tune", "response-generation fine-tuning");
  auto fine_opts = add_train_flags(fine_tune, ft, false);

  struct {
    std::string corpus, vocab, ckpt, out;
    int max_len = 0, beam = 0;
  } ge;
  auto* generate = app.add_subcommand("generate", "generate responses");
  auto* ge_corpus = generate->add_option("--corpus", ge.corpus, "dialogues")->required();
  auto* ge_vocab = generate->add_option("--vocab", ge.vocab, "vocabulary")->required();
  auto* ge_ckpt = generate->add_option("--ckpt", ge.ckpt, "model checkpoint")->required();
  auto* ge_out = generate->add_option("--out", ge.out, "predictions file")->required();
  auto* ge_maxlen = generate->add_option("--max-len", ge.max_len, "decode length cap");
  auto* ge_beam = generate->add_option("--beam", ge.beam, "beam width (1 = greedy)");

  struct {
    std::string corpus, vocab, ckpt, out, also_mask;
  } pr;
  auto* predict = app.add_subcommand("predict-structure", "predict masked/omitted structure");
  auto* pr_corpus = predict->add_option("--corpus", pr.corpus, "dialogues")->required();
  auto* pr_vocab = predict->add_option("--vocab", pr.vocab, "vocabulary")->required();
  auto* pr_ckpt = predict->add_option("--ckpt", pr.ckpt, "model checkpoint")->required();
  auto* pr_out = predict->add_option("--out", pr.out, "predictions file")->required();
  auto* pr_mask = predict->add_option("--also-mask", pr.also_mask,
                                      "additionally mask these roles (csv) before predicting");

  struct {
    std::string corpus, vocab, ckpt, out;
    int steps = 0, max_len = 0, beam = 0;
    bool enforce = false;
  } lo;
  auto* loop = app.add_subcommand("loop", "real-world accumulation loop");
  auto* lo_corpus = loop->add_option("--corpus", lo.corpus, "seed dialogues")->required();
  auto* lo_vocab = loop->add_option("--vocab", lo.vocab, "vocabulary")->required();
  auto* lo_ckpt = loop->add_option("--ckpt", lo.ckpt, "model checkpoint")->required();
  auto* lo_out = loop->add_option("--out", lo.out, "loop records file")->required();
  auto* lo_steps = loop->add_option("--steps", lo.steps, "turns to generate per dialogue");
  auto* lo_maxlen = loop->add_option("--max-len", lo.max_len, "decode length cap");
  auto* lo_beam = loop->add_option("--beam", lo.beam, "beam width");
  auto* lo_enforce =
      loop->add_flag("--enforce-consistency", lo.enforce, "addressee := speaker(target)");

  struct {
    std::string pred, gold, out;
  } ev;
  auto* evaluate = app.add_subcommand("evaluate", "score predictions against gold responses");
  auto* ev_pred = evaluate->add_option("--pred", ev.pred, "predictions file")->required();
  auto* ev_gold = evaluate->add_option("--gold", ev.gold, "gold corpus")->required();
  auto* ev_out = evaluate->add_option("--out", ev.out, "report artifact");

  struct {
    std::string corpus, held, vocab, out, p;
    int post_epochs = 0, fine_epochs = 0;
    bool quiet = false;
  } sw;
  auto* sweep = app.add_subcommand("sweep-p", "masking-rate ablation sweep");
  auto* sw_corpus = sweep->add_option("--corpus", sw.corpus, "training corpus")->required();
  auto* sw_held = sweep->add_option("--held", sw.held, "held-out corpus")->required();
  auto* sw_vocab = sweep->add_option("--vocab", sw.vocab, "vocabulary")->required();
  auto* sw_out = sweep->add_option("--out", sw.out, "sweep artifact")->required();
  auto* sw_p = sweep->add_option("--p", sw.p, "comma-separated masking rates");
  auto* sw_post = sweep->add_option("--post-epochs", sw.post_epochs, "post-training epochs");
  auto* sw_fine = sweep->add_option("--fine-epochs", sw.fine_epochs, "fine-tuning epochs");
  auto* sw_quiet = sweep->add_flag("--quiet", sw.quiet, "suppress progress logging");
  // sweep shares the train/model keys through the config file; dedicated flags
  // cover the arm list and per-phase epochs.
  TrainFlags swf;
  auto* sw_seed = sweep->add_option("--seed", swf.seed, "run seed");

  CLI11_PARSE(app, argc, argv);

  try {
    Effective eff;
    if (!config_path.empty()) eff.kv = KvConfig::load(config_path);

    if (*synth) {
      eff.take(sy_out, "synth.out", sy.out);
      eff.take(sy_count, "synth.count", sy.count);
      eff.take(sy_rule, "synth.rule", sy.rule);
      eff.take(sy_seed, "run.seed", sy.seed);
      eff.take(sy_nmin, "synth.n_min", sy.n_min);
      eff.take(sy_nmax, "synth.n_max", sy.n_max);
      eff.take(sy_mmin, "synth.m_min", sy.m_min);
      eff.take(sy_mmax, "synth.m_max", sy.m_max);
      eff.take(sy_vocab, "synth.vocab_size", sy.vocab_size);
      eff.take(sy_tmin, "synth.text_min", sy.text_min);
      eff.take(sy_tmax, "synth.text_max", sy.text_max);
      return cmd_synth(eff);
    }
    if (*stats) {
      eff.take(st_corpus, "stats.corpus", st.corpus);
      eff.take(st_out, "stats.out", st.out);
      return cmd_stats(eff);
    }
    if (*build) {
      eff.take(bv_corpus, "vocab.corpus", bv.corpus);
      eff.take(bv_out, "vocab.out", bv.out);
      eff.take(bv_minfreq, "vocab.min_freq", bv.min_freq);
      eff.take(bv_nmax, "vocab.nmax", bv.nmax);
      eff.take(bv_mmax, "vocab.mmax", bv.mmax);
      return cmd_build_vocab(eff);
    }
    auto overlay_train = [&eff](const std::map<std::string, CLI::Option*>& opts,
                                const TrainFlags& f) {
      auto at = [&](const char* k) {
        const auto it = opts.find(k);
        return it == opts.end() ? nullptr : it->second;
      };
      eff.take(at("train.corpus"), "train.corpus", f.corpus);
      eff.take(at("train.valid"), "train.valid", f.valid);
      eff.take(at("train.vocab"), "train.vocab", f.vocab);
      eff.take(at("train.out"), "train.out", f.out);
      eff.take(at("train.init"), "train.init", f.init);
      eff.take(at("train.curve"), "train.curve", f.curve);
      eff.take(at("train.lr"), "train.lr", f.lr);
      eff.take(at("train.epochs"), "train.epochs", f.epochs);
      eff.take(at("train.batch_size"), "train.batch_size", f.batch);
      eff.take(at("train.accum_steps"), "train.accum_steps", f.accum);
      eff.take(at("train.weight_decay"), "train.weight_decay", f.wd);
      eff.take(at("train.stop_at_accuracy"), "train.stop_at_accuracy", f.stop_acc);
      eff.take(at("train.checkpoint_every"), "train.checkpoint_every", f.ckpt_every);
      eff.take(at("train.checkpoint_dir"), "train.checkpoint_dir", f.ckpt_dir);
      eff.take(at("run.seed"), "run.seed", f.seed);
      eff.take(at("model.d_model"), "model.d_model", f.d_model);
      eff.take(at("model.n_heads"), "model.n_heads", f.heads);
      eff.take(at("model.enc_layers"), "model.enc_layers", f.enc_layers);
      eff.take(at("model.dec_layers"), "model.dec_layers", f.dec_layers);
      eff.take(at("model.ffn_dim"), "model.ffn_dim", f.ffn);
      eff.take(at("model.max_positions"), "model.max_positions", f.max_pos);
      eff.take(at("model.dropout"), "model.dropout", f.dropout);
      eff.take(at("model.init_seed"), "model.init_seed", f.init_seed);
      eff.take(at("train.quiet"), "train.quiet", f.quiet);
      eff.take(at("mask.p"), "mask.p", f.p);
      eff.take(at("mask.scope"), "mask.scope", f.scope);
      eff.take(at("train.loss_all_positions"), "train.loss_all_positions", f.all_positions);
    };
    if (*post_train) {
      overlay_train(post_opts, pt);
      return cmd_train(eff, TrainPhase::kPost);
    }
    if (*fine_tune) {
      overlay_train(fine_opts, ft);
      return cmd_train(eff, TrainPhase::kFine);
    }
    if (*generate) {
      eff.take(ge_corpus, "gen.corpus", ge.corpus);
      eff.take(ge_vocab, "gen.vocab", ge.vocab);
      eff.take(ge_ckpt, "gen.ckpt", ge.ckpt);
      eff.take(ge_out, "gen.out", ge.out);
      eff.take(ge_maxlen, "decode.max_len", ge.max_len);
      eff.take(ge_beam, "decode.beam", ge.beam);
      return cmd_generate(eff);
    }
    if (*predict) {
      eff.take(pr_corpus, "pred.corpus", pr.corpus);
      eff.take(pr_vocab, "pred.vocab", pr.vocab);
      eff.take(pr_ckpt, "pred.ckpt", pr.ckpt);
      eff.take(pr_out, "pred.out", pr.out);
      eff.take(pr_mask, "pred.also_mask", pr.also_mask);
      return cmd_predict_structure(eff);
    }
    if (*loop) {
      eff.take(lo_corpus, "loop.corpus", lo.corpus);
      eff.take(lo_vocab, "loop.vocab", lo.vocab);
      eff.take(lo_ckpt, "loop.ckpt", lo.ckpt);
      eff.take(lo_out, "loop.out", lo.out);
      eff.take(lo_steps, "loop.steps", lo.steps);
      eff.take(lo_maxlen, "decode.max_len", lo.max_len);
      eff.take(lo_beam, "decode.beam", lo.beam);
      eff.take(lo_enforce, "loop.enforce_consistency", lo.enforce);
      return cmd_loop(eff);
    }
    if (*evaluate) {
      eff.take(ev_pred, "eval.pred", ev.pred);
      eff.take(ev_gold, "eval.gold", ev.gold);
      eff.take(ev_out, "eval.out", ev.out);
      return cmd_evaluate(eff);
    }
    if (*sweep) {
      eff.take(sw_corpus, "sweep.corpus", sw.corpus);
      eff.take(sw_held, "sweep.held", sw.held);
      eff.take(sw_vocab, "sweep.vocab", sw.vocab);
      eff.take(sw_out, "sweep.out", sw.out);
      eff.take(sw_p, "sweep.p", sw.p);
      eff.take(sw_post, "sweep.post_epochs", sw.post_epochs);
      eff.take(sw_fine, "sweep.fine_epochs", sw.fine_epochs);
      eff.take(sw_quiet, "train.quiet", sw.quiet);
      eff.take(sw_seed, "run.seed", swf.seed);
      return cmd_sweep(eff);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  std::cerr << "error: no subcommand selected\n";
  return 1;
}
