#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ssmpc {

// One turn of a multi-party conversation. `index` is the 1-based position in
// the dialogue, `speaker`/`addressee` are 1-based speaker ordinals assigned by
// first appearance, and `target_index` points at the utterance being replied
// to. Absent target/addressee stay absent; the loader never imputes them.
struct Utterance {
  int index = 0;
  int speaker = 0;
  std::optional<int> target_index;
  std::optional<int> addressee;
  std::string text;
  std::vector<std::string> tokens;  // lowercased whitespace-split words
};

struct Dialogue {
  std::vector<std::string> speaker_labels;  // ordinal k -> label, first-appearance order
  std::vector<Utterance> utterances;        // indices exactly 1..n
  std::optional<Utterance> response;        // gold final response, index n+1

  int num_utterances() const { return static_cast<int>(utterances.size()); }
  // Distinct speakers among context utterances.
  int num_context_speakers() const;
};

struct CorpusStats {
  int dialogue_count = 0;
  double mean_utterances = 0.0;
  double mean_speakers = 0.0;
  // Fraction of context utterances lacking target or addressee.
  double missing_structure_fraction = 0.0;
};

struct ValidationReport {
  std::vector<std::string> hard_errors;
  int gold_checked = 0;     // utterances carrying both target and addressee
  int gold_consistent = 0;  // of those, addressee == speaker(target)
  bool ok() const { return hard_errors.empty(); }
  bool gold_consistent_all() const { return gold_consistent == gold_checked; }
};

struct ParseResult {
  std::vector<Dialogue> dialogues;
  int skipped = 0;  // lenient mode: records dropped for hard-invariant violations
  std::vector<std::string> warnings;
};

enum class StructureRule { kLast, kCued };

struct SynthSpec {
  int dialogue_count = 0;
  int n_min = 0, n_max = 0;        // utterances per dialogue
  int m_min = 0, m_max = 0;        // speakers per dialogue
  int vocab_size = 0;              // filler word inventory
  StructureRule rule = StructureRule::kLast;
  uint64_t seed = 0;
  int text_len_min = 3, text_len_max = 6;
};

std::vector<std::string> tokenize_words(std::string_view text);

ValidationReport validate_dialogue(const Dialogue& d);

// Canonical line-delimited corpus format: one JSON record per line with
// fields `speakers`, `utterances`, `response`. A leading {"ssmpc": ...}
// header line is recognized and skipped.
ParseResult parse_corpus(const std::string& path, bool strict);
Dialogue parse_dialogue_record(const std::string& line);

std::string serialize_dialogue(const Dialogue& d);
std::string serialize_corpus(const std::vector<Dialogue>& corpus, const std::string& header_line = "");

std::vector<Dialogue> synth_corpus(const SynthSpec& spec);

CorpusStats corpus_stats(const std::vector<Dialogue>& corpus);
std::string render_stats(const CorpusStats& s);

}  // namespace ssmpc
