#include "ssmpc/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "ssmpc/io.hpp"
#include "ssmpc/rng.hpp"

namespace ssmpc {

using nlohmann::json;

int Dialogue::num_context_speakers() const {
  std::set<int> seen;
  for (const auto& u : utterances) seen.insert(u.speaker);
  return static_cast<int>(seen.size());
}

std::vector<std::string> tokenize_words(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!cur.empty()) {
        out.push_back(cur);
        cur.clear();
      }
    } else {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

namespace {

void check_structure_fields(const Utterance& u, int n_context, int m_known,
                            std::vector<std::string>& errors) {
  if (u.speaker < 1) errors.push_back("utterance " + std::to_string(u.index) + ": speaker < 1");
  if (u.target_index) {
    if (*u.target_index < 1)
      errors.push_back("utterance " + std::to_string(u.index) + ": target_index < 1");
    else if (*u.target_index >= u.index)
      errors.push_back("utterance " + std::to_string(u.index) +
                       ": target_index " + std::to_string(*u.target_index) +
                       " must precede the utterance");
    if (*u.target_index > n_context)
      errors.push_back("utterance " + std::to_string(u.index) + ": target_index beyond dialogue");
  }
  if (u.addressee) {
    if (*u.addressee < 1)
      errors.push_back("utterance " + std::to_string(u.index) + ": addressee < 1");
    else if (*u.addressee > m_known)
      errors.push_back("utterance " + std::to_string(u.index) + ": addressee " +
                       std::to_string(*u.addressee) + " names an unknown speaker");
  }
}

}  // namespace

ValidationReport validate_dialogue(const Dialogue& d) {
  ValidationReport rep;
  auto& errors = rep.hard_errors;
  const int n = d.num_utterances();
  if (n < 1) {
    errors.push_back("dialogue has no utterances");
    return rep;
  }

  for (int i = 0; i < n; ++i) {
    if (d.utterances[i].index != i + 1) {
      errors.push_back("utterance indices must be exactly 1..n in order");
      break;
    }
  }

  // Speaker ordinals are assigned by first appearance, so the running maximum
  // may only ever grow by one.
  int max_seen = 0;
  for (const auto& u : d.utterances) {
    if (u.speaker > max_seen + 1) {
      errors.push_back("utterance " + std::to_string(u.index) + ": speaker ordinal gap (" +
                       std::to_string(u.speaker) + " after " + std::to_string(max_seen) + ")");
    }
    max_seen = std::max(max_seen, u.speaker);
  }
  const int m_ctx = max_seen;

  const auto& first = d.utterances.front();
  if (first.target_index || first.addressee)
    errors.push_back("first utterance must not carry target or addressee");

  for (const auto& u : d.utterances) check_structure_fields(u, n, m_ctx, errors);

  int m_total = m_ctx;
  if (d.response) {
    const auto& r = *d.response;
    if (r.index != n + 1)
      errors.push_back("response index must be n+1");
    if (r.speaker < 1 || r.speaker > m_ctx + 1)
      errors.push_back("response speaker must be an existing speaker or the next new ordinal");
    if (r.target_index && (*r.target_index < 1 || *r.target_index > n))
      errors.push_back("response target_index must point into the dialogue");
    if (r.addressee && (*r.addressee < 1 || *r.addressee > m_ctx))
      errors.push_back("response addressee names an unknown speaker");
    m_total = std::max(m_total, r.speaker);
  }

  if (!d.speaker_labels.empty() && static_cast<int>(d.speaker_labels.size()) != m_total)
    errors.push_back("speaker label list has " + std::to_string(d.speaker_labels.size()) +
                     " entries but " + std::to_string(m_total) + " ordinals are used");

  // Gold consistency: addressee should equal the speaker of the target
  // utterance. Real data may violate this, so it is reported, not fatal.
  auto check_gold = [&](const Utterance& u) {
    if (u.target_index && u.addressee && *u.target_index >= 1 && *u.target_index <= n) {
      ++rep.gold_checked;
      if (d.utterances[static_cast<size_t>(*u.target_index) - 1].speaker == *u.addressee)
        ++rep.gold_consistent;
    }
  };
  for (const auto& u : d.utterances) check_gold(u);
  if (d.response) check_gold(*d.response);

  return rep;
}

namespace {

Utterance utterance_from_json(const json& j, int index) {
  Utterance u;
  u.index = index;
  if (!j.contains("speaker") || !j["speaker"].is_number_integer())
    throw std::runtime_error("utterance missing integer 'speaker'");
  u.speaker = j["speaker"].get<int>();
  if (j.contains("text")) {
    if (!j["text"].is_string()) throw std::runtime_error("utterance 'text' must be a string");
    u.text = j["text"].get<std::string>();
  }
  if (j.contains("target")) {
    if (!j["target"].is_number_integer()) throw std::runtime_error("'target' must be an integer");
    u.target_index = j["target"].get<int>();
  }
  if (j.contains("addressee")) {
    if (!j["addressee"].is_number_integer())
      throw std::runtime_error("'addressee' must be an integer");
    u.addressee = j["addressee"].get<int>();
  }
  u.tokens = tokenize_words(u.text);
  return u;
}

json utterance_to_json(const Utterance& u) {
  json j;
  j["speaker"] = u.speaker;
  if (!u.text.empty()) j["text"] = u.text;
  if (u.target_index) j["target"] = *u.target_index;
  if (u.addressee) j["addressee"] = *u.addressee;
  return j;
}

}  // namespace

Dialogue parse_dialogue_record(const std::string& line) {
  json j = json::parse(line);
  if (!j.is_object()) throw std::runtime_error("record is not an object");
  Dialogue d;
  if (j.contains("speakers")) {
    if (!j["speakers"].is_array()) throw std::runtime_error("'speakers' must be an array");
    for (const auto& s : j["speakers"]) d.speaker_labels.push_back(s.get<std::string>());
  }
  if (!j.contains("utterances") || !j["utterances"].is_array() || j["utterances"].empty())
    throw std::runtime_error("record needs a nonempty 'utterances' array");
  int idx = 1;
  for (const auto& ju : j["utterances"]) d.utterances.push_back(utterance_from_json(ju, idx++));
  if (j.contains("response") && !j["response"].is_null())
    d.response = utterance_from_json(j["response"], idx);
  return d;
}

ParseResult parse_corpus(const std::string& path, bool strict) {
  ParseResult result;
  const auto lines = read_lines(path);
  for (size_t i = 0; i < lines.size(); ++i) {
    const std::string& line = lines[i];
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(i + 1);
    try {
      {
        // Artifact header line, not a record.
        json probe = json::parse(line, nullptr, false);
        if (probe.is_object() && probe.contains("ssmpc")) continue;
      }
      Dialogue d = parse_dialogue_record(line);
      ValidationReport rep = validate_dialogue(d);
      if (!rep.ok()) throw std::runtime_error(rep.hard_errors.front());
      if (rep.gold_checked > rep.gold_consistent)
        result.warnings.push_back(where + ": " +
                                  std::to_string(rep.gold_checked - rep.gold_consistent) +
                                  " utterance(s) with addressee != speaker(target)");
      result.dialogues.push_back(std::move(d));
    } catch (const std::exception& e) {
      if (strict) throw std::runtime_error(where + ": " + e.what());
      ++result.skipped;
      result.warnings.push_back(where + ": skipped (" + e.what() + ")");
    }
  }
  return result;
}

std::string serialize_dialogue(const Dialogue& d) {
  json j;
  j["speakers"] = d.speaker_labels;
  json utts = json::array();
  for (const auto& u : d.utterances) utts.push_back(utterance_to_json(u));
  j["utterances"] = std::move(utts);
  if (d.response) j["response"] = utterance_to_json(*d.response);
  return j.dump();
}

std::string serialize_corpus(const std::vector<Dialogue>& corpus, const std::string& header_line) {
  std::string out;
  if (!header_line.empty()) {
    out += header_line;
    if (out.back() != '\n') out += '\n';
  }
  for (const auto& d : corpus) {
    out += serialize_dialogue(d);
    out += '\n';
  }
  return out;
}

namespace {

std::string filler_text(Rng& rng, const SynthSpec& spec, const std::string& prefix) {
  const int len = rng.uniform_int(spec.text_len_min, spec.text_len_max);
  std::string text = prefix;
  for (int t = 0; t < len; ++t) {
    if (!text.empty()) text += ' ';
    text += "w" + std::to_string(rng.uniform_int(0, spec.vocab_size - 1));
  }
  return text;
}

// Recency-weighted choice of an addressee among speakers active before the
// given position. The skew is what makes response-slot structure learnable
// from context alone.
int pick_cued_addressee(Rng& rng, const std::vector<int>& speakers_so_far, int own_speaker) {
  std::vector<int> order;  // most recently active first
  for (auto it = speakers_so_far.rbegin(); it != speakers_so_far.rend(); ++it) {
    if (std::find(order.begin(), order.end(), *it) == order.end()) order.push_back(*it);
  }
  if (order.size() > 1)
    order.erase(std::remove(order.begin(), order.end(), own_speaker), order.end());
  if (order.size() == 1) return order[0];
  std::vector<double> weights(order.size(), 0.0);
  weights[0] = 0.60;
  weights[1] = 0.25;
  for (size_t i = 2; i < order.size(); ++i) weights[i] = 0.15 / static_cast<double>(order.size() - 2);
  return order[rng.weighted_index(weights)];
}

int last_utterance_by(const std::vector<int>& speakers_so_far, int speaker) {
  for (int i = static_cast<int>(speakers_so_far.size()) - 1; i >= 0; --i) {
    if (speakers_so_far[i] == speaker) return i + 1;  // 1-based utterance index
  }
  return 0;
}

}  // namespace

std::vector<Dialogue> synth_corpus(const SynthSpec& spec) {
  if (spec.dialogue_count < 1) throw std::invalid_argument("synth: dialogue_count must be >= 1");
  if (spec.n_min < 1 || spec.n_min > spec.n_max) throw std::invalid_argument("synth: bad n range");
  if (spec.m_min < 1 || spec.m_min > spec.m_max) throw std::invalid_argument("synth: bad speaker range");
  if (spec.vocab_size < 1) throw std::invalid_argument("synth: vocab_size must be >= 1");
  if (spec.text_len_min < 1 || spec.text_len_min > spec.text_len_max)
    throw std::invalid_argument("synth: bad text length range");

  Rng rng(derive_seed(spec.seed, {0x7355u, static_cast<uint64_t>(spec.rule)}));
  std::vector<Dialogue> corpus;
  corpus.reserve(static_cast<size_t>(spec.dialogue_count));

  for (int di = 0; di < spec.dialogue_count; ++di) {
    const int n = rng.uniform_int(spec.n_min, spec.n_max);
    const int m = std::min(rng.uniform_int(spec.m_min, spec.m_max), n);

    // First-appearance slots: utterance 1 introduces speaker 1, and m-1 more
    // positions (in order) introduce the remaining speakers.
    std::vector<int> later(n - 1);
    for (int i = 0; i < n - 1; ++i) later[i] = i + 1;
    rng.shuffle(later);
    std::vector<int> first_slots(later.begin(), later.begin() + (m - 1));
    first_slots.push_back(0);
    std::sort(first_slots.begin(), first_slots.end());

    std::vector<int> speaker_of(n, 0);
    int next_new = 1;
    for (int i = 0; i < n; ++i) {
      if (std::find(first_slots.begin(), first_slots.end(), i) != first_slots.end())
        speaker_of[i] = next_new++;
      else
        speaker_of[i] = rng.uniform_int(1, next_new - 1);
    }

    Dialogue d;
    for (int k = 1; k <= m; ++k) d.speaker_labels.push_back("spk" + std::to_string(k));

    std::vector<int> spoken;  // speakers of utterances 1..i-1
    for (int i = 1; i <= n; ++i) {
      Utterance u;
      u.index = i;
      u.speaker = speaker_of[i - 1];
      if (i == 1) {
        u.text = filler_text(rng, spec, "");
      } else if (spec.rule == StructureRule::kLast) {
        u.target_index = i - 1;
        u.addressee = speaker_of[i - 2];
        u.text = filler_text(rng, spec, "");
      } else {
        const int k = pick_cued_addressee(rng, spoken, u.speaker);
        u.target_index = last_utterance_by(spoken, k);
        u.addressee = k;
        u.text = filler_text(rng, spec, "@spk" + std::to_string(k));
      }
      u.tokens = tokenize_words(u.text);
      spoken.push_back(u.speaker);
      d.utterances.push_back(std::move(u));
    }

    Utterance r;
    r.index = n + 1;
    r.speaker = rng.uniform_int(1, m);
    if (spec.rule == StructureRule::kLast) {
      r.target_index = n;
      r.addressee = speaker_of[n - 1];
      r.text = filler_text(rng, spec, "");
    } else {
      const int k = pick_cued_addressee(rng, spoken, r.speaker);
      r.target_index = last_utterance_by(spoken, k);
      r.addressee = k;
      r.text = filler_text(rng, spec, "@spk" + std::to_string(k));
    }
    r.tokens = tokenize_words(r.text);
    d.response = std::move(r);

    corpus.push_back(std::move(d));
  }
  return corpus;
}

CorpusStats corpus_stats(const std::vector<Dialogue>& corpus) {
  if (corpus.empty()) throw std::invalid_argument("corpus_stats: empty corpus");
  CorpusStats s;
  s.dialogue_count = static_cast<int>(corpus.size());
  long total_utts = 0, total_speakers = 0, missing = 0;
  for (const auto& d : corpus) {
    total_utts += d.num_utterances();
    total_speakers += d.num_context_speakers();
    for (const auto& u : d.utterances) {
      if (!u.target_index || !u.addressee) ++missing;
    }
  }
  s.mean_utterances = static_cast<double>(total_utts) / s.dialogue_count;
  s.mean_speakers = static_cast<double>(total_speakers) / s.dialogue_count;
  s.missing_structure_fraction = static_cast<double>(missing) / static_cast<double>(total_utts);
  return s;
}

std::string render_stats(const CorpusStats& s) {
  std::ostringstream out;
  out << "dialogues                  " << s.dialogue_count << "\n"
      << "mean utterances            " << s.mean_utterances << "\n"
      << "mean speakers              " << s.mean_speakers << "\n"
      << "missing target/addressee   " << s.missing_structure_fraction << "\n";
  return out.str();
}

}  // namespace ssmpc
