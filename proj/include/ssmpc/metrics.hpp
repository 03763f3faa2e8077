#pragma once

#include <map>
#include <string>
#include <vector>

namespace ssmpc {

// Generation metrics over whitespace/lowercase tokenization (the corpus
// convention, applied identically to candidates and references). Scores are
// in [0,1].

// Corpus-level BLEU with uniform weights over orders 1..n and brevity
// penalty. Unsmoothed by default; `smooth` applies add-one to orders >= 2.
double bleu_n(const std::vector<std::string>& candidates,
              const std::vector<std::string>& references, int n, bool smooth = false);

// Mean per-pair LCS F1 (beta = 1).
double rouge_l(const std::vector<std::string>& candidates,
               const std::vector<std::string>& references);

// Exact-match unigram METEOR: harmonic mean weighted 9:1 toward recall,
// fragmentation penalty 0.5 * (chunks/matches)^3, averaged over pairs.
// No stemming or synonym tables.
double meteor_lite(const std::vector<std::string>& candidates,
                   const std::vector<std::string>& references);

double precision_at_1(const std::vector<int>& predictions, const std::vector<int>& gold);

struct EvalReport {
  // metric name -> score in [0,1]; rendered as percentages
  std::vector<std::pair<std::string, double>> scores;
  int pair_count = 0;

  void add(const std::string& name, double score) { scores.emplace_back(name, score); }
  std::string render_table() const;
  std::string to_json_records() const;  // one {"metric":...,"score":...} per line
};

EvalReport evaluate_generation(const std::vector<std::string>& candidates,
                               const std::vector<std::string>& references);

}  // namespace ssmpc
