#include "ssmpc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>
#include <stdexcept>

#include "ssmpc/corpus.hpp"

namespace ssmpc {

namespace {

using Tokens = std::vector<std::string>;

void require_pairs(const std::vector<std::string>& c, const std::vector<std::string>& r) {
  if (c.size() != r.size()) throw std::invalid_argument("metrics: candidate/reference count mismatch");
  if (c.empty()) throw std::invalid_argument("metrics: empty corpus");
}

std::map<std::string, int> ngram_counts(const Tokens& toks, int k) {
  std::map<std::string, int> counts;
  if (static_cast<int>(toks.size()) < k) return counts;
  for (size_t i = 0; i + k <= toks.size(); ++i) {
    std::string key;
    for (int j = 0; j < k; ++j) {
      key += toks[i + j];
      key += '\x01';
    }
    ++counts[key];
  }
  return counts;
}

int lcs_length(const Tokens& a, const Tokens& b) {
  const size_t la = a.size(), lb = b.size();
  std::vector<int> prev(lb + 1, 0), cur(lb + 1, 0);
  for (size_t i = 1; i <= la; ++i) {
    for (size_t j = 1; j <= lb; ++j) {
      if (a[i - 1] == b[j - 1])
        cur[j] = prev[j - 1] + 1;
      else
        cur[j] = std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[lb];
}

}  // namespace

double bleu_n(const std::vector<std::string>& candidates,
              const std::vector<std::string>& references, int n, bool smooth) {
  require_pairs(candidates, references);
  if (n < 1 || n > 4) throw std::invalid_argument("bleu_n: n must be in 1..4");

  std::vector<long> matches(static_cast<size_t>(n), 0), totals(static_cast<size_t>(n), 0);
  long cand_len = 0, ref_len = 0;
  for (size_t i = 0; i < candidates.size(); ++i) {
    const Tokens c = tokenize_words(candidates[i]);
    const Tokens r = tokenize_words(references[i]);
    cand_len += static_cast<long>(c.size());
    ref_len += static_cast<long>(r.size());
    for (int k = 1; k <= n; ++k) {
      const auto cc = ngram_counts(c, k);
      const auto rc = ngram_counts(r, k);
      for (const auto& [gram, count] : cc) {
        totals[static_cast<size_t>(k - 1)] += count;
        auto it = rc.find(gram);
        if (it != rc.end())
          matches[static_cast<size_t>(k - 1)] += std::min(count, it->second);
      }
    }
  }
  if (cand_len == 0) return 0.0;

  double log_prec_sum = 0.0;
  for (int k = 1; k <= n; ++k) {
    double m = static_cast<double>(matches[static_cast<size_t>(k - 1)]);
    double t = static_cast<double>(totals[static_cast<size_t>(k - 1)]);
    if (smooth && k >= 2) {
      m += 1.0;
      t += 1.0;
    }
    if (m <= 0.0 || t <= 0.0) return 0.0;
    log_prec_sum += std::log(m / t);
  }
  const double bp =
      cand_len >= ref_len ? 1.0 : std::exp(1.0 - static_cast<double>(ref_len) / cand_len);
  return bp * std::exp(log_prec_sum / n);
}

double rouge_l(const std::vector<std::string>& candidates,
               const std::vector<std::string>& references) {
  require_pairs(candidates, references);
  double sum = 0.0;
  for (size_t i = 0; i < candidates.size(); ++i) {
    const Tokens c = tokenize_words(candidates[i]);
    const Tokens r = tokenize_words(references[i]);
    if (c.empty() || r.empty()) continue;
    const int lcs = lcs_length(c, r);
    if (lcs == 0) continue;
    const double p = static_cast<double>(lcs) / static_cast<double>(c.size());
    const double rec = static_cast<double>(lcs) / static_cast<double>(r.size());
    sum += 2.0 * p * rec / (p + rec);
  }
  return sum / static_cast<double>(candidates.size());
}

namespace {

// Greedy exact-match alignment: candidate tokens left to right, preferring
// the reference position that continues the current run.
double meteor_pair(const Tokens& c, const Tokens& r) {
  if (c.empty() || r.empty()) return 0.0;
  std::map<std::string, std::vector<int>> ref_positions;
  for (size_t j = 0; j < r.size(); ++j) ref_positions[r[j]].push_back(static_cast<int>(j));
  std::vector<bool> used(r.size(), false);

  int matches = 0, chunks = 0;
  int last_ci = -2, last_ri = -2;
  for (size_t ci = 0; ci < c.size(); ++ci) {
    auto it = ref_positions.find(c[ci]);
    if (it == ref_positions.end()) continue;
    int chosen = -1;
    for (int rj : it->second) {
      if (!used[static_cast<size_t>(rj)] && rj == last_ri + 1 &&
          static_cast<int>(ci) == last_ci + 1) {
        chosen = rj;
        break;
      }
    }
    if (chosen < 0) {
      for (int rj : it->second) {
        if (!used[static_cast<size_t>(rj)]) {
          chosen = rj;
          break;
        }
      }
    }
    if (chosen < 0) continue;
    used[static_cast<size_t>(chosen)] = true;
    ++matches;
    if (!(static_cast<int>(ci) == last_ci + 1 && chosen == last_ri + 1)) ++chunks;
    last_ci = static_cast<int>(ci);
    last_ri = chosen;
  }
  if (matches == 0) return 0.0;

  const double p = static_cast<double>(matches) / static_cast<double>(c.size());
  const double rec = static_cast<double>(matches) / static_cast<double>(r.size());
  const double fmean = 10.0 * p * rec / (rec + 9.0 * p);
  const double frag = static_cast<double>(chunks) / static_cast<double>(matches);
  const double penalty = 0.5 * frag * frag * frag;
  return fmean * (1.0 - penalty);
}

}  // namespace

double meteor_lite(const std::vector<std::string>& candidates,
                   const std::vector<std::string>& references) {
  require_pairs(candidates, references);
  double sum = 0.0;
  for (size_t i = 0; i < candidates.size(); ++i)
    sum += meteor_pair(tokenize_words(candidates[i]), tokenize_words(references[i]));
  return sum / static_cast<double>(candidates.size());
}

double precision_at_1(const std::vector<int>& predictions, const std::vector<int>& gold) {
  if (predictions.size() != gold.size())
    throw std::invalid_argument("precision_at_1: length mismatch");
  if (predictions.empty()) throw std::invalid_argument("precision_at_1: empty lists");
  long hits = 0;
  for (size_t i = 0; i < predictions.size(); ++i)
    if (predictions[i] == gold[i]) ++hits;
  return static_cast<double>(hits) / static_cast<double>(predictions.size());
}

std::string EvalReport::render_table() const {
  size_t width = 8;
  for (const auto& [name, _] : scores) width = std::max(width, name.size());
  std::ostringstream out;
  out << "pairs evaluated: " << pair_count << "\n";
  for (const auto& [name, score] : scores) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%6.2f", score * 100.0);
    out << name << std::string(width - name.size() + 2, ' ') << buf << "\n";
  }
  return out.str();
}

std::string EvalReport::to_json_records() const {
  std::ostringstream out;
  for (const auto& [name, score] : scores) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", score);
    out << "{\"metric\":\"" << name << "\",\"score\":" << buf << "}\n";
  }
  return out.str();
}

EvalReport evaluate_generation(const std::vector<std::string>& candidates,
                               const std::vector<std::string>& references) {
  EvalReport rep;
  rep.pair_count = static_cast<int>(candidates.size());
  for (int n = 1; n <= 4; ++n)
    rep.add("BLEU-" + std::to_string(n), bleu_n(candidates, references, n));
  rep.add("METEOR", meteor_lite(candidates, references));
  rep.add("ROUGE-L", rouge_l(candidates, references));
  return rep;
}

}  // namespace ssmpc
