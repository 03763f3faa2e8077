#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "helpers.hpp"
#include "ssmpc/losses.hpp"
#include "ssmpc/structuralizer.hpp"
#include "ssmpc/vocab.hpp"

using namespace ssmpc;
using Mat = ModelT<double>::Mat;

TEST_CASE("uniform logits cost ln(V) per supervised position") {
  const Mat logits = Mat::Zero(3, 50);
  const std::vector<std::pair<long, int>> targets = {{0, 5}, {1, 0}, {2, 49}};
  Mat dlogits = Mat::Zero(3, 50);
  const LossStats stats = cross_entropy_rows<double>(logits, targets, &dlogits);
  CHECK(stats.count == 3);
  CHECK(stats.loss_sum == doctest::Approx(3.0 * std::log(50.0)).epsilon(1e-12));
  CHECK(stats.mean() == doctest::Approx(std::log(50.0)).epsilon(1e-12));
  // softmax - onehot: 1/50 everywhere, minus 1 at each target.
  CHECK(dlogits(0, 1) == doctest::Approx(1.0 / 50.0).epsilon(1e-12));
  CHECK(dlogits(0, 5) == doctest::Approx(1.0 / 50.0 - 1.0).epsilon(1e-12));
  CHECK(dlogits(1, 0) == doctest::Approx(1.0 / 50.0 - 1.0).epsilon(1e-12));
}

TEST_CASE("a confident correct logit costs nearly nothing") {
  Mat logits = Mat::Zero(1, 50);
  logits(0, 7) = 60.0;
  const LossStats stats = cross_entropy_rows<double>(logits, {{0, 7}}, nullptr);
  CHECK(stats.loss_sum <= 1e-6);
  CHECK(stats.correct == 1);
}

TEST_CASE("cross entropy matches a naive softmax computed by hand") {
  Mat logits(2, 3);
  logits << 0.3, -0.2, 1.1,  //
      0.5, 0.5, -0.4;
  const std::vector<std::pair<long, int>> targets = {{0, 0}, {1, 2}};
  Mat dlogits = Mat::Zero(2, 3);
  const LossStats stats = cross_entropy_rows<double>(logits, targets, &dlogits);

  double want = 0.0;
  for (const auto& [row, tgt] : targets) {
    double denom = 0.0;
    for (int j = 0; j < 3; ++j) denom += std::exp(logits(row, j));
    want += -std::log(std::exp(logits(row, tgt)) / denom);
  }
  CHECK(stats.loss_sum == doctest::Approx(want).epsilon(1e-12));
  CHECK(stats.correct == 0);  // argmax is column 2 then column 0/1

  // d(loss)/d(logit) by central differences.
  for (long r = 0; r < 2; ++r) {
    for (int c = 0; c < 3; ++c) {
      Mat up = logits, down = logits;
      up(r, c) += 1e-6;
      down(r, c) -= 1e-6;
      const double fd = (cross_entropy_rows<double>(up, targets, nullptr).loss_sum -
                         cross_entropy_rows<double>(down, targets, nullptr).loss_sum) /
                        2e-6;
      CHECK(dlogits(r, c) == doctest::Approx(fd).epsilon(1e-6));
    }
  }
}

TEST_CASE("targets outside the logits are rejected") {
  const Mat logits = Mat::Zero(2, 4);
  CHECK_THROWS_AS(cross_entropy_rows<double>(logits, {{2, 0}}, nullptr), std::invalid_argument);
  CHECK_THROWS_AS(cross_entropy_rows<double>(logits, {{0, 4}}, nullptr), std::invalid_argument);
  CHECK_THROWS_AS(cross_entropy_rows<double>(logits, {{0, -1}}, nullptr), std::invalid_argument);
}

TEST_CASE("loss statistics accumulate") {
  LossStats a{2.0, 2, 1};
  const LossStats b{4.0, 2, 2};
  a += b;
  CHECK(a.loss_sum == 6.0);
  CHECK(a.count == 4);
  CHECK(a.correct == 3);
  CHECK(a.mean() == doctest::Approx(1.5));
  CHECK(LossStats{}.mean() == 0.0);
}

TEST_CASE("masked-recovery supervision covers masks and utterance tokens") {
  const Vocab v = test_helpers::tiny_vocab();
  const Dialogue d = test_helpers::four_word_dialogue();
  const SequenceInput full = structuralize_dialogue(d, response_structure_of(d), v);
  MaskSpec spec;
  spec.p = 1.0;
  spec.seed = 4;
  const SequenceInput masked = apply_masking(full, spec, v);
  REQUIRE(masked.mask_targets.size() == 8);  // reply-structure slots of 3 utterances + response

  SUBCASE("masked originals plus utterance identity") {
    const auto targets = post_train_targets(masked, false);
    CHECK(targets.size() == 14);  // 8 masked + 6 utterance tokens
    // Each masked position is supervised with its pre-mask token.
    for (const auto& mt : masked.mask_targets) {
      REQUIRE(mt.original.has_value());
      const auto it = std::find_if(targets.begin(), targets.end(),
                                   [&](const auto& t) { return t.first == mt.position; });
      REQUIRE(it != targets.end());
      CHECK(it->second == *mt.original);
      CHECK(it->second != masked.ids[mt.position]);
    }
    // Utterance tokens are supervised as themselves.
    for (const auto& [row, tgt] : targets) {
      if (masked.roles[row] == Role::kUtt) CHECK(tgt == masked.ids[row]);
    }
  }

  SUBCASE("all-positions supervision covers every slot exactly once") {
    const auto targets = post_train_targets(masked, true);
    REQUIRE(static_cast<int>(targets.size()) == masked.length());
    std::vector<long> rows;
    for (const auto& t : targets) rows.push_back(t.first);
    std::sort(rows.begin(), rows.end());
    for (int i = 0; i < masked.length(); ++i) CHECK(rows[i] == i);
  }
}

TEST_CASE("response slots with no gold value are never supervised") {
  const Vocab v = test_helpers::tiny_vocab();
  Dialogue d = test_helpers::four_word_dialogue();
  ResponseStructure rs;
  rs.speaker = 2;  // target and addressee unknown
  const SequenceInput seq = structuralize_dialogue(d, rs, v);
  REQUIRE(seq.mask_targets.size() == 2);
  for (const auto& mt : seq.mask_targets) CHECK_FALSE(mt.original.has_value());

  const auto plain = post_train_targets(seq, false);
  CHECK(plain.size() == 6);  // utterance tokens only
  const auto all = post_train_targets(seq, true);
  CHECK(static_cast<int>(all.size()) == seq.length() - 2);
  for (const auto& [row, tgt] : all) {
    for (const auto& mt : seq.mask_targets) CHECK(row != mt.position);
  }
}

TEST_CASE("a sequence with nothing to supervise is an error") {
  const Vocab v = test_helpers::tiny_vocab();
  Dialogue d;
  d.speaker_labels = {"x"};
  d.utterances.push_back(test_helpers::utt(1, 1, std::nullopt, std::nullopt, ""));
  const SequenceInput seq = structuralize_dialogue(d, ResponseStructure{}, v);
  CHECK_THROWS_AS(post_train_targets(seq, false), std::invalid_argument);
  CHECK_NOTHROW(post_train_targets(seq, true));  // visible structure still supervises
}

TEST_CASE("a zeroed model scores ln(V) on both objectives") {
  const Vocab v = test_helpers::tiny_vocab();
  ModelT<float> model(test_helpers::tiny_config(v.size()));
  model.params.set_zero();
  const Dialogue d = test_helpers::four_word_dialogue();
  const SequenceInput full = structuralize_dialogue(d, response_structure_of(d), v);

  const LossStats post = post_train_example<float>(model, full, false, nullptr);
  CHECK(post.mean() == doctest::Approx(std::log(20.0)).epsilon(1e-6));

  const std::vector<int> response_ids = v.encode_tokens(d.response->tokens);
  const LossStats fine = fine_tune_example<float>(model, full.ids, response_ids, nullptr);
  CHECK(fine.mean() == doctest::Approx(std::log(20.0)).epsilon(1e-6));
}

TEST_CASE("teacher forcing supervises each response token plus the end marker") {
  const Vocab v = test_helpers::tiny_vocab();
  ModelT<float> model(test_helpers::tiny_config(v.size()));
  const std::vector<int> context = {4, 5, 6};

  const LossStats two = fine_tune_example<float>(model, context, {4, 5}, nullptr);
  CHECK(two.count == 3);  // "aa", "dd", EOS

  // An empty response still supervises exactly one position: emitting EOS.
  const LossStats empty = fine_tune_example<float>(model, context, {}, nullptr);
  CHECK(empty.count == 1);
  CHECK(std::isfinite(empty.loss_sum));
}
