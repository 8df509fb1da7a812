// Copyright (c) 2026 The jsaspg Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <map>

#include "gtest/gtest.h"
#include "test_util.hpp"

namespace jsaspg {
namespace {

using namespace testing_util;

TinySpec DecodeSpec() {
  TinySpec t;
  t.graphemes = 3;  // g0 g1 _
  t.p2g_upsample = 2;
  t.g2p_upsample = 3;
  t.scale = 1.5;
  return t;
}

NGramLM SmallLm() {
  return NGramLM::Train({{"g0", "g1"}, {"g1"}, {"g0g1"}, {"g1", "g1"}}, 2);
}

// Exact log p(y|x) restricted to the h that q(.|y) can produce.
double CoveredLogMarginal(const SpgSystem& sys, const Matrix& x, const Labels& y) {
  const auto q = BruteForce(sys.g2p.Forward(y));
  double z = 0.0;
  for (const auto& [h, ph] : BruteForce(sys.s2p.Forward(x))) {
    if (!q.count(h) || q.at(h) == 0.0) continue;
    const auto p2g = BruteForce(sys.p2g.Forward(h));
    if (p2g.count(y)) z += ph * p2g.at(y);
  }
  return z > 0.0 ? std::log(z) : kNegInf;
}

TEST(DecodeModes, Names) {
  for (DecodeMode m : {DecodeMode::kWithoutLm, DecodeMode::kWithLm, DecodeMode::kMls}) {
    EXPECT_EQ(ModeFromName(ModeName(m)), m);
  }
  EXPECT_THROW(ModeFromName("greedy"), ConfigError);
}

TEST(MarginalScore, ExhaustiveEqualsEnumeration) {
  Rng rng(1);
  for (int trial = 0; trial < 10; ++trial) {
    const SpgSystem sys = TinySystem(DecodeSpec(), rng);
    const Matrix x = RandomFrames(3, 2, rng);
    DecodeConfig cfg;
    cfg.proposal = ProposalMode::kExhaustive;
    const LogitLattice s2p = sys.s2p.Forward(x);
    for (const Labels& y : {Labels{1}, Labels{1, 2}, Labels{2, 3, 1}}) {
      const double want = CoveredLogMarginal(sys, x, y);
      const double got = MarginalScore(sys, s2p, y, cfg, rng);
      if (want == kNegInf) {
        EXPECT_EQ(got, kNegInf);
      } else {
        EXPECT_NEAR(got, want, 1e-9);
      }
    }
  }
}

TEST(MarginalScore, ExhaustiveMatchesExactDecodeMarginals) {
  // With |h| <= 3 and 3 frames per grapheme, q covers every h for |y| >= 2.
  Rng rng(2);
  const SpgSystem sys = TinySystem(DecodeSpec(), rng);
  const Matrix x = RandomFrames(3, 2, rng);
  std::map<Labels, double> marginals;
  ExactDecode(sys, x, nullptr, 0.0, 2e6, &marginals);
  DecodeConfig cfg;
  cfg.proposal = ProposalMode::kExhaustive;
  const LogitLattice s2p = sys.s2p.Forward(x);
  int checked = 0;
  for (const auto& [y, p] : marginals) {
    if (y.size() < 2 || y.size() > 3 || p <= 0.0) continue;
    EXPECT_NEAR(MarginalScore(sys, s2p, y, cfg, rng), std::log(p), 1e-9);
    ++checked;
  }
  EXPECT_GT(checked, 10);
}

TEST(MarginalScore, SampledEstimateIsUnbiasedInProbability) {
  Rng rng(3);
  const SpgSystem sys = TinySystem(DecodeSpec(), rng);
  const Matrix x = RandomFrames(3, 2, rng);
  const Labels y{1, 3, 2};
  const double want = std::exp(CoveredLogMarginal(sys, x, y));
  DecodeConfig cfg;
  cfg.k = 4;
  cfg.normalized_mean = true;
  const LogitLattice s2p = sys.s2p.Forward(x);
  const int n = 20000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double v = std::exp(MarginalScore(sys, s2p, y, cfg, rng));
    sum += v;
    sq += v * v;
  }
  const double mean = sum / n;
  const double se = std::sqrt((sq / n - mean * mean) / n);
  EXPECT_LE(std::abs(mean - want), 3 * se);
}

TEST(VanillaDecode, TwoStageArgmax) {
  Rng rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    const SpgSystem sys = TinySystem(DecodeSpec(), rng);
    const Matrix x = RandomFrames(3, 2, rng);
    DecodeConfig cfg;
    cfg.beam = 64;
    const DecodeResult r = VanillaDecode(sys, x, cfg, false);
    auto argmax = [](const std::map<Labels, double>& d) {
      Labels best;
      double bp = -1.0;
      for (const auto& [s, p] : d) {
        if (p > bp || (p == bp && s > best)) best = s, bp = p;
      }
      return best;
    };
    const Labels h = argmax(BruteForce(sys.s2p.Forward(x)));
    EXPECT_EQ(r.h_hat, h);
    if (h.empty()) {
      EXPECT_TRUE(r.empty_phonemes);
      continue;
    }
    const auto py = BruteForce(sys.p2g.Forward(h));
    EXPECT_EQ(r.y, argmax(py));
    EXPECT_NEAR(r.p2g_score, std::log(py.at(r.y)), 1e-9);
  }
}

TEST(VanillaDecode, EmptyPhonemes) {
  Rng rng(5);
  SpgSystem sys = TinySystem(DecodeSpec(), rng);
  MakeBiasOnly(sys.s2p, {5.0, -5.0, -5.0});
  const DecodeResult r = VanillaDecode(sys, RandomFrames(4, 2, rng), DecodeConfig{}, true);
  EXPECT_TRUE(r.empty_phonemes);
  EXPECT_TRUE(r.y.empty());
  Rng mrng(1);
  const DecodeResult m = MlsDecode(sys, RandomFrames(4, 2, rng), DecodeConfig{}, mrng);
  EXPECT_TRUE(m.empty_phonemes);
}

TEST(VanillaDecode, LmChangesTheChoiceOnlyWithFusion) {
  Rng rng(6);
  const NGramLM lm = SmallLm();
  int differ = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const SpgSystem sys = TinySystem(DecodeSpec(), rng);
    const Matrix x = RandomFrames(3, 2, rng);
    DecodeConfig cfg;
    cfg.beam = 64;
    cfg.lm = std::make_shared<NGramLM>(lm);
    cfg.lm_weight = 0.0;
    const DecodeResult a = VanillaDecode(sys, x, cfg, false);
    const DecodeResult b = VanillaDecode(sys, x, cfg, true);
    EXPECT_EQ(a.y, b.y);  // lambda = 0
    cfg.lm_weight = 3.0;
    const DecodeResult c = VanillaDecode(sys, x, cfg, true);
    if (c.y.empty()) continue;
    // c maximizes the fused score over the P2G outputs of h_hat.
    const WordFusion f(lm, *sys.graphemes, sys.separator, 3.0);
    double best = kNegInf;
    for (const auto& [y, p] : BruteForce(sys.p2g.Forward(c.h_hat))) {
      if (p > 0.0) best = std::max(best, std::log(p) + 3.0 * f.Score(y));
    }
    EXPECT_NEAR(c.p2g_score + 3.0 * f.Score(c.y), best, 1e-9);
    differ += a.y != c.y;
  }
  EXPECT_GT(differ, 0);
}

TEST(MlsDecode, ExhaustivePicksBestCandidateByExactMarginal) {
  Rng rng(7);
  const NGramLM lm = SmallLm();
  for (int trial = 0; trial < 10; ++trial) {
    const SpgSystem sys = TinySystem(DecodeSpec(), rng);
    const Matrix x = RandomFrames(3, 2, rng);
    DecodeConfig cfg;
    cfg.beam = 32;
    cfg.nbest = 8;
    cfg.proposal = ProposalMode::kExhaustive;
    cfg.lm = std::make_shared<NGramLM>(lm);
    cfg.lm_weight = trial % 2 ? 0.5 : 0.0;
    Rng drng(trial);
    const DecodeResult r = MlsDecode(sys, x, cfg, drng);
    if (r.empty_phonemes) continue;
    const auto cands = GraphemeNbest(sys, r.h_hat, cfg.nbest, cfg, true);
    const WordFusion f(lm, *sys.graphemes, sys.separator, cfg.lm_weight);
    Labels best;
    double bs = kNegInf;
    for (const auto& c : cands) {
      const double m = CoveredLogMarginal(sys, x, c.seq);
      if (m == kNegInf) continue;
      const double s = m + cfg.lm_weight * f.Score(c.seq);
      if (s > bs || (s == bs && c.seq > best)) best = c.seq, bs = s;
    }
    if (bs == kNegInf) continue;
    EXPECT_EQ(r.y, best);
    EXPECT_NEAR(r.mls_score, CoveredLogMarginal(sys, x, r.y), 1e-9);
  }
}

TEST(MlsDecode, CommonRandomNumbersAreDeterministic) {
  Rng rng(8);
  const SpgSystem sys = TinySystem(DecodeSpec(), rng);
  const Matrix x = RandomFrames(3, 2, rng);
  DecodeConfig cfg;
  cfg.k = 3;
  cfg.common_random_numbers = true;
  Rng a(99), b(99);
  const DecodeResult ra = MlsDecode(sys, x, cfg, a);
  const DecodeResult rb = MlsDecode(sys, x, cfg, b);
  EXPECT_EQ(ra.y, rb.y);
  EXPECT_EQ(ra.mls_score, rb.mls_score);
}

TEST(DecodeReportLine, Fields) {
  Alphabet g(AlphabetKind::kGrapheme, {"a", "b", "_"});
  DecodeResult r;
  r.y = {1, 3, 2};
  r.h_hat = {2};
  r.s2p_score = -1.0;
  const auto j = DecodeReportLine("u1", DecodeMode::kMls, r, g);
  EXPECT_EQ(j["id"], "u1");
  EXPECT_EQ(j["mode"], "mls");
  EXPECT_EQ(j["text"], "a_b");
  EXPECT_EQ(j["hyp_ids"], (Labels{1, 3, 2}));
  EXPECT_TRUE(j["scores"]["mls"].is_null());
  EXPECT_EQ(j["scores"]["s2p"], -1.0);
}

}  // namespace
}  // namespace jsaspg
