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

#include <algorithm>
#include <cmath>
#include <sstream>

#include "gtest/gtest.h"
#include "jsaspg/beam_search.hpp"

namespace jsaspg {
namespace {

LogitLattice RandomLattice(int T, int A, Rng& rng, double scale = 1.5) {
  Matrix m(T, A + 1);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * Gaussian(rng);
  return LogSoftmaxRows(m);
}

int FullBeam(int T, int A) {
  return static_cast<int>(std::pow(A + 1, T)) + 1;
}

TEST(BeamNbest, TwoFrameUniformGreedyPrefix) {
  const LogitLattice lat = LogSoftmaxRows(Matrix::Zero(2, 2));
  const auto hyps = BeamNbest(lat, 1, 1);
  ASSERT_EQ(hyps.size(), 1u);
  EXPECT_EQ(hyps[0].seq, Labels{1});
  EXPECT_NEAR(hyps[0].score, std::log(0.75), 1e-12);
}

TEST(BeamNbest, ArgumentChecks) {
  const LogitLattice lat = LogSoftmaxRows(Matrix::Zero(2, 2));
  EXPECT_THROW(BeamNbest(lat, 0, 1), ConfigError);
  EXPECT_THROW(BeamNbest(lat, 2, 3), ConfigError);
  EXPECT_THROW(BeamNbest(lat, 2, 0), ConfigError);
}

TEST(BeamNbest, FullBeamEqualsEnumerationTopN) {
  Rng rng(21);
  for (int trial = 0; trial < 40; ++trial) {
    const int A = UniformInt(rng, 1, 3), T = UniformInt(rng, 1, 5);
    const LogitLattice lat = RandomLattice(T, A, rng);
    const auto dist = EnumerateLabelDist(lat);
    std::vector<std::pair<double, Labels>> ranked;
    for (const auto& [h, p] : dist) ranked.emplace_back(std::log(p), h);
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second > b.second;
    });
    const int n = std::min<int>(5, static_cast<int>(ranked.size()));
    const auto hyps = BeamNbest(lat, FullBeam(T, A), n);
    ASSERT_EQ(static_cast<int>(hyps.size()), n);
    for (int i = 0; i < n; ++i) {
      EXPECT_NEAR(hyps[i].score, ranked[i].first, 1e-8);
      EXPECT_LE(hyps[i].score, 0.0);
      if (i + 1 < n && std::abs(ranked[i].first - ranked[i + 1].first) > 1e-9) {
        EXPECT_EQ(hyps[i].seq, ranked[i].second);
      }
    }
  }
}

class FusionTest : public ::testing::Test {
 protected:
  FusionTest()
      : graphemes_(AlphabetKind::kGrapheme, {"a", "b", "_"}),
        lm_(NGramLM::Train({{"ab", "b"}, {"a"}, {"ab"}, {"ba", "a"}}, 2)) {}
  Alphabet graphemes_;
  NGramLM lm_;
};

TEST_F(FusionTest, ZeroWeightMatchesNoLm) {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const LogitLattice lat = RandomLattice(6, 3, rng);
    WordFusion zero(lm_, graphemes_, 3, 0.0);
    const auto a = BeamNbest(lat, 8, 4);
    const auto b = BeamNbest(lat, 8, 4, &zero);
    ASSERT_EQ(a.size(), b.size());
    for (size_t i = 0; i < a.size(); ++i) {
      EXPECT_EQ(a[i].seq, b[i].seq);
      EXPECT_EQ(a[i].score, b[i].score);
      EXPECT_EQ(a[i].combined, b[i].combined);
    }
  }
}

TEST_F(FusionTest, FullBeamFindsEnumeratedFusedArgmax) {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const int T = UniformInt(rng, 2, 5);
    const LogitLattice lat = RandomLattice(T, 3, rng);
    const double lambda = 0.7, bonus = 0.3;
    WordFusion fusion(lm_, graphemes_, 3, lambda, bonus);
    double best = kNegInf;
    Labels arg;
    for (const auto& [y, p] : EnumerateLabelDist(lat)) {
      // Independent scoring: words from the rendered string.
      std::vector<std::string> words;
      std::string cur;
      for (int g : y) {
        if (g == 3) {
          if (!cur.empty()) words.push_back(cur);
          cur.clear();
        } else {
          cur += graphemes_.Symbol(g);
        }
      }
      if (!cur.empty()) words.push_back(cur);
      const double s = std::log(p) + lambda * lm_.LogProb(words) + bonus * words.size();
      if (s > best || (s == best && y > arg)) {
        best = s;
        arg = y;
      }
    }
    const auto hyps = BeamNbest(lat, FullBeam(T, 3), 1, &fusion);
    ASSERT_EQ(hyps.size(), 1u);
    EXPECT_EQ(hyps[0].seq, arg);
    EXPECT_NEAR(hyps[0].combined, best, 1e-9);
  }
}

TEST_F(FusionTest, FusionScoreMatchesSentenceScore) {
  WordFusion f(lm_, graphemes_, 3, 1.0);
  EXPECT_NEAR(f.Score({1, 2, 3, 3, 2}), lm_.LogProb({"ab", "b"}), 1e-12);
  EXPECT_NEAR(f.Score({}), lm_.LogProb({}), 1e-12);
  EXPECT_EQ(f.CountWords({3, 1, 3}), 1);
}

TEST(DumpNbest, OneJsonObjectPerHypothesis) {
  Rng rng(1);
  const auto hyps = BeamNbest(RandomLattice(4, 2, rng), 4, 3);
  std::stringstream ss;
  DumpNbest(ss, "u1", hyps);
  std::string line;
  int rank = 0;
  while (std::getline(ss, line)) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_EQ(j["id"], "u1");
    EXPECT_EQ(j["rank"], rank);
    EXPECT_EQ(j["seq"].get<Labels>(), hyps[rank].seq);
    ++rank;
  }
  EXPECT_EQ(rank, static_cast<int>(hyps.size()));
}

}  // namespace
}  // namespace jsaspg
