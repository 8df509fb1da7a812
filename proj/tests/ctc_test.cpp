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
#include "jsaspg/ctc.hpp"

namespace jsaspg {
namespace {

LogitLattice Uniform(int T, int A) {
  return LogSoftmaxRows(Matrix::Zero(T, A + 1));
}

Matrix RandomLogits(int T, int A, Rng& rng, double scale = 1.5) {
  Matrix m(T, A + 1);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * Gaussian(rng);
  return m;
}

// Counts every path in base (A+1); independent of the library enumerator.
std::map<Labels, double> BruteForce(const LogitLattice& lat) {
  const int T = lat.frames(), K = lat.num_symbols() + 1;
  std::map<Labels, double> out;
  std::vector<int> path(T, 0);
  while (true) {
    double p = 1.0;
    for (int t = 0; t < T; ++t) p *= std::exp(lat.values(t, path[t]));
    out[CollapsePath(path)] += p;
    int t = 0;
    while (t < T && ++path[t] == K) path[t++] = 0;
    if (t == T) break;
  }
  return out;
}

TEST(CtcLogProb, TwoFrameUniformByHand) {
  const LogitLattice lat = Uniform(2, 1);
  EXPECT_NEAR(CtcLogProb(lat, {1}), std::log(0.75), 1e-12);
  EXPECT_EQ(CtcLogProb(lat, {1, 1}), kNegInf);
  EXPECT_NEAR(CtcLogProb(lat, {}), std::log(0.25), 1e-12);
  EXPECT_EQ(CtcLogProb(lat, {1, 1, 1}), kNegInf);
}

TEST(CtcLogProb, RejectsBlankAndOutOfRangeLabels) {
  const LogitLattice lat = Uniform(3, 2);
  EXPECT_THROW(CtcLogProb(lat, {0}), DataError);
  EXPECT_THROW(CtcLogProb(lat, {3}), DataError);
}

TEST(CtcLogProb, NormalizesAndMatchesBruteForce) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const int A = UniformInt(rng, 1, 3), T = UniformInt(rng, 1, 6);
    const LogitLattice lat = LogSoftmaxRows(RandomLogits(T, A, rng));
    const auto dist = BruteForce(lat);
    double total = 0.0;
    for (const auto& [labels, p] : dist) {
      EXPECT_NEAR(std::exp(CtcLogProb(lat, labels)), p, 1e-12);
      total += std::exp(CtcLogProb(lat, labels));
    }
    EXPECT_NEAR(total, 1.0, 1e-8);
  }
}

TEST(CtcForwardBackward, AlphaAndBetaAgree) {
  Rng rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const int A = UniformInt(rng, 1, 4), T = UniformInt(rng, 1, 12);
    const LogitLattice lat = LogSoftmaxRows(RandomLogits(T, A, rng));
    Labels labels(UniformInt(rng, 0, T / 2));
    for (int& l : labels) l = UniformInt(rng, 1, A);
    const FwdBwdTables tb = CtcForwardBackward(lat, labels);
    double from_beta = tb.beta(0, 0);
    if (tb.extended.size() > 1) from_beta = LogAdd(from_beta, tb.beta(1, 0));
    if (tb.log_prob == kNegInf) {
      EXPECT_EQ(from_beta, kNegInf);
      continue;
    }
    EXPECT_NEAR(tb.log_prob, from_beta, 1e-8);
    EXPECT_NEAR(tb.log_prob, CtcLogProb(lat, labels), 1e-9);
  }
}

TEST(CtcGrad, MatchesCentralDifferences) {
  Rng rng(9);
  int checked = 0;
  while (checked < 50) {
    const int A = UniformInt(rng, 1, 3), T = UniformInt(rng, 1, 6);
    Matrix logits = RandomLogits(T, A, rng);
    Labels labels(UniformInt(rng, 0, T));
    for (int& l : labels) l = UniformInt(rng, 1, A);
    if (CtcLogProb(LogSoftmaxRows(logits), labels) == kNegInf) continue;
    const Matrix g = CtcGrad(LogSoftmaxRows(logits), labels);
    const double eps = 1e-4;
    for (Eigen::Index i = 0; i < logits.size(); ++i) {
      Matrix plus = logits, minus = logits;
      plus.data()[i] += eps;
      minus.data()[i] -= eps;
      const double fd = (-CtcLogProb(LogSoftmaxRows(plus), labels) +
                         CtcLogProb(LogSoftmaxRows(minus), labels)) /
                        (2 * eps);
      const double an = g.data()[i];
      EXPECT_LT(std::abs(fd - an), 1e-3 * std::max(1.0, std::abs(fd)))
          << "entry " << i << " fd=" << fd << " analytic=" << an;
    }
    for (int t = 0; t < T; ++t) EXPECT_NEAR(g.row(t).sum(), 0.0, 1e-8);
    ++checked;
  }
}

TEST(CtcGrad, SingleFrameIsCrossEntropy) {
  Matrix logits(1, 3);
  logits << 0.3, -1.0, 2.0;
  const LogitLattice lat = LogSoftmaxRows(logits);
  const Matrix g = CtcGrad(lat, {1});
  for (int k = 0; k < 3; ++k) {
    EXPECT_NEAR(g(0, k), std::exp(lat.values(0, k)) - (k == 1), 1e-12);
  }
}

TEST(CtcGrad, InfeasibleThrows) {
  EXPECT_THROW(CtcGrad(Uniform(2, 1), {1, 1}), NumericError);
}

TEST(SampleLabelSeqs, TwoFrameUniformFrequency) {
  Rng rng(13);
  const auto s = SampleLabelSeqs(Uniform(2, 1), 10000, rng);
  int ones = 0;
  for (const auto& h : s) ones += h == Labels{1};
  EXPECT_NEAR(ones / 10000.0, 0.75, 0.02);
}

TEST(SampleLabelSeqs, DeterministicLatticeAndSeeds) {
  LogitLattice lat;
  lat.values.resize(2, 2);
  lat.values << kNegInf, 0.0, 0.0, kNegInf;
  Rng rng(1);
  for (const auto& h : SampleLabelSeqs(lat, 20, rng)) EXPECT_EQ(h, Labels{1});
  Rng a(42), b(42), c(43);
  const auto sa = SampleLabelSeqs(Uniform(6, 3), 3, a);
  EXPECT_EQ(sa, SampleLabelSeqs(Uniform(6, 3), 3, b));
  EXPECT_EQ(sa.size(), 3u);
  EXPECT_NE(sa, SampleLabelSeqs(Uniform(6, 3), 3, c));
  EXPECT_THROW(SampleLabelSeqs(Uniform(2, 1), 0, a), ConfigError);
}

TEST(SampleLabelSeqs, TotalVariationAgainstEnumeration) {
  Rng rng(17);
  for (int trial = 0; trial < 5; ++trial) {
    const int A = UniformInt(rng, 1, 2), T = UniformInt(rng, 1, 4);
    const LogitLattice lat = LogSoftmaxRows(RandomLogits(T, A, rng));
    const int n = 100000;
    std::map<Labels, double> emp;
    for (const auto& h : SampleLabelSeqs(lat, n, rng)) emp[h] += 1.0 / n;
    const auto exact = BruteForce(lat);
    double tv = 0.0;
    for (const auto& [h, p] : exact) tv += std::abs(p - (emp.count(h) ? emp[h] : 0.0));
    for (const auto& [h, p] : emp) {
      if (!exact.count(h)) tv += p;
    }
    EXPECT_LT(tv / 2, 0.02);
  }
}

TEST(GreedyDecode, ArgmaxThenCollapse) {
  LogitLattice lat;
  lat.values.resize(4, 3);
  lat.values << -2, -0.1, -3,  //
      -2, -0.1, -3,            //
      -0.1, -2, -3,            //
      -3, -2, -0.1;
  EXPECT_EQ(GreedyDecode(lat), (Labels{1, 2}));
  EXPECT_EQ(GreedyDecode(LogSoftmaxRows(Matrix::Constant(3, 3, 0.0))), Labels{});
  lat.values.resize(1, 3);
  lat.values << -3, -0.7, -0.7;
  EXPECT_EQ(GreedyDecode(lat), Labels{1});
}

TEST(EnumerateLabelDist, HandExampleAndCrossCheck) {
  const auto d = EnumerateLabelDist(Uniform(2, 1));
  ASSERT_EQ(d.size(), 2u);
  EXPECT_NEAR(d.at(Labels{}), 0.25, 1e-12);
  EXPECT_NEAR(d.at(Labels{1}), 0.75, 1e-12);
  Rng rng(19);
  const LogitLattice lat = LogSoftmaxRows(RandomLogits(3, 2, rng));
  double total = 0.0;
  for (const auto& [h, p] : EnumerateLabelDist(lat)) {
    EXPECT_NEAR(p, std::exp(CtcLogProb(lat, h)), 1e-9);
    total += p;
  }
  EXPECT_NEAR(total, 1.0, 1e-9);
  EXPECT_THROW(EnumerateLabelDist(Uniform(30, 5)), ConfigError);
}

}  // namespace
}  // namespace jsaspg
