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
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "gtest/gtest.h"
#include "jsaspg/model.hpp"
#include "jsaspg/optimizer.hpp"

namespace jsaspg {
namespace {

std::vector<std::string> Names(int n, const std::string& prefix) {
  std::vector<std::string> out;
  for (int i = 0; i < n; ++i) out.push_back(prefix + std::to_string(i));
  return out;
}

CtcModel FrameModel(int D, int A, int radius, int hidden) {
  ModelShape s;
  s.mode = InputMode::kFrames;
  s.input_dim = D;
  s.embed_dim = 0;
  s.radius = radius;
  s.hidden = hidden;
  s.output_symbols = A;
  return CtcModel(ModelRole::kS2P, s, {}, Names(A, "p"));
}

CtcModel SymbolModel(ModelRole role, int A_in, int A, int radius, int hidden, int up) {
  ModelShape s;
  s.mode = InputMode::kSymbols;
  s.input_dim = A_in;
  s.embed_dim = 5;
  s.radius = radius;
  s.hidden = hidden;
  s.output_symbols = A;
  s.upsample = up;
  return CtcModel(role, s, Names(A_in, "i"), Names(A, "o"));
}

Matrix RandomFrames(int T, int D, Rng& rng) {
  Matrix x(T, D);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = Gaussian(rng);
  return x;
}

std::string TempPath(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

TEST(CtcModel, ZeroWeightsGiveUniformRows) {
  const CtcModel m = FrameModel(3, 4, 1, 6);
  Rng rng(1);
  const LogitLattice lat = m.Forward(RandomFrames(5, 3, rng));
  for (int t = 0; t < 5; ++t) {
    for (int k = 0; k < 5; ++k) EXPECT_NEAR(lat.values(t, k), std::log(0.2), 1e-12);
  }
}

TEST(CtcModel, RowsNormalizedAndDeterministic) {
  Rng rng(2);
  CtcModel m = FrameModel(4, 3, 2, 8);
  m.InitRandom(rng);
  const Matrix x = RandomFrames(9, 4, rng);
  const LogitLattice a = m.Forward(x), b = m.Forward(x);
  EXPECT_EQ(a.values, b.values);
  for (int t = 0; t < a.frames(); ++t) {
    EXPECT_NEAR(a.values.row(t).array().exp().sum(), 1.0, 1e-9);
  }
}

TEST(CtcModel, OutputIsLocalToTheWindow) {
  Rng rng(3);
  const int r = 2;
  CtcModel m = FrameModel(3, 3, r, 8);
  m.InitRandom(rng);
  Matrix x = RandomFrames(12, 3, rng);
  const LogitLattice before = m.Forward(x);
  const int t = 3;
  x.row(t + r + 1).array() += 5.0;
  const LogitLattice after = m.Forward(x);
  EXPECT_EQ(before.values.row(t), after.values.row(t));
  EXPECT_NE(before.values.row(t + 1), after.values.row(t + 1));
}

TEST(CtcModel, SymbolModeUpsamplesAndValidatesInput) {
  Rng rng(4);
  CtcModel m = SymbolModel(ModelRole::kP2G, 4, 3, 1, 6, 3);
  m.InitRandom(rng);
  EXPECT_EQ(m.Forward(Labels{1, 2}).frames(), 6);
  EXPECT_EQ(m.OutputFrames(5), 15);
  EXPECT_THROW(m.Forward(Labels{0}), DataError);
  EXPECT_THROW(m.Forward(Labels{5}), DataError);
  EXPECT_THROW(m.Forward(Matrix::Zero(2, 4)), ConfigError);
  CtcModel f = FrameModel(3, 2, 1, 4);
  EXPECT_THROW(f.Forward(Matrix::Zero(2, 4)), DataError);
}

double Loss(const CtcModel& m, const Matrix* x, const Labels* in, const Labels& target) {
  const LogitLattice lat = x ? m.Forward(*x) : m.Forward(*in);
  return -CtcLogProb(lat, target);
}

void CheckGradient(CtcModel& m, const Matrix* x, const Labels* in, const Labels& target,
                   Rng& rng) {
  ForwardCache cache;
  const LogitLattice lat = x ? m.Forward(*x, &cache) : m.Forward(*in, &cache);
  const CtcParams g = m.Backward(cache, CtcGrad(lat, target));
  CtcParams gc = g;
  const Eigen::Index n = m.params().Size();
  const double eps = 1e-5;
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::Index i = UniformInt(rng, 0, static_cast<int>(n) - 1);
    if (m.params().embed.size() && i < m.params().embed.cols()) {
      i += m.params().embed.cols();  // row 0 of the embedding is never used
    }
    double& p = m.params().At(i);
    const double keep = p;
    p = keep + eps;
    const double up = Loss(m, x, in, target);
    p = keep - eps;
    const double down = Loss(m, x, in, target);
    p = keep;
    const double fd = (up - down) / (2 * eps);
    const double an = gc.At(i);
    EXPECT_LT(std::abs(fd - an), 1e-3 * std::max(1e-2, std::abs(fd)))
        << "param " << i << " fd=" << fd << " analytic=" << an;
  }
}

TEST(CtcModel, FiniteDifferencesForEveryRole) {
  Rng rng(5);
  {
    CtcModel s2p = FrameModel(3, 3, 2, 7);
    s2p.InitRandom(rng);
    const Matrix x = RandomFrames(8, 3, rng);
    CheckGradient(s2p, &x, nullptr, {1, 2, 2, 3}, rng);
  }
  {
    CtcModel p2g = SymbolModel(ModelRole::kP2G, 3, 4, 1, 6, 2);
    p2g.InitRandom(rng);
    const Labels h{1, 3, 2};
    CheckGradient(p2g, nullptr, &h, {4, 1, 1}, rng);
  }
  {
    CtcModel g2p = SymbolModel(ModelRole::kG2P, 4, 3, 2, 5, 2);
    g2p.InitRandom(rng);
    const Labels y{2, 4, 4, 1};
    CheckGradient(g2p, nullptr, &y, {3, 1}, rng);
  }
}

TEST(CtcModel, ZeroUpstreamAndUnusedEmbeddingRows) {
  Rng rng(6);
  CtcModel m = SymbolModel(ModelRole::kG2P, 5, 3, 1, 6, 2);
  m.InitRandom(rng);
  ForwardCache cache;
  const LogitLattice lat = m.Forward(Labels{1, 3, 3}, &cache);
  const CtcParams zero = m.Backward(cache, Matrix::Zero(lat.frames(), 4));
  zero.ForEachBlock([](const double* d, Eigen::Index n) {
    for (Eigen::Index i = 0; i < n; ++i) EXPECT_EQ(d[i], 0.0);
  });
  const CtcParams g = m.Backward(cache, CtcGrad(lat, {2, 1}));
  for (int unused : {0, 2, 4, 5}) EXPECT_EQ(g.embed.row(unused).norm(), 0.0);
  EXPECT_GT(g.embed.row(3).norm(), 0.0);
  EXPECT_THROW(m.Backward(cache, Matrix::Zero(lat.frames(), 3)), DataError);
}

TEST(CtcModel, CheckpointRoundTripIsBitwise) {
  Rng rng(7);
  CtcModel m = SymbolModel(ModelRole::kP2G, 4, 3, 2, 6, 2);
  m.InitRandom(rng);
  const std::string path = TempPath("jsaspg_model_rt.ckpt");
  m.Save(path, "meta-string");
  std::string meta;
  const CtcModel back = CtcModel::Load(path, &meta);
  EXPECT_EQ(meta, "meta-string");
  EXPECT_EQ(back.role(), ModelRole::kP2G);
  EXPECT_TRUE(back.shape() == m.shape());
  EXPECT_EQ(back.input_symbols(), m.input_symbols());
  EXPECT_EQ(back.output_symbols(), m.output_symbols());
  const Labels in{1, 4, 2};
  EXPECT_EQ(back.Forward(in).values, m.Forward(in).values);
  std::filesystem::remove(path);
}

TEST(CtcModel, CorruptedCheckpointsRejected) {
  Rng rng(8);
  CtcModel m = FrameModel(2, 2, 1, 3);
  m.InitRandom(rng);
  const std::string path = TempPath("jsaspg_model_bad.ckpt");
  m.Save(path);
  std::string bytes;
  {
    std::ifstream is(path, std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(is), {});
  }
  auto write = [&](const std::string& b) {
    std::ofstream os(path, std::ios::binary);
    os.write(b.data(), static_cast<std::streamsize>(b.size()));
  };
  std::string bad = bytes;
  bad[0] = 'X';
  write(bad);
  EXPECT_THROW(CtcModel::Load(path), DataError);
  bad = bytes;
  bad[8] = 9;  // version
  write(bad);
  EXPECT_THROW(CtcModel::Load(path), DataError);
  bad = bytes;
  bad[20] = '\x7f';  // inside the shape fields
  bad[21] = '\x7f';
  bad[22] = '\x7f';
  write(bad);
  EXPECT_THROW(CtcModel::Load(path), DataError);
  write(bytes.substr(0, bytes.size() - 3));
  EXPECT_THROW(CtcModel::Load(path), DataError);
  EXPECT_THROW(CtcModel::Load(path + ".missing"), DataError);
  std::filesystem::remove(path);
}

TEST(AverageModels, IdenticalCopiesAreIdentity) {
  Rng rng(9);
  CtcModel m = SymbolModel(ModelRole::kG2P, 3, 3, 1, 4, 2);
  m.InitRandom(rng);
  const CtcModel avg = AverageModels({m, m, m});
  EXPECT_EQ(avg.params().w1, m.params().w1);
  EXPECT_EQ(avg.params().embed, m.params().embed);
  EXPECT_EQ(avg.params().b2, m.params().b2);
  CtcModel other = FrameModel(2, 2, 1, 3);
  EXPECT_THROW(AverageModels({m, other}), DataError);
}

TEST(Adam, ZeroGradientLeavesParameters) {
  Rng rng(10);
  CtcModel m = FrameModel(2, 2, 1, 3);
  m.InitRandom(rng);
  const CtcParams before = m.params();
  AdamOptimizer opt(m.shape(), AdamConfig{});
  for (int i = 0; i < 5; ++i) opt.Step(m.params(), CtcParams::Zeros(m.shape()));
  EXPECT_EQ(m.params().w1, before.w1);
  EXPECT_EQ(m.params().b2, before.b2);
}

TEST(Adam, NonFiniteGradientRejected) {
  CtcModel m = FrameModel(2, 2, 1, 3);
  AdamOptimizer opt(m.shape(), AdamConfig{});
  CtcParams g = CtcParams::Zeros(m.shape());
  g.w1(0, 0) = std::nan("");
  EXPECT_THROW(opt.Step(m.params(), g), NumericError);
}

TEST(Adam, PlateauHalvesAfterPatienceAndStopsAtMinimum) {
  AdamConfig cfg;
  cfg.learning_rate = 1e-3;
  cfg.min_learning_rate = 2e-4;
  CtcModel m = FrameModel(2, 2, 1, 3);
  AdamOptimizer opt(m.shape(), cfg);
  EXPECT_FALSE(opt.ReportValidation(1.0));
  for (int e = 0; e < 9; ++e) EXPECT_FALSE(opt.ReportValidation(1.0));
  EXPECT_TRUE(opt.ReportValidation(1.0));  // tenth epoch without improvement
  EXPECT_DOUBLE_EQ(opt.learning_rate(), 5e-4);
  EXPECT_FALSE(opt.ReportValidation(0.5));  // improvement resets the counter
  for (int e = 0; e < 40; ++e) opt.ReportValidation(0.9);
  EXPECT_DOUBLE_EQ(opt.learning_rate(), 2e-4);
  EXPECT_GE(opt.learning_rate(), cfg.min_learning_rate);
}

TEST(Adam, QuadraticBowlConverges) {
  Rng rng(11);
  CtcModel m = FrameModel(2, 2, 0, 3);
  CtcParams target = CtcParams::Zeros(m.shape());
  target.ForEachBlock([&](double* d, Eigen::Index n) {
    for (Eigen::Index i = 0; i < n; ++i) d[i] = RoundToFloat(Gaussian(rng));
  });
  AdamConfig cfg;
  cfg.learning_rate = 0.05;
  AdamOptimizer opt(m.shape(), cfg);
  for (int step = 0; step < 1000; ++step) {
    CtcParams g = m.params();
    CtcParams neg = target;
    neg *= -1.0;
    g += neg;  // gradient of 0.5 * |p - target|^2
    opt.Step(m.params(), g);
  }
  double worst = 0.0;
  for (Eigen::Index i = 0; i < target.Size(); ++i) {
    worst = std::max(worst, std::abs(m.params().At(i) - target.At(i)));
  }
  EXPECT_LT(worst, 1e-4);
}

TEST(Adam, ClippingEqualsRescaledGradient) {
  CtcModel a = FrameModel(2, 2, 0, 3), b = a;
  AdamConfig clip;
  clip.clip_norm = 0.5;
  AdamOptimizer oa(a.shape(), clip), ob(b.shape(), AdamConfig{});
  Rng rng(12);
  for (int step = 0; step < 5; ++step) {
    CtcParams g = CtcParams::Zeros(a.shape());
    double sq = 0.0;
    g.ForEachBlock([&](double* d, Eigen::Index n) {
      for (Eigen::Index i = 0; i < n; ++i) {
        d[i] = 10.0 * Gaussian(rng);
        sq += d[i] * d[i];
      }
    });
    oa.Step(a.params(), g);
    g *= 0.5 / std::sqrt(sq);
    ob.Step(b.params(), g);
    EXPECT_EQ(a.params().w1, b.params().w1);
    EXPECT_EQ(a.params().b2, b.params().b2);
  }
}

}  // namespace
}  // namespace jsaspg
