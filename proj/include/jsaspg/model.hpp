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

#ifndef JSASPG_MODEL_HPP_
#define JSASPG_MODEL_HPP_

#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "jsaspg/common.hpp"
#include "jsaspg/ctc.hpp"
#include "jsaspg/seq.hpp"

namespace jsaspg {

enum class InputMode { kFrames = 0, kSymbols = 1 };
enum class ModelRole { kS2P = 0, kP2G = 1, kG2P = 2 };

inline const char* RoleTag(ModelRole r) {
  switch (r) {
    case ModelRole::kS2P: return "s2p";
    case ModelRole::kP2G: return "p2g";
    case ModelRole::kG2P: return "g2p";
  }
  return "?";
}

inline ModelRole RoleFromTag(const std::string& s) {
  if (s == "s2p") return ModelRole::kS2P;
  if (s == "p2g") return ModelRole::kP2G;
  if (s == "g2p") return ModelRole::kG2P;
  throw DataError("unknown model role tag '" + s + "'");
}

struct ModelShape {
  InputMode mode = InputMode::kFrames;
  int input_dim = 0;    // feature dim D (frames) or input alphabet size (symbols)
  int embed_dim = 16;   // symbols only
  int radius = 2;
  int hidden = 64;
  int output_symbols = 0;  // A_out; the lattice has A_out + 1 columns
  int upsample = 1;        // symbols only: output frames per input symbol

  int SlotDim() const {
    return mode == InputMode::kFrames ? input_dim : embed_dim;
  }
  int WindowDim() const { return (2 * radius + 1) * SlotDim(); }
  bool operator==(const ModelShape& o) const {
    return mode == o.mode && input_dim == o.input_dim &&
           embed_dim == o.embed_dim && radius == o.radius &&
           hidden == o.hidden && output_symbols == o.output_symbols &&
           upsample == o.upsample;
  }
};

// Parameter (or gradient) set of one CTC classifier.
struct CtcParams {
  Matrix embed;  // (A_in + 1) x E, row 0 unused
  Matrix w1;     // H x window
  Vector b1;     // H
  Matrix w2;     // (A_out + 1) x H
  Vector b2;     // A_out + 1

  static CtcParams Zeros(const ModelShape& s) {
    CtcParams p;
    if (s.mode == InputMode::kSymbols) {
      p.embed = Matrix::Zero(s.input_dim + 1, s.embed_dim);
    }
    p.w1 = Matrix::Zero(s.hidden, s.WindowDim());
    p.b1 = Vector::Zero(s.hidden);
    p.w2 = Matrix::Zero(s.output_symbols + 1, s.hidden);
    p.b2 = Vector::Zero(s.output_symbols + 1);
    return p;
  }

  // Visits every block in declared order as (data, size).
  template <typename Fn>
  void ForEachBlock(Fn&& fn) {
    fn(embed.data(), embed.size());
    fn(w1.data(), w1.size());
    fn(b1.data(), b1.size());
    fn(w2.data(), w2.size());
    fn(b2.data(), b2.size());
  }
  template <typename Fn>
  void ForEachBlock(Fn&& fn) const {
    fn(embed.data(), embed.size());
    fn(w1.data(), w1.size());
    fn(b1.data(), b1.size());
    fn(w2.data(), w2.size());
    fn(b2.data(), b2.size());
  }

  Eigen::Index Size() const {
    return embed.size() + w1.size() + b1.size() + w2.size() + b2.size();
  }

  CtcParams& operator+=(const CtcParams& o) {
    if (embed.size()) embed += o.embed;
    w1 += o.w1;
    b1 += o.b1;
    w2 += o.w2;
    b2 += o.b2;
    return *this;
  }
  CtcParams& operator*=(double a) {
    embed *= a;
    w1 *= a;
    b1 *= a;
    w2 *= a;
    b2 *= a;
    return *this;
  }

  // Flat element access in declared block order (used by gradient checks).
  double& At(Eigen::Index i) {
    if (i < embed.size()) return embed.data()[i];
    i -= embed.size();
    if (i < w1.size()) return w1.data()[i];
    i -= w1.size();
    if (i < b1.size()) return b1.data()[i];
    i -= b1.size();
    if (i < w2.size()) return w2.data()[i];
    i -= w2.size();
    return b2.data()[i];
  }

  bool AllFinite() const {
    bool ok = true;
    ForEachBlock([&](const double* d, Eigen::Index n) {
      for (Eigen::Index i = 0; i < n && ok; ++i) ok = std::isfinite(d[i]);
    });
    return ok;
  }
};

// Activations kept from a forward pass for the backward pass.
struct ForwardCache {
  Matrix window;  // T x window dim
  Matrix hidden;  // T x H (post tanh)
  std::vector<int> slot_symbols;  // symbols mode: symbol at each input position
};

// Windowed single-hidden-layer frame classifier with CTC outputs.
//   h_t = tanh(W1 [e_{t-r}; ...; e_{t+r}] + b1),  z_t = W2 h_t + b2
// where e_p is the input frame p (frames mode) or the embedding of the symbol
// feeding position p (symbols mode, each symbol repeated `upsample` times).
// Positions outside the input contribute zeros.
class CtcModel {
 public:
  CtcModel() = default;
  CtcModel(ModelRole role, const ModelShape& shape,
           std::vector<std::string> input_symbols,
           std::vector<std::string> output_symbols)
      : role_(role),
        shape_(shape),
        input_symbols_(std::move(input_symbols)),
        output_symbols_(std::move(output_symbols)),
        params_(CtcParams::Zeros(shape)) {
    if (shape.output_symbols != static_cast<int>(output_symbols_.size())) {
      throw ConfigError("output alphabet size does not match model shape");
    }
    if (shape.mode == InputMode::kSymbols &&
        shape.input_dim != static_cast<int>(input_symbols_.size())) {
      throw ConfigError("input alphabet size does not match model shape");
    }
    if (shape.radius < 0 || shape.hidden < 1 || shape.upsample < 1 ||
        shape.input_dim < 1) {
      throw ConfigError("invalid model shape");
    }
  }

  ModelRole role() const { return role_; }
  const ModelShape& shape() const { return shape_; }
  const std::vector<std::string>& input_symbols() const { return input_symbols_; }
  const std::vector<std::string>& output_symbols() const { return output_symbols_; }
  CtcParams& params() { return params_; }
  const CtcParams& params() const { return params_; }

  // Random init; values are rounded to float precision like all stored
  // parameters so checkpoints round-trip bitwise.
  void InitRandom(Rng& rng, double embed_scale = 1.0) {
    const double s1 = 1.0 / std::sqrt(static_cast<double>(shape_.WindowDim()));
    const double s2 = 1.0 / std::sqrt(static_cast<double>(shape_.hidden));
    for (Eigen::Index i = 0; i < params_.embed.size(); ++i) {
      params_.embed.data()[i] = RoundToFloat(embed_scale * Gaussian(rng));
    }
    if (params_.embed.rows()) params_.embed.row(0).setZero();
    for (Eigen::Index i = 0; i < params_.w1.size(); ++i) {
      params_.w1.data()[i] = RoundToFloat(s1 * Gaussian(rng));
    }
    for (Eigen::Index i = 0; i < params_.w2.size(); ++i) {
      params_.w2.data()[i] = RoundToFloat(s2 * Gaussian(rng));
    }
    params_.b1.setZero();
    params_.b2.setZero();
  }

  int OutputFrames(int input_len) const {
    return shape_.mode == InputMode::kSymbols ? input_len * shape_.upsample
                                              : input_len;
  }

  LogitLattice Forward(const Matrix& frames, ForwardCache* cache = nullptr) const {
    if (shape_.mode != InputMode::kFrames) {
      throw ConfigError("frame input given to a symbol-input model");
    }
    if (frames.cols() != shape_.input_dim) {
      throw DataError("frame dimension does not match the model");
    }
    const int T = static_cast<int>(frames.rows());
    const int D = shape_.input_dim, r = shape_.radius;
    ForwardCache local;
    ForwardCache& c = cache ? *cache : local;
    c.window = Matrix::Zero(T, shape_.WindowDim());
    for (int t = 0; t < T; ++t) {
      for (int j = 0; j <= 2 * r; ++j) {
        const int p = t + j - r;
        if (p < 0 || p >= T) continue;
        c.window.block(t, j * D, 1, D) = frames.row(p);
      }
    }
    return Head(c);
  }

  LogitLattice Forward(const Labels& symbols, ForwardCache* cache = nullptr) const {
    if (shape_.mode != InputMode::kSymbols) {
      throw ConfigError("symbol input given to a frame-input model");
    }
    const int E = shape_.embed_dim, r = shape_.radius, up = shape_.upsample;
    const int T = static_cast<int>(symbols.size()) * up;
    ForwardCache local;
    ForwardCache& c = cache ? *cache : local;
    c.slot_symbols.resize(T);
    for (int p = 0; p < T; ++p) {
      const int s = symbols[p / up];
      if (s < 1 || s > shape_.input_dim) {
        throw DataError("input symbol id outside the model alphabet");
      }
      c.slot_symbols[p] = s;
    }
    c.window = Matrix::Zero(T, shape_.WindowDim());
    for (int t = 0; t < T; ++t) {
      for (int j = 0; j <= 2 * r; ++j) {
        const int p = t + j - r;
        if (p < 0 || p >= T) continue;
        c.window.block(t, j * E, 1, E) = params_.embed.row(c.slot_symbols[p]);
      }
    }
    return Head(c);
  }

  // Gradients of a loss given dL/dz (pre-softmax logits, T x (A_out + 1)).
  CtcParams Backward(const ForwardCache& cache, const Matrix& upstream) const {
    CtcParams g = CtcParams::Zeros(shape_);
    AccumulateBackward(cache, upstream, g);
    return g;
  }

  void AccumulateBackward(const ForwardCache& cache, const Matrix& upstream,
                          CtcParams& g) const {
    if (upstream.rows() != cache.hidden.rows() ||
        upstream.cols() != shape_.output_symbols + 1) {
      throw DataError("upstream gradient shape mismatch");
    }
    if (upstream.rows() == 0) return;
    g.w2.noalias() += upstream.transpose() * cache.hidden;
    g.b2 += upstream.colwise().sum().transpose();
    Matrix dpre = upstream * params_.w2;
    dpre.array() *= 1.0 - cache.hidden.array().square();
    g.w1.noalias() += dpre.transpose() * cache.window;
    g.b1 += dpre.colwise().sum().transpose();
    if (shape_.mode == InputMode::kSymbols) {
      const Matrix dwin = dpre * params_.w1;
      const int E = shape_.embed_dim, r = shape_.radius;
      const int T = static_cast<int>(dwin.rows());
      for (int t = 0; t < T; ++t) {
        for (int j = 0; j <= 2 * r; ++j) {
          const int p = t + j - r;
          if (p < 0 || p >= T) continue;
          g.embed.row(cache.slot_symbols[p]) += dwin.block(t, j * E, 1, E);
        }
      }
    }
  }

  // Checkpoint layout (little-endian):
  //   "JSASPGCK" | u32 version | str role | i32 x 7 shape | str meta |
  //   u32 n + n x str input symbols | u32 n + n x str output symbols |
  //   f32 blocks: embed, w1, b1, w2, b2
  // where str is a u32 byte length followed by the bytes.
  static constexpr uint32_t kCheckpointVersion = 1;

  void Save(const std::string& path, const std::string& meta = "") const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot write checkpoint " + path);
    os.write("JSASPGCK", 8);
    PutU32(os, kCheckpointVersion);
    PutStr(os, RoleTag(role_));
    for (int v : {static_cast<int>(shape_.mode), shape_.input_dim,
                  shape_.embed_dim, shape_.radius, shape_.hidden,
                  shape_.output_symbols, shape_.upsample}) {
      PutU32(os, static_cast<uint32_t>(v));
    }
    PutStr(os, meta);
    PutU32(os, static_cast<uint32_t>(input_symbols_.size()));
    for (const auto& s : input_symbols_) PutStr(os, s);
    PutU32(os, static_cast<uint32_t>(output_symbols_.size()));
    for (const auto& s : output_symbols_) PutStr(os, s);
    params_.ForEachBlock([&](const double* d, Eigen::Index n) {
      for (Eigen::Index i = 0; i < n; ++i) {
        const float f = static_cast<float>(d[i]);
        uint32_t bits;
        std::memcpy(&bits, &f, 4);
        PutU32(os, bits);
      }
    });
    if (!os) throw DataError("failed writing checkpoint " + path);
  }

  static CtcModel Load(const std::string& path, std::string* meta = nullptr) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("missing checkpoint " + path);
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, "JSASPGCK", 8) != 0) {
      throw DataError("not a checkpoint (bad magic): " + path);
    }
    if (GetU32(is) != kCheckpointVersion) {
      throw DataError("unsupported checkpoint version: " + path);
    }
    const ModelRole role = RoleFromTag(GetStr(is));
    ModelShape s;
    s.mode = static_cast<InputMode>(GetU32(is));
    s.input_dim = static_cast<int>(GetU32(is));
    s.embed_dim = static_cast<int>(GetU32(is));
    s.radius = static_cast<int>(GetU32(is));
    s.hidden = static_cast<int>(GetU32(is));
    s.output_symbols = static_cast<int>(GetU32(is));
    s.upsample = static_cast<int>(GetU32(is));
    if ((s.mode != InputMode::kFrames && s.mode != InputMode::kSymbols) ||
        s.input_dim < 1 || s.input_dim > 1 << 20 || s.hidden < 1 ||
        s.hidden > 1 << 16 || s.output_symbols < 1 ||
        s.output_symbols > 1 << 20 || s.radius < 0 || s.radius > 1024 ||
        s.embed_dim < 0 || s.embed_dim > 1 << 16 || s.upsample < 1) {
      throw DataError("corrupted checkpoint header: " + path);
    }
    std::string m = GetStr(is);
    if (meta) *meta = m;
    std::vector<std::string> in_syms(GetU32(is));
    for (auto& x : in_syms) x = GetStr(is);
    std::vector<std::string> out_syms(GetU32(is));
    for (auto& x : out_syms) x = GetStr(is);
    if (!is) throw DataError("truncated checkpoint header: " + path);
    CtcModel model(role, s, std::move(in_syms), std::move(out_syms));
    model.params_.ForEachBlock([&](double* d, Eigen::Index n) {
      for (Eigen::Index i = 0; i < n; ++i) {
        const uint32_t bits = GetU32(is);
        float f;
        std::memcpy(&f, &bits, 4);
        d[i] = f;
      }
    });
    if (!is) throw DataError("truncated checkpoint parameters: " + path);
    return model;
  }

 private:
  LogitLattice Head(ForwardCache& c) const {
    c.hidden = c.window * params_.w1.transpose();
    c.hidden.rowwise() += params_.b1.transpose();
    c.hidden = c.hidden.array().tanh().matrix();
    Matrix logits = c.hidden * params_.w2.transpose();
    logits.rowwise() += params_.b2.transpose();
    return LogSoftmaxRows(logits);
  }

  static void PutU32(std::ostream& os, uint32_t v) {
    const char b[4] = {char(v & 0xff), char((v >> 8) & 0xff),
                       char((v >> 16) & 0xff), char((v >> 24) & 0xff)};
    os.write(b, 4);
  }
  static uint32_t GetU32(std::istream& is) {
    unsigned char b[4] = {0, 0, 0, 0};
    is.read(reinterpret_cast<char*>(b), 4);
    return uint32_t(b[0]) | uint32_t(b[1]) << 8 | uint32_t(b[2]) << 16 |
           uint32_t(b[3]) << 24;
  }
  static void PutStr(std::ostream& os, const std::string& s) {
    PutU32(os, static_cast<uint32_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  static std::string GetStr(std::istream& is) {
    const uint32_t n = GetU32(is);
    if (!is || n > (1u << 24)) throw DataError("corrupted checkpoint string");
    std::string s(n, '\0');
    is.read(s.data(), n);
    return s;
  }

  ModelRole role_ = ModelRole::kS2P;
  ModelShape shape_;
  std::vector<std::string> input_symbols_;
  std::vector<std::string> output_symbols_;
  CtcParams params_;
};

// Element-wise mean of checkpoints with identical shape.
inline CtcModel AverageModels(const std::vector<CtcModel>& models) {
  if (models.empty()) throw ConfigError("nothing to average");
  CtcModel out = models.front();
  for (size_t i = 1; i < models.size(); ++i) {
    if (!(models[i].shape() == out.shape())) {
      throw DataError("cannot average checkpoints of different shapes");
    }
    out.params() += models[i].params();
  }
  out.params() *= 1.0 / static_cast<double>(models.size());
  out.params().ForEachBlock([](double* d, Eigen::Index n) {
    for (Eigen::Index i = 0; i < n; ++i) d[i] = RoundToFloat(d[i]);
  });
  return out;
}

// Negative CTC log-likelihood of `labels` and its parameter gradient,
// accumulated into `grads` with the given weight. Returns the loss, or +inf
// (with no accumulation) when the labels are infeasible.
inline double AccumulateCtcLoss(const CtcModel& model, const LogitLattice& lattice,
                                const ForwardCache& cache, const Labels& labels,
                                double weight, CtcParams& grads) {
  if (!CtcLengthOk(lattice.frames(), labels, /*strict=*/true)) {
    return std::numeric_limits<double>::infinity();
  }
  double lp = 0.0;
  Matrix g;
  try {
    g = CtcGrad(lattice, labels, &lp);
  } catch (const NumericError&) {
    return std::numeric_limits<double>::infinity();
  }
  if (weight != 1.0) g *= weight;
  model.AccumulateBackward(cache, g, grads);
  return -lp;
}

}  // namespace jsaspg

#endif  // JSASPG_MODEL_HPP_
