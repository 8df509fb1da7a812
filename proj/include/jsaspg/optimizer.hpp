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

#ifndef JSASPG_OPTIMIZER_HPP_
#define JSASPG_OPTIMIZER_HPP_

#include <string>

#include "jsaspg/common.hpp"
#include "jsaspg/model.hpp"

namespace jsaspg {

struct AdamConfig {
  double learning_rate = 3e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double min_learning_rate = 3e-5;
  int patience = 10;          // epochs without improvement before decay
  double decay_factor = 0.5;
  double clip_norm = 0.0;     // 0 disables clipping
};

// Adam with a reduce-on-plateau schedule driven by validation loss.
class AdamOptimizer {
 public:
  AdamOptimizer() = default;
  AdamOptimizer(const ModelShape& shape, const AdamConfig& cfg)
      : cfg_(cfg),
        m_(CtcParams::Zeros(shape)),
        v_(CtcParams::Zeros(shape)),
        lr_(cfg.learning_rate) {}

  double learning_rate() const { return lr_; }
  int steps() const { return steps_; }
  bool exhausted() const { return lr_ <= cfg_.min_learning_rate && bad_epochs_ >= cfg_.patience; }
  const AdamConfig& config() const { return cfg_; }

  void Step(CtcParams& params, const CtcParams& grads) {
    if (!grads.AllFinite()) {
      throw NumericError("non-finite gradient passed to the optimizer");
    }
    double scale = 1.0;
    if (cfg_.clip_norm > 0.0) {
      double sq = 0.0;
      grads.ForEachBlock([&](const double* d, Eigen::Index n) {
        for (Eigen::Index i = 0; i < n; ++i) sq += d[i] * d[i];
      });
      const double norm = std::sqrt(sq);
      if (norm > cfg_.clip_norm) scale = cfg_.clip_norm / norm;
    }
    ++steps_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, steps_);
    const double bc2 = 1.0 - std::pow(cfg_.beta2, steps_);
    const double step = lr_ * std::sqrt(bc2) / bc1;
    auto update = [&](Eigen::Ref<Eigen::ArrayXd> p, Eigen::Ref<Eigen::ArrayXd> m,
                      Eigen::Ref<Eigen::ArrayXd> v,
                      const Eigen::Ref<const Eigen::ArrayXd>& g) {
      m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * scale * g;
      v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * (scale * g).square();
      p -= step * m / (v.sqrt() + cfg_.epsilon);
      p = p.cast<float>().cast<double>();
    };
    auto as_array = [](auto& mat) {
      return Eigen::Map<Eigen::ArrayXd>(mat.data(), mat.size());
    };
    auto as_carray = [](const auto& mat) {
      return Eigen::Map<const Eigen::ArrayXd>(mat.data(), mat.size());
    };
    if (params.embed.size()) {
      update(as_array(params.embed), as_array(m_.embed), as_array(v_.embed),
             as_carray(grads.embed));
    }
    update(as_array(params.w1), as_array(m_.w1), as_array(v_.w1), as_carray(grads.w1));
    update(as_array(params.b1), as_array(m_.b1), as_array(v_.b1), as_carray(grads.b1));
    update(as_array(params.w2), as_array(m_.w2), as_array(v_.w2), as_carray(grads.w2));
    update(as_array(params.b2), as_array(m_.b2), as_array(v_.b2), as_carray(grads.b2));
  }

  // Returns true when the rate was decayed.
  bool ReportValidation(double loss) {
    if (loss < best_) {
      best_ = loss;
      bad_epochs_ = 0;
      return false;
    }
    if (++bad_epochs_ >= cfg_.patience && lr_ > cfg_.min_learning_rate) {
      lr_ = std::max(cfg_.min_learning_rate, lr_ * cfg_.decay_factor);
      bad_epochs_ = 0;
      return true;
    }
    return false;
  }

 private:
  AdamConfig cfg_;
  CtcParams m_, v_;
  double lr_ = 0.0;
  int steps_ = 0;
  double best_ = std::numeric_limits<double>::infinity();
  int bad_epochs_ = 0;
};

}  // namespace jsaspg

#endif  // JSASPG_OPTIMIZER_HPP_
