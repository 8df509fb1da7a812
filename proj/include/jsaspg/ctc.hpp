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

#ifndef JSASPG_CTC_HPP_
#define JSASPG_CTC_HPP_

#include <map>
#include <vector>

#include <Eigen/Dense>

#include "jsaspg/common.hpp"
#include "jsaspg/seq.hpp"

namespace jsaspg {

using Matrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

// T x (A + 1) per-frame log-distributions; column 0 is the blank.
struct LogitLattice {
  Matrix values;

  int frames() const { return static_cast<int>(values.rows()); }
  int num_symbols() const { return static_cast<int>(values.cols()) - 1; }
};

// Row-wise log-softmax of unnormalized logits.
inline LogitLattice LogSoftmaxRows(const Matrix& logits) {
  LogitLattice out;
  out.values.resize(logits.rows(), logits.cols());
  for (Eigen::Index t = 0; t < logits.rows(); ++t) {
    const double m = logits.row(t).maxCoeff();
    const double lse =
        m + std::log((logits.row(t).array() - m).exp().sum());
    out.values.row(t) = logits.row(t).array() - lse;
  }
  return out;
}

struct FwdBwdTables {
  // (2L + 1) x T, log domain; beta includes the emission at frame t.
  Matrix alpha;
  Matrix beta;
  Labels extended;
  double log_prob = kNegInf;
};

inline Labels ExtendWithBlanks(const Labels& labels) {
  Labels ext(2 * labels.size() + 1, kBlank);
  for (size_t i = 0; i < labels.size(); ++i) ext[2 * i + 1] = labels[i];
  return ext;
}

inline void CheckLabels(const LogitLattice& lattice, const Labels& labels) {
  for (int l : labels) {
    if (l < 1 || l > lattice.num_symbols()) {
      throw DataError("label id outside the lattice alphabet");
    }
  }
}

inline FwdBwdTables CtcForwardBackward(const LogitLattice& lattice,
                                       const Labels& labels) {
  CheckLabels(lattice, labels);
  FwdBwdTables tb;
  tb.extended = ExtendWithBlanks(labels);
  const int T = lattice.frames();
  const int S = static_cast<int>(tb.extended.size());
  if (T == 0) {
    tb.log_prob = labels.empty() ? 0.0 : kNegInf;
    return tb;
  }
  const auto& y = lattice.values;
  const Labels& e = tb.extended;
  tb.alpha = Matrix::Constant(S, T, kNegInf);
  tb.beta = Matrix::Constant(S, T, kNegInf);

  tb.alpha(0, 0) = y(0, e[0]);
  if (S > 1) tb.alpha(1, 0) = y(0, e[1]);
  for (int t = 1; t < T; ++t) {
    // Paths must leave room to emit the remaining labels.
    const int s_lo = std::max(0, S - 2 * (T - t));
    const int s_hi = std::min(S - 1, 2 * t + 1);
    for (int s = s_lo; s <= s_hi; ++s) {
      double a = tb.alpha(s, t - 1);
      if (s >= 1) a = LogAdd(a, tb.alpha(s - 1, t - 1));
      if (s >= 2 && e[s] != kBlank && e[s] != e[s - 2]) {
        a = LogAdd(a, tb.alpha(s - 2, t - 1));
      }
      if (a != kNegInf) tb.alpha(s, t) = a + y(t, e[s]);
    }
  }

  tb.beta(S - 1, T - 1) = y(T - 1, e[S - 1]);
  if (S > 1) tb.beta(S - 2, T - 1) = y(T - 1, e[S - 2]);
  for (int t = T - 2; t >= 0; --t) {
    const int s_lo = std::max(0, S - 2 * (T - t));
    const int s_hi = std::min(S - 1, 2 * t + 1);
    for (int s = s_lo; s <= s_hi; ++s) {
      double b = tb.beta(s, t + 1);
      if (s + 1 < S) b = LogAdd(b, tb.beta(s + 1, t + 1));
      if (s + 2 < S && e[s] != kBlank && e[s] != e[s + 2]) {
        b = LogAdd(b, tb.beta(s + 2, t + 1));
      }
      if (b != kNegInf) tb.beta(s, t) = b + y(t, e[s]);
    }
  }
  double lp = tb.alpha(S - 1, T - 1);
  if (S > 1) lp = LogAdd(lp, tb.alpha(S - 2, T - 1));
  tb.log_prob = lp;
  return tb;
}

// log p(labels | lattice); -inf when no path collapses to `labels`.
inline double CtcLogProb(const LogitLattice& lattice, const Labels& labels) {
  CheckLabels(lattice, labels);
  const int T = lattice.frames();
  const int L = static_cast<int>(labels.size());
  if (T == 0) return L == 0 ? 0.0 : kNegInf;
  if (!CtcLengthOk(T, labels, /*strict=*/true)) return kNegInf;
  const Labels e = ExtendWithBlanks(labels);
  const int S = static_cast<int>(e.size());
  const auto& y = lattice.values;
  std::vector<double> prev(S, kNegInf), cur(S, kNegInf);
  prev[0] = y(0, e[0]);
  if (S > 1) prev[1] = y(0, e[1]);
  for (int t = 1; t < T; ++t) {
    std::fill(cur.begin(), cur.end(), kNegInf);
    const int s_lo = std::max(0, S - 2 * (T - t));
    const int s_hi = std::min(S - 1, 2 * t + 1);
    for (int s = s_lo; s <= s_hi; ++s) {
      double a = prev[s];
      if (s >= 1) a = LogAdd(a, prev[s - 1]);
      if (s >= 2 && e[s] != kBlank && e[s] != e[s - 2]) {
        a = LogAdd(a, prev[s - 2]);
      }
      if (a != kNegInf) cur[s] = a + y(t, e[s]);
    }
    std::swap(prev, cur);
  }
  double lp = prev[S - 1];
  if (S > 1) lp = LogAdd(lp, prev[S - 2]);
  return lp;
}

// Gradient of -log p(labels) with respect to the pre-softmax logits that
// produced `lattice`: softmax minus the per-frame label occupancy.
inline Matrix CtcGrad(const LogitLattice& lattice, const Labels& labels,
                      double* log_prob = nullptr) {
  FwdBwdTables tb = CtcForwardBackward(lattice, labels);
  if (tb.log_prob == kNegInf) {
    throw NumericError("ctc gradient requested for infeasible labels");
  }
  if (log_prob) *log_prob = tb.log_prob;
  const int T = lattice.frames();
  const int K = lattice.num_symbols() + 1;
  const int S = static_cast<int>(tb.extended.size());
  Matrix grad = lattice.values.array().exp().matrix();
  std::vector<double> occ(K);
  for (int t = 0; t < T; ++t) {
    std::fill(occ.begin(), occ.end(), kNegInf);
    for (int s = 0; s < S; ++s) {
      const double ab = tb.alpha(s, t) + tb.beta(s, t);
      if (ab != kNegInf) occ[tb.extended[s]] = LogAdd(occ[tb.extended[s]], ab);
    }
    for (int k = 0; k < K; ++k) {
      if (occ[k] == kNegInf) continue;
      grad(t, k) -=
          std::exp(occ[k] - lattice.values(t, k) - tb.log_prob);
    }
  }
  return grad;
}

// Per-frame categorical sampling followed by collapse. Each returned
// sequence is an independent draw from the CTC label-sequence law.
inline std::vector<Labels> SampleLabelSeqs(const LogitLattice& lattice, int n,
                                           Rng& rng) {
  if (n < 1) throw ConfigError("sample count must be >= 1");
  const int T = lattice.frames();
  const int K = lattice.num_symbols() + 1;
  Matrix cdf(T, K);
  for (int t = 0; t < T; ++t) {
    double acc = 0.0;
    for (int k = 0; k < K; ++k) {
      acc += std::exp(lattice.values(t, k));
      cdf(t, k) = acc;
    }
  }
  std::vector<Labels> out;
  out.reserve(n);
  std::vector<int> path(T);
  for (int i = 0; i < n; ++i) {
    for (int t = 0; t < T; ++t) {
      const double u = Uniform01(rng) * cdf(t, K - 1);
      int k = 0;
      while (k < K - 1 && cdf(t, k) <= u) ++k;
      path[t] = k;
    }
    out.push_back(CollapsePath(path));
  }
  return out;
}

// Best path; ties go to the lower symbol id.
inline Labels GreedyDecode(const LogitLattice& lattice) {
  std::vector<int> path(lattice.frames());
  for (int t = 0; t < lattice.frames(); ++t) {
    int best = 0;
    for (int k = 1; k <= lattice.num_symbols(); ++k) {
      if (lattice.values(t, k) > lattice.values(t, best)) best = k;
    }
    path[t] = best;
  }
  return CollapsePath(path);
}

// Brute force over all (A + 1)^T paths. Test oracle only.
inline std::map<Labels, double> EnumerateLabelDist(
    const LogitLattice& lattice, double max_paths = 1e7) {
  const int T = lattice.frames();
  const int K = lattice.num_symbols() + 1;
  if (std::pow(static_cast<double>(K), T) > max_paths) {
    throw ConfigError("lattice too large to enumerate");
  }
  std::map<Labels, double> dist;
  const Matrix probs = lattice.values.array().exp().matrix();
  Labels prefix;
  std::function<void(int, int, double)> rec = [&](int t, int last,
                                                  double p) {
    if (t == T) {
      dist[prefix] += p;
      return;
    }
    for (int k = 0; k < K; ++k) {
      const double q = p * probs(t, k);
      if (q == 0.0) continue;
      const bool emit = k != kBlank && k != last;
      if (emit) prefix.push_back(k);
      rec(t + 1, k, q);
      if (emit) prefix.pop_back();
    }
  };
  rec(0, -1, 1.0);
  return dist;
}

}  // namespace jsaspg

#endif  // JSASPG_CTC_HPP_
