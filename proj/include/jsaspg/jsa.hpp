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

#ifndef JSASPG_JSA_HPP_
#define JSASPG_JSA_HPP_

#include <map>
#include <optional>
#include <vector>

#include "jsaspg/optimizer.hpp"
#include "jsaspg/system.hpp"

namespace jsaspg {

struct JsaConfig {
  int m = 10;                        // proposals (and collected samples) per visit
  double supervised_batch_ratio = 0.2;
  int mis_steps_per_sample = 1;
  int epochs = 10;
  uint64_t seed = 1;
  int average_best = 3;              // checkpoints averaged at the end
  int batch_size = 16;
  int workers = 1;
  bool persistent_chain = false;     // keep h_old across epochs
  int max_resample = 20;             // degenerate-chain guard
  bool update_s2p = true;
  bool update_p2g = true;
  bool update_g2p = true;
  int val_samples = 10;              // k for the validation marginal estimate
  int val_beam = 4;

  void Validate() const {
    if (m < 1) throw ConfigError("m must be >= 1");
    if (supervised_batch_ratio < 0.0 || supervised_batch_ratio > 1.0) {
      throw ConfigError("supervised_batch_ratio must lie in [0, 1]");
    }
    if (mis_steps_per_sample < 1) throw ConfigError("mis_steps_per_sample must be >= 1");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (average_best < 1) throw ConfigError("average_best must be >= 1");
  }
};

// Markov chain state of one utterance: the current latent and its cached
// scores. Scores go stale whenever parameters change and must be refreshed.
struct MisState {
  Labels h_old;
  LogScores scores;

  double log_w() const { return scores.log_w; }
};

struct MisOutcome {
  bool accepted = false;
  Labels sample;  // chain value after the transition
};

// Acceptance rule of the independence sampler: accept with probability
// min{1, w(h') / w(h_old)}. An infeasible current state accepts any feasible
// proposal; an infeasible proposal is always rejected.
inline bool MisAccept(double log_w_old, double log_w_new, Rng& rng) {
  if (log_w_new == kNegInf) return false;
  if (log_w_old == kNegInf) return true;
  const double diff = log_w_new - log_w_old;
  if (diff >= 0.0) return true;
  return Uniform01(rng) < std::exp(diff);
}

// One transition: propose h' ~ q(.|y) and accept or keep h_old.
inline MisOutcome MisStep(MisState& state, UtteranceScorer& scorer, Rng& rng,
                          int max_resample = 20) {
  for (int attempt = 0;; ++attempt) {
    Labels proposal = SampleLabelSeqs(scorer.g2p_lattice(), 1, rng).front();
    LogScores s = scorer.Score(proposal);
    if (state.log_w() == kNegInf && s.log_w == kNegInf) {
      if (attempt + 1 >= max_resample) {
        throw NumericError("degenerate chain: no proposal with nonzero weight");
      }
      continue;
    }
    MisOutcome out;
    out.accepted = MisAccept(state.log_w(), s.log_w, rng);
    if (out.accepted) {
      state.h_old = std::move(proposal);
      state.scores = s;
    }
    out.sample = state.h_old;
    return out;
  }
}

inline MisState InitChain(UtteranceScorer& scorer, Rng& rng) {
  MisState st;
  st.h_old = SampleLabelSeqs(scorer.s2p_lattice(), 1, rng).front();
  st.scores = scorer.ScoreState(st.h_old);
  return st;
}

inline MisState RefreshChain(UtteranceScorer& scorer, const Labels& h) {
  MisState st;
  st.h_old = h;
  st.scores = scorer.ScoreState(h);
  return st;
}

struct JsaSamples {
  std::vector<Labels> h;
  int accepted = 0;
  int proposed = 0;
  Labels final_state;
};

// Runs the chain from `init` (or a fresh draw from p(h|x)) and collects the
// chain value after each of the m proposals.
inline JsaSamples DrawJsaSamples(UtteranceScorer& scorer, const JsaConfig& cfg,
                                 Rng& rng,
                                 const std::optional<Labels>& init = std::nullopt) {
  MisState st = init ? RefreshChain(scorer, *init) : InitChain(scorer, rng);
  JsaSamples out;
  for (int i = 0; i < cfg.m; ++i) {
    MisOutcome o;
    for (int k = 0; k < cfg.mis_steps_per_sample; ++k) {
      o = MisStep(st, scorer, rng, cfg.max_resample);
      out.accepted += o.accepted;
      out.proposed += 1;
    }
    out.h.push_back(std::move(o.sample));
  }
  out.final_state = st.h_old;
  return out;
}

struct SystemGrads {
  CtcParams s2p, p2g, g2p;

  static SystemGrads Zeros(const SpgSystem& sys) {
    return {CtcParams::Zeros(sys.s2p.shape()), CtcParams::Zeros(sys.p2g.shape()),
            CtcParams::Zeros(sys.g2p.shape())};
  }
  SystemGrads& operator+=(const SystemGrads& o) {
    s2p += o.s2p;
    p2g += o.p2g;
    g2p += o.g2p;
    return *this;
  }
  SystemGrads& operator*=(double a) {
    s2p *= a;
    p2g *= a;
    g2p *= a;
    return *this;
  }
};

// Adds weight * d(-log p)/d(logits) to `acc`; false when infeasible.
inline bool CtcGradInto(const LogitLattice& lattice, const Labels& labels,
                        double weight, Matrix& acc, double* log_prob) {
  if (!CtcLengthOk(lattice.frames(), labels, /*strict=*/true)) return false;
  try {
    acc += weight * CtcGrad(lattice, labels, log_prob);
  } catch (const NumericError&) {
    return false;
  }
  return true;
}

struct UpdateStats {
  double loss_s2p = 0.0;  // mean negative log-likelihood per used term
  double loss_p2g = 0.0;
  double loss_g2p = 0.0;
  int terms_s2p = 0;
  int terms_p2g = 0;
  int terms_g2p = 0;
  int accepted = 0;
  int proposed = 0;
  bool skipped = false;

  UpdateStats& operator+=(const UpdateStats& o) {
    loss_s2p += o.loss_s2p;
    loss_p2g += o.loss_p2g;
    loss_g2p += o.loss_g2p;
    terms_s2p += o.terms_s2p;
    terms_p2g += o.terms_p2g;
    terms_g2p += o.terms_g2p;
    accepted += o.accepted;
    proposed += o.proposed;
    return *this;
  }
};

// Gradient of
//   L = -(1/m) sum_i [log p(h_i|x) + log p(y|h_i) + log q(h_i|y)]
// with each term routed to its own model. Pairs infeasible for a model are
// left out of that model's sum. The returned losses are sums over used
// terms (divide by terms_* for means).
inline UpdateStats JsaGradient(UtteranceScorer& scorer,
                               const std::vector<Labels>& samples,
                               SystemGrads& grads) {
  const SpgSystem& sys = scorer.system();
  UpdateStats st;
  const double inv_m = 1.0 / static_cast<double>(samples.size());
  std::map<Labels, int> counts;
  for (const auto& h : samples) counts[h] += 1;

  int p2g_feasible = 0;
  for (const auto& [h, c] : counts) {
    if (CtcLengthOk(scorer.P2G(h).lattice.frames(), scorer.y(), true)) p2g_feasible += c;
  }
  if (p2g_feasible == 0) {
    st.skipped = true;
    return st;
  }

  Matrix up_s2p = Matrix::Zero(scorer.s2p_lattice().frames(),
                               scorer.s2p_lattice().num_symbols() + 1);
  Matrix up_g2p = Matrix::Zero(scorer.g2p_lattice().frames(),
                               scorer.g2p_lattice().num_symbols() + 1);
  for (const auto& [h, c] : counts) {
    const double w = c * inv_m;
    double lp;
    if (CtcGradInto(scorer.s2p_lattice(), h, w, up_s2p, &lp)) {
      st.loss_s2p += -lp * c;
      st.terms_s2p += c;
    }
    if (CtcGradInto(scorer.g2p_lattice(), h, w, up_g2p, &lp)) {
      st.loss_g2p += -lp * c;
      st.terms_g2p += c;
    }
    const auto& e = scorer.P2G(h);
    const double loss = AccumulateCtcLoss(sys.p2g, e.lattice, e.cache,
                                          scorer.y(), w, grads.p2g);
    if (std::isfinite(loss)) {
      st.loss_p2g += loss * c;
      st.terms_p2g += c;
    }
  }
  sys.s2p.AccumulateBackward(scorer.s2p_cache(), up_s2p, grads.s2p);
  sys.g2p.AccumulateBackward(scorer.g2p_cache(), up_g2p, grads.g2p);
  return st;
}

// Three standard CTC losses on (x -> h), (h -> y), (y -> h). A pair that
// violates a length constraint contributes nothing to its model.
inline UpdateStats SupervisedGradient(const SpgSystem& sys,
                                      const UtteranceRecord& utt,
                                      const Labels& h, SystemGrads& grads) {
  UpdateStats st;
  {
    ForwardCache c;
    const LogitLattice lat = sys.s2p.Forward(utt.x, &c);
    const double l = AccumulateCtcLoss(sys.s2p, lat, c, h, 1.0, grads.s2p);
    if (std::isfinite(l)) st.loss_s2p += l, st.terms_s2p += 1;
  }
  {
    ForwardCache c;
    const LogitLattice lat = sys.p2g.Forward(h, &c);
    const double l = AccumulateCtcLoss(sys.p2g, lat, c, utt.y, 1.0, grads.p2g);
    if (std::isfinite(l)) st.loss_p2g += l, st.terms_p2g += 1;
  }
  {
    ForwardCache c;
    const LogitLattice lat = sys.g2p.Forward(utt.y, &c);
    const double l = AccumulateCtcLoss(sys.g2p, lat, c, h, 1.0, grads.g2p);
    if (std::isfinite(l)) st.loss_g2p += l, st.terms_g2p += 1;
  }
  return st;
}

struct SystemOptimizers {
  AdamOptimizer s2p, p2g, g2p;

  static SystemOptimizers For(const SpgSystem& sys, const AdamConfig& cfg) {
    return {AdamOptimizer(sys.s2p.shape(), cfg), AdamOptimizer(sys.p2g.shape(), cfg),
            AdamOptimizer(sys.g2p.shape(), cfg)};
  }
};

inline void ApplyGradients(SpgSystem& sys, SystemOptimizers& opt,
                           const SystemGrads& g, const JsaConfig& cfg) {
  if (cfg.update_s2p) opt.s2p.Step(sys.s2p.params(), g.s2p);
  if (cfg.update_p2g) opt.p2g.Step(sys.p2g.params(), g.p2g);
  if (cfg.update_g2p) opt.g2p.Step(sys.g2p.params(), g.g2p);
}

// One JSA visit of an utterance: initialize the chain from p(h|x), run m
// MIS transitions, then take one optimizer step per model on the collected
// samples. Returns per-term mean losses; `skipped` when no sample pairs
// with y under P2G.
inline UpdateStats JsaUpdate(SpgSystem& sys, SystemOptimizers& opt,
                             const UtteranceRecord& utt, const JsaConfig& cfg,
                             Rng& rng) {
  SystemGrads g = SystemGrads::Zeros(sys);
  UpdateStats st;
  {
    UtteranceScorer scorer(sys, utt.x, utt.y);
    JsaSamples s = DrawJsaSamples(scorer, cfg, rng);
    st = JsaGradient(scorer, s.h, g);
    st.accepted = s.accepted;
    st.proposed = s.proposed;
  }
  if (st.skipped) return st;
  ApplyGradients(sys, opt, g, cfg);
  if (st.terms_s2p) st.loss_s2p /= st.terms_s2p;
  if (st.terms_p2g) st.loss_p2g /= st.terms_p2g;
  if (st.terms_g2p) st.loss_g2p /= st.terms_g2p;
  return st;
}

inline UpdateStats SupervisedUpdate(SpgSystem& sys, SystemOptimizers& opt,
                                    const UtteranceRecord& utt,
                                    const JsaConfig& cfg) {
  if (!utt.h_weak) {
    throw DataError("supervised update on utterance " + utt.id +
                    " without a phoneme label");
  }
  SystemGrads g = SystemGrads::Zeros(sys);
  UpdateStats st = SupervisedGradient(sys, utt, *utt.h_weak, g);
  ApplyGradients(sys, opt, g, cfg);
  return st;
}

}  // namespace jsaspg

#endif  // JSASPG_JSA_HPP_
