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

#ifndef JSASPG_SYSTEM_HPP_
#define JSASPG_SYSTEM_HPP_

#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "jsaspg/ctc.hpp"
#include "jsaspg/dataset.hpp"
#include "jsaspg/model.hpp"
#include "jsaspg/ngram_lm.hpp"
#include "jsaspg/seq.hpp"

namespace jsaspg {

struct ModelHyper {
  int s2p_radius = 2;
  int s2p_hidden = 64;
  int sym_embed = 16;
  int sym_radius = 2;
  int sym_hidden = 64;
  int p2g_upsample = 2;
  int g2p_upsample = 2;
};

// S2P p(h|x), P2G p(y|h) and the auxiliary G2P q(h|y).
struct SpgSystem {
  CtcModel s2p;
  CtcModel p2g;
  CtcModel g2p;
  std::shared_ptr<const Alphabet> phonemes;
  std::shared_ptr<const Alphabet> graphemes;
  int separator = 0;  // grapheme id of the word separator

  LengthRules length_rules() const {
    return {p2g.shape().upsample, g2p.shape().upsample};
  }

  void CheckInvariants() const {
    const auto& ph = phonemes->symbols();
    const auto& gr = graphemes->symbols();
    if (s2p.output_symbols() != ph || g2p.output_symbols() != ph ||
        p2g.input_symbols() != ph) {
      throw ConfigError("phoneme alphabets of S2P, G2P and P2G disagree");
    }
    if (p2g.output_symbols() != gr || g2p.input_symbols() != gr) {
      throw ConfigError("grapheme alphabets of P2G and G2P disagree");
    }
    if (s2p.role() != ModelRole::kS2P || p2g.role() != ModelRole::kP2G ||
        g2p.role() != ModelRole::kG2P) {
      throw ConfigError("model roles are misassigned");
    }
  }
};

inline CtcModel MakeS2P(const Alphabet& phonemes, int feature_dim,
                        const ModelHyper& hp) {
  ModelShape s;
  s.mode = InputMode::kFrames;
  s.input_dim = feature_dim;
  s.embed_dim = 0;
  s.radius = hp.s2p_radius;
  s.hidden = hp.s2p_hidden;
  s.output_symbols = phonemes.size();
  return CtcModel(ModelRole::kS2P, s, {}, phonemes.symbols());
}

inline CtcModel MakeSymbolModel(ModelRole role, const Alphabet& in,
                                const Alphabet& out, int upsample,
                                const ModelHyper& hp) {
  ModelShape s;
  s.mode = InputMode::kSymbols;
  s.input_dim = in.size();
  s.embed_dim = hp.sym_embed;
  s.radius = hp.sym_radius;
  s.hidden = hp.sym_hidden;
  s.output_symbols = out.size();
  s.upsample = upsample;
  return CtcModel(role, s, in.symbols(), out.symbols());
}

inline SpgSystem MakeSystem(std::shared_ptr<const Alphabet> phonemes,
                            std::shared_ptr<const Alphabet> graphemes,
                            int separator, int feature_dim,
                            const ModelHyper& hp, Rng& rng) {
  SpgSystem sys;
  sys.phonemes = phonemes;
  sys.graphemes = graphemes;
  sys.separator = separator;
  sys.s2p = MakeS2P(*phonemes, feature_dim, hp);
  sys.p2g = MakeSymbolModel(ModelRole::kP2G, *phonemes, *graphemes,
                            hp.p2g_upsample, hp);
  sys.g2p = MakeSymbolModel(ModelRole::kG2P, *graphemes, *phonemes,
                            hp.g2p_upsample, hp);
  sys.s2p.InitRandom(rng);
  sys.p2g.InitRandom(rng);
  sys.g2p.InitRandom(rng);
  return sys;
}

struct LogScores {
  double s2p = kNegInf;  // log p(h|x)
  double p2g = kNegInf;  // log p(y|h)
  double g2p = kNegInf;  // log q(h|y)
  double log_w = kNegInf;
};

// log w(h) = log p(h|x) + log p(y|h) - log q(h|y). An infeasible numerator
// gives -inf; a zero proposal probability under a feasible numerator means
// the proposal does not cover the target and is reported as an error.
inline double CombineLogWeight(double s2p, double p2g, double g2p) {
  if (s2p == kNegInf || p2g == kNegInf) return kNegInf;
  if (g2p == kNegInf) {
    throw NumericError(
        "importance weight is unbounded: proposal assigns zero probability "
        "to a sequence the target supports");
  }
  return s2p + p2g - g2p;
}

// Per-utterance cache of model outputs used by MIS, weighting and gradients.
// S2P and G2P run once; P2G runs once per distinct phoneme sequence.
class UtteranceScorer {
 public:
  struct P2GEntry {
    LogitLattice lattice;
    ForwardCache cache;
  };

  UtteranceScorer(const SpgSystem& sys, const Matrix& x, const Labels& y)
      : sys_(&sys), y_(y) {
    s2p_lattice_ = sys.s2p.Forward(x, &s2p_cache_);
    g2p_lattice_ = sys.g2p.Forward(y, &g2p_cache_);
  }

  // Reuses an S2P pass already computed for x (decoding scores many y).
  UtteranceScorer(const SpgSystem& sys, const LogitLattice& s2p_lattice,
                  const Labels& y)
      : sys_(&sys), y_(y), s2p_lattice_(s2p_lattice) {
    g2p_lattice_ = sys.g2p.Forward(y, &g2p_cache_);
  }

  const SpgSystem& system() const { return *sys_; }
  const Labels& y() const { return y_; }
  const LogitLattice& s2p_lattice() const { return s2p_lattice_; }
  const LogitLattice& g2p_lattice() const { return g2p_lattice_; }
  const ForwardCache& s2p_cache() const { return s2p_cache_; }
  const ForwardCache& g2p_cache() const { return g2p_cache_; }

  const P2GEntry& P2G(const Labels& h) {
    auto it = p2g_.find(h);
    if (it != p2g_.end()) return it->second;
    P2GEntry e;
    e.lattice = sys_->p2g.Forward(h, &e.cache);
    return p2g_.emplace(h, std::move(e)).first->second;
  }

  LogScores Terms(const Labels& h) {
    LogScores s;
    s.s2p = CtcLogProb(s2p_lattice_, h);
    s.g2p = CtcLogProb(g2p_lattice_, h);
    if (s.s2p != kNegInf) s.p2g = CtcLogProb(P2G(h).lattice, y_);
    return s;
  }

  LogScores Score(const Labels& h) {
    LogScores s = Terms(h);
    s.log_w = CombineLogWeight(s.s2p, s.p2g, s.g2p);
    return s;
  }

  // Chain states need not come from q. A state outside the support of q
  // gets weight -inf so that the chain leaves it at the first feasible
  // proposal instead of sticking there forever.
  LogScores ScoreState(const Labels& h) {
    LogScores s = Terms(h);
    s.log_w = s.g2p == kNegInf ? kNegInf : CombineLogWeight(s.s2p, s.p2g, s.g2p);
    return s;
  }

 private:
  const SpgSystem* sys_;
  Labels y_;
  LogitLattice s2p_lattice_, g2p_lattice_;
  ForwardCache s2p_cache_, g2p_cache_;
  std::unordered_map<Labels, P2GEntry, IdVectorHash> p2g_;
};

inline double ImportanceLogWeight(const SpgSystem& sys, const Matrix& x,
                                  const Labels& y, const Labels& h) {
  UtteranceScorer scorer(sys, x, y);
  return scorer.Score(h).log_w;
}

}  // namespace jsaspg

#endif  // JSASPG_SYSTEM_HPP_
