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

#ifndef JSASPG_DECODER_HPP_
#define JSASPG_DECODER_HPP_

#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "jsaspg/beam_search.hpp"
#include "jsaspg/system.hpp"

#include "json.hpp"

namespace jsaspg {

enum class DecodeMode { kWithoutLm, kWithLm, kMls };

inline const char* ModeName(DecodeMode m) {
  switch (m) {
    case DecodeMode::kWithoutLm: return "wo_lm";
    case DecodeMode::kWithLm: return "w_lm";
    case DecodeMode::kMls: return "mls";
  }
  return "?";
}

inline DecodeMode ModeFromName(const std::string& s) {
  if (s == "wo_lm") return DecodeMode::kWithoutLm;
  if (s == "w_lm") return DecodeMode::kWithLm;
  if (s == "mls") return DecodeMode::kMls;
  throw ConfigError("unknown decode mode '" + s + "'");
}

enum class ProposalMode { kSampled, kExhaustive };

struct DecodeConfig {
  int beam = 16;
  int nbest = 16;
  int k = 10;              // proposals per MLS candidate
  double lm_weight = 0.0;  // lambda
  double word_bonus = 0.0;
  double unk_penalty = 0.0;     // added to the LM log-probability of OOV words
  std::shared_ptr<const NGramLM> lm;
  bool nbest_with_lm = true;     // fuse the LM while building MLS candidates
  bool normalized_mean = false;  // report log mean instead of log sum
  bool common_random_numbers = false;
  ProposalMode proposal = ProposalMode::kSampled;
  double prune_logprob = kNegInf;

  void Validate() const {
    if (beam < 1) throw ConfigError("beam must be >= 1");
    if (nbest < 1 || nbest > beam) throw ConfigError("nbest must lie in [1, beam]");
    if (k < 1) throw ConfigError("k must be >= 1");
    if (lm_weight < 0.0) throw ConfigError("LM weight must be >= 0");
  }
};

struct DecodeResult {
  Labels h_hat;
  Labels y;
  double s2p_score = 0.0;
  double p2g_score = 0.0;
  double lm_score = 0.0;
  double mls_score = kNegInf;
  bool empty_phonemes = false;  // S2P produced nothing; y is empty too
};

inline Hypothesis BestPhonemes(const LogitLattice& s2p,
                               const DecodeConfig& cfg) {
  BeamOptions opt;
  opt.beam = cfg.beam;
  opt.nbest = 1;
  opt.prune_logprob = cfg.prune_logprob;
  auto hyps = BeamNbest(s2p, opt);
  if (hyps.empty()) return Hypothesis{};
  return hyps.front();
}

inline std::vector<Hypothesis> GraphemeNbest(const SpgSystem& sys,
                                             const Labels& h, int n,
                                             const DecodeConfig& cfg,
                                             bool with_lm) {
  const LogitLattice lat = sys.p2g.Forward(h);
  BeamOptions opt;
  opt.beam = cfg.beam;
  opt.nbest = n;
  opt.prune_logprob = cfg.prune_logprob;
  std::optional<WordFusion> fusion;
  if (with_lm && cfg.lm) {
    fusion.emplace(*cfg.lm, *sys.graphemes, sys.separator, cfg.lm_weight,
                   cfg.word_bonus, cfg.unk_penalty);
  }
  return BeamNbest(lat, opt, fusion ? &*fusion : nullptr);
}

// S2P beam search, best phoneme sequence into P2G beam search; LM fusion
// only when `with_lm` and an LM is configured.
inline DecodeResult VanillaDecode(const SpgSystem& sys, const Matrix& x,
                                  const DecodeConfig& cfg, bool with_lm) {
  DecodeResult r;
  const LogitLattice s2p = sys.s2p.Forward(x);
  const Hypothesis hh = BestPhonemes(s2p, cfg);
  r.h_hat = hh.seq;
  r.s2p_score = hh.score;
  if (r.h_hat.empty()) {
    r.empty_phonemes = true;
    return r;
  }
  auto ys = GraphemeNbest(sys, r.h_hat, 1, cfg, with_lm);
  if (!ys.empty()) {
    r.y = ys.front().seq;
    r.p2g_score = ys.front().score;
    r.lm_score = ys.front().lm_score;
  }
  return r;
}

// Importance-sampled log marginal of one candidate:
//   log sum_i p(h_i|x) p(y|h_i) / q(h_i|y),  h_i ~ q(.|y)
// or, with exhaustive proposals, log sum_h p(h|x) p(y|h) over supp q.
inline double MarginalScore(const SpgSystem& sys, const LogitLattice& s2p,
                            const Labels& y, const DecodeConfig& cfg,
                            Rng& rng) {
  UtteranceScorer scorer(sys, s2p, y);
  std::vector<double> terms;
  if (cfg.proposal == ProposalMode::kExhaustive) {
    for (const auto& [h, q] : EnumerateLabelDist(scorer.g2p_lattice())) {
      const LogScores s = scorer.Score(h);
      if (s.log_w != kNegInf) terms.push_back(s.s2p + s.p2g);
    }
    return LogSumExp(terms);
  }
  for (const auto& h : SampleLabelSeqs(scorer.g2p_lattice(), cfg.k, rng)) {
    terms.push_back(scorer.Score(h).log_w);
  }
  double v = LogSumExp(terms);
  if (cfg.normalized_mean && v != kNegInf) v -= std::log(static_cast<double>(cfg.k));
  return v;
}

// Marginal-likelihood scoring: candidates from the P2G n-best of the best
// S2P sequence are rescored by the estimated log p(y|x) plus the weighted LM
// score. Candidates that all score -inf fall back to the n-best order.
inline DecodeResult MlsDecode(const SpgSystem& sys, const Matrix& x,
                              const DecodeConfig& cfg, Rng& rng) {
  DecodeResult r;
  const LogitLattice s2p = sys.s2p.Forward(x);
  const Hypothesis hh = BestPhonemes(s2p, cfg);
  r.h_hat = hh.seq;
  r.s2p_score = hh.score;
  if (r.h_hat.empty()) {
    r.empty_phonemes = true;
    return r;
  }
  const auto cands = GraphemeNbest(sys, r.h_hat, cfg.nbest, cfg, cfg.nbest_with_lm);
  if (cands.empty()) throw NumericError("MLS decoding got an empty n-best list");
  std::optional<WordFusion> fusion;
  if (cfg.lm) {
    fusion.emplace(*cfg.lm, *sys.graphemes, sys.separator, cfg.lm_weight,
                   cfg.word_bonus, cfg.unk_penalty);
  }
  const uint64_t crn_seed = rng();
  int best = -1;
  double best_score = kNegInf;
  double best_marginal = kNegInf, best_lm = 0.0;
  for (size_t i = 0; i < cands.size(); ++i) {
    Rng local(crn_seed);
    Rng& use = cfg.common_random_numbers ? local : rng;
    const double marginal = MarginalScore(sys, s2p, cands[i].seq, cfg, use);
    const double lm = fusion ? fusion->Score(cands[i].seq) : 0.0;
    const double bonus = fusion ? cfg.word_bonus * fusion->CountWords(cands[i].seq) : 0.0;
    const double total =
        marginal == kNegInf ? kNegInf : marginal + cfg.lm_weight * lm + bonus;
    if (total > best_score ||
        (total == best_score && total != kNegInf && cands[i].seq > cands[best].seq)) {
      best = static_cast<int>(i);
      best_score = total;
      best_marginal = marginal;
      best_lm = lm;
    }
  }
  if (best < 0) best = 0;
  r.y = cands[best].seq;
  r.p2g_score = cands[best].score;
  r.lm_score = best_lm;
  r.mls_score = best_marginal;
  return r;
}

// argmax_y log sum_h p(h|x) p(y|h) + lambda log p_LM(y) by enumerating all h
// under S2P and all y under P2G. Ties go to the lexicographically greater y.
// Test oracle for small instances.
inline Labels ExactDecode(const SpgSystem& sys, const Matrix& x,
                          const NGramLM* lm, double lambda,
                          double max_paths = 2e6,
                          std::map<Labels, double>* marginals = nullptr) {
  const LogitLattice s2p = sys.s2p.Forward(x);
  std::map<Labels, double> py;
  for (const auto& [h, ph] : EnumerateLabelDist(s2p, max_paths)) {
    if (ph == 0.0) continue;
    const LogitLattice p2g = sys.p2g.Forward(h);
    for (const auto& [y, pyh] : EnumerateLabelDist(p2g, max_paths)) {
      py[y] += ph * pyh;
    }
  }
  std::optional<WordFusion> fusion;
  if (lm) fusion.emplace(*lm, *sys.graphemes, sys.separator, lambda);
  Labels best;
  double best_score = kNegInf;
  bool have = false;
  for (const auto& [y, p] : py) {
    if (p <= 0.0) continue;
    const double s = std::log(p) + (fusion ? lambda * fusion->Score(y) : 0.0);
    if (!have || s > best_score || (s == best_score && y > best)) {
      best = y;
      best_score = s;
      have = true;
    }
  }
  if (marginals) *marginals = std::move(py);
  return best;
}

inline nlohmann::json DecodeReportLine(const std::string& utt_id, DecodeMode mode,
                                       const DecodeResult& r,
                                       const Alphabet& graphemes) {
  nlohmann::json j;
  j["id"] = utt_id;
  j["mode"] = ModeName(mode);
  j["hyp_ids"] = r.y;
  j["phoneme_ids"] = r.h_hat;
  j["text"] = graphemes.Render(r.y, "");
  j["scores"] = {{"s2p", r.s2p_score},
                 {"p2g", r.p2g_score},
                 {"lm", r.lm_score},
                 {"mls", r.mls_score == kNegInf ? nlohmann::json() : nlohmann::json(r.mls_score)}};
  j["empty_phonemes"] = r.empty_phonemes;
  return j;
}

}  // namespace jsaspg

#endif  // JSASPG_DECODER_HPP_
