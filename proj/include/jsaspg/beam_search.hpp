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

#ifndef JSASPG_BEAM_SEARCH_HPP_
#define JSASPG_BEAM_SEARCH_HPP_

#include <map>
#include <memory>
#include <ostream>
#include <unordered_map>
#include <vector>

#include "jsaspg/ctc.hpp"
#include "jsaspg/ngram_lm.hpp"
#include "jsaspg/seq.hpp"

#include "json.hpp"

namespace jsaspg {

struct Hypothesis {
  Labels seq;
  double score = kNegInf;     // CTC log-probability of seq
  double lm_score = 0.0;      // natural-log LM score, 0 without fusion
  double combined = kNegInf;  // score + lambda * lm_score (+ word bonus)
};

// Shallow fusion of a word n-gram LM into grapheme-level CTC search. The LM
// term for a word is added when the separator after it is emitted; pending
// words and the end marker are scored when the hypothesis is finalized.
class WordFusion {
 public:
  WordFusion(const NGramLM& lm, const Alphabet& graphemes, int separator,
             double weight, double word_bonus = 0.0, double unk_penalty = 0.0)
      : lm_(&lm),
        graphemes_(&graphemes),
        separator_(separator),
        weight_(weight),
        word_bonus_(word_bonus),
        unk_penalty_(unk_penalty) {}

  const NGramLM& lm() const { return *lm_; }
  int separator() const { return separator_; }
  double weight() const { return weight_; }
  double word_bonus() const { return word_bonus_; }
  double unk_penalty() const { return unk_penalty_; }

  // LM log-probability of the next word; out-of-vocabulary words also pay
  // the unknown-word penalty.
  double WordLogProb(const std::vector<int>& ctx, int id) const {
    const double lp = lm_->LogProbNext(ctx, id);
    return id == lm_->unk() ? lp + unk_penalty_ : lp;
  }

  int WordId(const Labels& word) const {
    auto it = cache_.find(word);
    if (it != cache_.end()) return it->second;
    std::string s;
    for (int g : word) s += graphemes_->Symbol(g);
    const int id = lm_->WordId(s);
    cache_.emplace(word, id);
    return id;
  }

  // Full-sequence LM score of a grapheme sequence, consistent with search.
  double Score(const Labels& graphemes) const {
    std::vector<int> ctx = lm_->BeginContext();
    double lp = 0.0;
    for (const auto& w : SplitWords(graphemes, separator_)) {
      const int id = WordId(w);
      lp += WordLogProb(ctx, id);
      lm_->Advance(ctx, id);
    }
    return lp + lm_->LogProbNext(ctx, lm_->eos());
  }

  int CountWords(const Labels& graphemes) const {
    return static_cast<int>(SplitWords(graphemes, separator_).size());
  }

 private:
  const NGramLM* lm_;
  const Alphabet* graphemes_;
  int separator_;
  double weight_;
  double word_bonus_;
  double unk_penalty_;
  mutable std::unordered_map<Labels, int, IdVectorHash> cache_;
};

struct BeamOptions {
  int beam = 16;
  int nbest = 1;
  // Symbols whose frame log-probability falls below this are not extended.
  double prune_logprob = kNegInf;
};

// Ranking used everywhere hypotheses are ordered: combined score descending,
// ties to the lexicographically greater sequence.
inline bool HypothesisBefore(const Hypothesis& a, const Hypothesis& b) {
  if (a.combined != b.combined) return a.combined > b.combined;
  return a.seq > b.seq;
}

// Prefix beam search. Prefixes are merged by collapsed label sequence with
// blank-ending and non-blank-ending mass kept apart. The final n-best is
// rescored with the exact CTC probability of each surviving sequence.
inline std::vector<Hypothesis> BeamNbest(const LogitLattice& lattice,
                                         const BeamOptions& opt,
                                         const WordFusion* fusion = nullptr) {
  if (opt.beam < 1) throw ConfigError("beam must be >= 1");
  if (opt.nbest < 1 || opt.nbest > opt.beam) {
    throw ConfigError("nbest must lie in [1, beam]");
  }
  struct Node {
    double pb = kNegInf;
    double pnb = kNegInf;
    std::vector<int> lm_ctx;
    double lm = 0.0;
    int words = 0;
    size_t word_start = 0;
  };
  const bool fuse = fusion != nullptr;
  const double lambda = fuse ? fusion->weight() : 0.0;
  const double bonus = fuse ? fusion->word_bonus() : 0.0;
  auto prune_score = [&](const Node& n) {
    return LogAdd(n.pb, n.pnb) + lambda * n.lm + bonus * n.words;
  };
  auto child_state = [&](const Labels& parent_seq, const Node& parent,
                         int c) {
    Node child;
    child.lm_ctx = parent.lm_ctx;
    child.lm = parent.lm;
    child.words = parent.words;
    child.word_start = parent.word_start;
    if (fuse && c == fusion->separator()) {
      if (parent_seq.size() > parent.word_start) {
        Labels word(parent_seq.begin() + parent.word_start, parent_seq.end());
        const int id = fusion->WordId(word);
        child.lm += fusion->WordLogProb(child.lm_ctx, id);
        fusion->lm().Advance(child.lm_ctx, id);
        child.words += 1;
      }
      child.word_start = parent_seq.size() + 1;
    }
    return child;
  };

  const int T = lattice.frames();
  const int A = lattice.num_symbols();
  std::map<Labels, Node> beam;
  {
    Node root;
    root.pb = 0.0;
    if (fuse) root.lm_ctx = fusion->lm().BeginContext();
    beam.emplace(Labels{}, std::move(root));
  }
  for (int t = 0; t < T; ++t) {
    std::map<Labels, Node> next;
    const auto row = lattice.values.row(t);
    for (const auto& [seq, node] : beam) {
      const double total = LogAdd(node.pb, node.pnb);
      {
        auto [it, fresh] = next.try_emplace(seq);
        if (fresh) {
          it->second = node;
          it->second.pb = it->second.pnb = kNegInf;
        }
        it->second.pb = LogAdd(it->second.pb, total + row(kBlank));
      }
      const int last = seq.empty() ? -1 : seq.back();
      for (int c = 1; c <= A; ++c) {
        const double lp = row(c);
        if (lp == kNegInf || lp < opt.prune_logprob) continue;
        if (c == last) {
          auto it = next.find(seq);
          it->second.pnb = LogAdd(it->second.pnb, node.pnb + lp);
          if (node.pb == kNegInf) continue;
        }
        Labels ext = seq;
        ext.push_back(c);
        auto [it, fresh] = next.try_emplace(std::move(ext));
        if (fresh) {
          Node child = child_state(seq, node, c);
          child.pb = child.pnb = kNegInf;
          it->second = std::move(child);
        }
        const double from = c == last ? node.pb : total;
        it->second.pnb = LogAdd(it->second.pnb, from + lp);
      }
    }
    if (static_cast<int>(next.size()) > opt.beam) {
      std::vector<std::pair<double, const Labels*>> order;
      order.reserve(next.size());
      for (const auto& [seq, node] : next) {
        order.emplace_back(prune_score(node), &seq);
      }
      std::partial_sort(order.begin(), order.begin() + opt.beam, order.end(),
                        [](const auto& a, const auto& b) {
                          if (a.first != b.first) return a.first > b.first;
                          return *a.second > *b.second;
                        });
      std::map<Labels, Node> kept;
      for (int i = 0; i < opt.beam; ++i) {
        auto it = next.find(*order[i].second);
        kept.emplace(it->first, std::move(it->second));
      }
      beam = std::move(kept);
    } else {
      beam = std::move(next);
    }
  }

  std::vector<Hypothesis> hyps;
  for (const auto& [seq, node] : beam) {
    Hypothesis h;
    h.seq = seq;
    h.score = CtcLogProb(lattice, seq);
    if (h.score == kNegInf) continue;
    if (fuse) {
      h.lm_score = fusion->Score(seq);
      h.combined = h.score + lambda * h.lm_score +
                   bonus * fusion->CountWords(seq);
    } else {
      h.combined = h.score;
    }
    hyps.push_back(std::move(h));
  }
  std::sort(hyps.begin(), hyps.end(), HypothesisBefore);
  if (static_cast<int>(hyps.size()) > opt.nbest) hyps.resize(opt.nbest);
  return hyps;
}

inline std::vector<Hypothesis> BeamNbest(const LogitLattice& lattice, int beam,
                                         int n,
                                         const WordFusion* fusion = nullptr) {
  BeamOptions opt;
  opt.beam = beam;
  opt.nbest = n;
  return BeamNbest(lattice, opt, fusion);
}

// One JSON object per line: ids and scores of each hypothesis.
inline void DumpNbest(std::ostream& os, const std::string& utt_id,
                      const std::vector<Hypothesis>& hyps) {
  for (size_t r = 0; r < hyps.size(); ++r) {
    nlohmann::json j;
    j["id"] = utt_id;
    j["rank"] = r;
    j["seq"] = hyps[r].seq;
    j["score"] = hyps[r].score;
    j["lm_score"] = hyps[r].lm_score;
    j["combined"] = hyps[r].combined;
    os << j.dump() << "\n";
  }
}

}  // namespace jsaspg

#endif  // JSASPG_BEAM_SEARCH_HPP_
