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

#ifndef JSASPG_NGRAM_LM_HPP_
#define JSASPG_NGRAM_LM_HPP_

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "jsaspg/common.hpp"
#include "jsaspg/seq.hpp"

namespace jsaspg {

struct IdVectorHash {
  size_t operator()(const std::vector<int>& v) const {
    uint64_t h = 0x84222325cbf29ce4ULL ^ v.size();
    for (int x : v) h = MixSeed(h ^ static_cast<uint64_t>(x));
    return static_cast<size_t>(h);
  }
};

// Word n-gram model with interpolated Witten-Bell smoothing, stored in
// backoff (ARPA) form: explicit n-grams carry their smoothed probability and
// every observed history carries the weight given to its lower order.
// Probabilities are kept as log10 so that the text form round-trips exactly.
class NGramLM {
 public:
  static constexpr const char* kBos = "<s>";
  static constexpr const char* kEos = "</s>";
  static constexpr const char* kUnk = "<unk>";

  NGramLM() = default;

  static NGramLM Train(const std::vector<std::vector<std::string>>& corpus,
                       int order) {
    if (corpus.empty()) throw DataError("cannot train an LM on no sentences");
    if (order < 1) throw ConfigError("n-gram order must be >= 1");
    NGramLM lm;
    lm.order_ = order;
    std::vector<std::string> words;
    {
      std::map<std::string, int> seen;
      for (const auto& s : corpus) {
        for (const auto& w : s) {
          if (w == kBos || w == kEos || w == kUnk) {
            throw DataError("reserved token inside LM training text");
          }
          seen.emplace(w, 0);
        }
      }
      for (const auto& [w, _] : seen) words.push_back(w);
    }
    lm.SetVocabulary(words);

    // counts[k][history + word]
    std::vector<std::unordered_map<std::vector<int>, double, IdVectorHash>>
        counts(order + 1);
    for (const auto& s : corpus) {
      std::vector<int> toks{lm.bos_};
      for (const auto& w : s) toks.push_back(lm.WordId(w));
      toks.push_back(lm.eos_);
      for (size_t i = 1; i < toks.size(); ++i) {
        for (int k = 1; k <= order && static_cast<int>(i) - k + 1 >= 0; ++k) {
          std::vector<int> key(toks.begin() + (i - k + 1),
                               toks.begin() + i + 1);
          counts[k][key] += 1.0;
        }
      }
    }

    // Unigrams interpolate with the uniform distribution over predictable
    // tokens (everything except <s>), which gives <unk> its mass.
    const int predictable = static_cast<int>(lm.vocab_.size()) - 1;
    double total = 0.0;
    for (const auto& [k, c] : counts[1]) total += c;
    const double types = static_cast<double>(counts[1].size());
    std::vector<double> uni(lm.vocab_.size(), 0.0);
    for (int w = 0; w < static_cast<int>(lm.vocab_.size()); ++w) {
      if (w == lm.bos_) continue;
      auto it = counts[1].find({w});
      const double c = it == counts[1].end() ? 0.0 : it->second;
      uni[w] = (c + types / predictable) / (total + types);
    }
    lm.tables_.assign(order + 1, {});
    for (int w = 0; w < static_cast<int>(lm.vocab_.size()); ++w) {
      Entry e;
      e.log10_prob = w == lm.bos_ ? -99.0 : std::log10(uni[w]);
      lm.tables_[1][{w}] = e;
    }

    // Context statistics for each order >= 2.
    for (int k = 2; k <= order; ++k) {
      std::unordered_map<std::vector<int>, std::pair<double, double>,
                         IdVectorHash>
          ctx;  // history -> (count, distinct followers)
      for (const auto& [key, c] : counts[k]) {
        std::vector<int> h(key.begin(), key.end() - 1);
        auto& st = ctx[h];
        st.first += c;
        st.second += 1.0;
      }
      // Keys are visited in sorted order so lower-order lookups are ready.
      std::map<std::vector<int>, double> sorted(counts[k].begin(),
                                                counts[k].end());
      for (const auto& [key, c] : sorted) {
        std::vector<int> h(key.begin(), key.end() - 1);
        const auto& st = ctx[h];
        const std::vector<int> lower_hist(h.begin() + 1, h.end());
        const double lower = std::pow(10.0, lm.Log10Cond(lower_hist, key.back()));
        Entry e;
        e.log10_prob = std::log10((c + st.second * lower) / (st.first + st.second));
        lm.tables_[k][key] = e;
      }
      for (const auto& [h, st] : ctx) {
        auto it = lm.tables_[k - 1].find(h);
        if (it == lm.tables_[k - 1].end()) {
          throw NumericError("history missing from lower-order table");
        }
        it->second.log10_backoff = std::log10(st.second / (st.first + st.second));
      }
    }
    return lm;
  }

  int order() const { return order_; }
  int bos() const { return bos_; }
  int eos() const { return eos_; }
  int unk() const { return unk_; }
  const std::vector<std::string>& vocabulary() const { return vocab_; }

  int WordId(const std::string& w) const {
    auto it = index_.find(w);
    return it == index_.end() ? unk_ : it->second;
  }
  bool InVocabulary(const std::string& w) const {
    return index_.count(w) > 0 && w != kUnk;
  }

  std::vector<int> BeginContext() const { return {bos_}; }

  // Natural-log conditional probability of `word` after `context` (token ids,
  // oldest first). The context is truncated to the last order - 1 tokens; an
  // empty context gives the unigram probability.
  double LogProbNext(const std::vector<int>& context, int word) const {
    const size_t keep = std::min(context.size(), static_cast<size_t>(order_ - 1));
    std::vector<int> hist(context.end() - keep, context.end());
    return Log10Cond(hist, word) * M_LN10;
  }

  // Log-probability of the words followed by the end marker.
  double LogProb(const std::vector<std::string>& words,
                 bool include_end = true) const {
    std::vector<int> ctx = BeginContext();
    double lp = 0.0;
    for (const auto& w : words) {
      const int id = WordId(w);
      lp += LogProbNext(ctx, id);
      Advance(ctx, id);
    }
    if (include_end) lp += LogProbNext(ctx, eos_);
    return lp;
  }

  // Appends a token and trims the context to order - 1 tokens.
  void Advance(std::vector<int>& ctx, int word) const {
    ctx.push_back(word);
    if (static_cast<int>(ctx.size()) > order_ - 1) {
      ctx.erase(ctx.begin(), ctx.end() - std::max(0, order_ - 1));
    }
  }

  double Log10Backoff(const std::vector<int>& history) const {
    if (history.empty() || static_cast<int>(history.size()) >= order_) return 0.0;
    auto it = tables_[history.size()].find(history);
    return it == tables_[history.size()].end() ? 0.0 : it->second.log10_backoff;
  }

  bool HasNgram(const std::vector<int>& ngram) const {
    if (ngram.empty() || static_cast<int>(ngram.size()) > order_) return false;
    return tables_[ngram.size()].count(ngram) > 0;
  }

  void WriteArpa(std::ostream& os) const {
    os << "\\data\\\n";
    for (int k = 1; k <= order_; ++k) {
      os << "ngram " << k << "=" << tables_[k].size() << "\n";
    }
    char buf[64];
    for (int k = 1; k <= order_; ++k) {
      os << "\n\\" << k << "-grams:\n";
      std::map<std::vector<std::string>, const Entry*> sorted;
      for (const auto& [key, e] : tables_[k]) {
        std::vector<std::string> ws;
        for (int id : key) ws.push_back(vocab_[id]);
        sorted.emplace(std::move(ws), &e);
      }
      for (const auto& [ws, e] : sorted) {
        std::snprintf(buf, sizeof(buf), "%.17g", e->log10_prob);
        os << buf << "\t";
        for (size_t i = 0; i < ws.size(); ++i) os << (i ? " " : "") << ws[i];
        if (k < order_ && e->log10_backoff != 0.0) {
          std::snprintf(buf, sizeof(buf), "%.17g", e->log10_backoff);
          os << "\t" << buf;
        }
        os << "\n";
      }
    }
    os << "\n\\end\\\n";
  }

  static NGramLM ReadArpa(std::istream& is) {
    NGramLM lm;
    std::string line;
    std::vector<std::pair<std::vector<std::string>, Entry>> entries;
    int section = 0;
    bool in_data = false;
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      if (line == "\\data\\") {
        in_data = true;
        continue;
      }
      if (!in_data) continue;
      if (line.rfind("ngram ", 0) == 0) {
        lm.order_ = std::max(lm.order_, std::stoi(line.substr(6)));
        continue;
      }
      if (line == "\\end\\") break;
      if (line[0] == '\\') {
        section = std::stoi(line.substr(1));
        continue;
      }
      if (section == 0) throw DataError("malformed ARPA file");
      std::istringstream ls(line);
      std::string prob_s, ngram_s, bow_s;
      std::getline(ls, prob_s, '\t');
      std::getline(ls, ngram_s, '\t');
      std::getline(ls, bow_s, '\t');
      std::istringstream ws(ngram_s);
      std::vector<std::string> words;
      for (std::string w; ws >> w;) words.push_back(w);
      if (static_cast<int>(words.size()) != section) {
        throw DataError("ARPA n-gram order mismatch: " + line);
      }
      Entry e;
      e.log10_prob = std::stod(prob_s);
      if (!bow_s.empty()) e.log10_backoff = std::stod(bow_s);
      entries.emplace_back(std::move(words), e);
    }
    if (lm.order_ < 1) throw DataError("ARPA file declares no n-grams");
    std::vector<std::string> words;
    for (const auto& [ws, e] : entries) {
      if (ws.size() == 1 && ws[0] != kBos && ws[0] != kEos && ws[0] != kUnk) {
        words.push_back(ws[0]);
      }
    }
    std::sort(words.begin(), words.end());
    lm.SetVocabulary(words);
    lm.tables_.assign(lm.order_ + 1, {});
    for (const auto& [ws, e] : entries) {
      std::vector<int> key;
      for (const auto& w : ws) {
        auto it = lm.index_.find(w);
        if (it == lm.index_.end()) throw DataError("ARPA word not in 1-grams: " + w);
        key.push_back(it->second);
      }
      lm.tables_[key.size()][key] = e;
    }
    return lm;
  }

  // Lines before \data\ are free text; `header` goes there.
  void Save(const std::string& path, const std::string& header = "") const {
    std::ofstream os(path);
    if (!os) throw DataError("cannot write LM file " + path);
    if (!header.empty()) os << header << "\n\n";
    WriteArpa(os);
  }
  static NGramLM Load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw DataError("missing LM file " + path);
    return ReadArpa(is);
  }

 private:
  struct Entry {
    double log10_prob = 0.0;
    double log10_backoff = 0.0;
  };

  void SetVocabulary(const std::vector<std::string>& words) {
    vocab_ = {kBos, kEos, kUnk};
    vocab_.insert(vocab_.end(), words.begin(), words.end());
    index_.clear();
    for (size_t i = 0; i < vocab_.size(); ++i) {
      index_.emplace(vocab_[i], static_cast<int>(i));
    }
    bos_ = 0;
    eos_ = 1;
    unk_ = 2;
  }

  double Log10Cond(const std::vector<int>& hist, int word) const {
    std::vector<int> key = hist;
    key.push_back(word);
    if (static_cast<int>(key.size()) <= order_) {
      auto it = tables_[key.size()].find(key);
      if (it != tables_[key.size()].end()) return it->second.log10_prob;
    }
    if (hist.empty()) return -99.0;
    const std::vector<int> shorter(hist.begin() + 1, hist.end());
    return Log10Backoff(hist) + Log10Cond(shorter, word);
  }

  int order_ = 0;
  int bos_ = 0, eos_ = 1, unk_ = 2;
  std::vector<std::string> vocab_;
  std::unordered_map<std::string, int> index_;
  std::vector<std::unordered_map<std::vector<int>, Entry, IdVectorHash>>
      tables_;
};

}  // namespace jsaspg

#endif  // JSASPG_NGRAM_LM_HPP_
