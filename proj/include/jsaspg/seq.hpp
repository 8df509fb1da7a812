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

#ifndef JSASPG_SEQ_HPP_
#define JSASPG_SEQ_HPP_

#include <memory>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "jsaspg/common.hpp"

namespace jsaspg {

// Label ids as the CTC engine sees them: 0 is blank, real symbols 1..A.
using Labels = std::vector<int>;

inline constexpr int kBlank = 0;

enum class AlphabetKind { kPhoneme, kGrapheme, kWord };

inline const char* KindName(AlphabetKind k) {
  switch (k) {
    case AlphabetKind::kPhoneme: return "phoneme";
    case AlphabetKind::kGrapheme: return "grapheme";
    case AlphabetKind::kWord: return "word";
  }
  return "?";
}

inline AlphabetKind KindFromName(const std::string& s) {
  if (s == "phoneme") return AlphabetKind::kPhoneme;
  if (s == "grapheme") return AlphabetKind::kGrapheme;
  if (s == "word") return AlphabetKind::kWord;
  throw ConfigError("unknown alphabet kind '" + s + "'");
}

// Ordered inventory of distinct symbols. Symbol i (0-based in the list) has
// engine id i + 1; id 0 is the blank and never names a symbol.
class Alphabet {
 public:
  Alphabet() = default;
  Alphabet(AlphabetKind kind, std::vector<std::string> symbols)
      : kind_(kind), symbols_(std::move(symbols)) {
    if (symbols_.empty()) throw ConfigError("alphabet must not be empty");
    for (size_t i = 0; i < symbols_.size(); ++i) {
      if (symbols_[i].empty()) throw ConfigError("empty alphabet symbol");
      if (!index_.emplace(symbols_[i], static_cast<int>(i) + 1).second) {
        throw ConfigError("duplicate alphabet symbol '" + symbols_[i] + "'");
      }
    }
  }

  AlphabetKind kind() const { return kind_; }
  int size() const { return static_cast<int>(symbols_.size()); }
  const std::vector<std::string>& symbols() const { return symbols_; }

  const std::string& Symbol(int id) const {
    if (id < 1 || id > size()) throw DataError("symbol id out of range");
    return symbols_[id - 1];
  }
  bool Contains(const std::string& s) const { return index_.count(s) > 0; }
  int Id(const std::string& s) const {
    auto it = index_.find(s);
    if (it == index_.end()) throw DataError("unknown symbol '" + s + "'");
    return it->second;
  }

  std::string Render(const Labels& ids, const std::string& sep = " ") const {
    std::string out;
    for (size_t i = 0; i < ids.size(); ++i) {
      if (i) out += sep;
      out += Symbol(ids[i]);
    }
    return out;
  }

  bool operator==(const Alphabet& o) const {
    return kind_ == o.kind_ && symbols_ == o.symbols_;
  }
  bool operator!=(const Alphabet& o) const { return !(*this == o); }

 private:
  AlphabetKind kind_ = AlphabetKind::kPhoneme;
  std::vector<std::string> symbols_;
  std::unordered_map<std::string, int> index_;
};

// A blank-free label sequence tied to its alphabet.
struct SymbolSeq {
  Labels ids;
  std::shared_ptr<const Alphabet> alphabet;

  SymbolSeq() = default;
  SymbolSeq(Labels i, std::shared_ptr<const Alphabet> a)
      : ids(std::move(i)), alphabet(std::move(a)) {
    for (int id : ids) {
      if (id < 1 || (alphabet && id > alphabet->size())) {
        throw DataError("symbol sequence holds an id outside [1, A]");
      }
    }
  }
};

struct ErrorCounts {
  int substitutions = 0;
  int insertions = 0;
  int deletions = 0;
  int reference_length = 0;

  int distance() const { return substitutions + insertions + deletions; }
  double rate() const {
    return static_cast<double>(distance()) / std::max(1, reference_length);
  }
  ErrorCounts& operator+=(const ErrorCounts& o) {
    substitutions += o.substitutions;
    insertions += o.insertions;
    deletions += o.deletions;
    reference_length += o.reference_length;
    return *this;
  }
};

// Merges adjacent duplicates, then drops blanks.
inline Labels CollapsePath(const std::vector<int>& path) {
  Labels out;
  int prev = -1;
  for (int s : path) {
    if (s != prev && s != kBlank) out.push_back(s);
    prev = s;
  }
  return out;
}

inline int CountRepeats(const Labels& labels) {
  int r = 0;
  for (size_t i = 1; i < labels.size(); ++i) r += labels[i] == labels[i - 1];
  return r;
}

// With strict = false: label_len <= input_len. With strict = true the exact
// CTC condition, which needs a separating blank between repeated labels.
inline bool CtcLengthOk(int input_len, int label_len) {
  return label_len <= input_len;
}

inline bool CtcLengthOk(int input_len, const Labels& labels, bool strict) {
  const int need = static_cast<int>(labels.size()) +
                   (strict ? CountRepeats(labels) : 0);
  return need <= input_len;
}

// Minimal edit alignment; ties prefer substitution, then deletion.
inline ErrorCounts Levenshtein(const Labels& ref, const Labels& hyp) {
  const size_t n = ref.size(), m = hyp.size();
  struct Cell {
    int cost, s, i, d;
  };
  std::vector<Cell> prev(m + 1), cur(m + 1);
  for (size_t j = 0; j <= m; ++j) prev[j] = {int(j), 0, int(j), 0};
  for (size_t i = 1; i <= n; ++i) {
    cur[0] = {int(i), 0, 0, int(i)};
    for (size_t j = 1; j <= m; ++j) {
      const bool same = ref[i - 1] == hyp[j - 1];
      Cell best = prev[j - 1];
      best.cost += same ? 0 : 1;
      best.s += same ? 0 : 1;
      Cell del = prev[j];
      del.cost += 1;
      del.d += 1;
      if (del.cost < best.cost) best = del;
      Cell ins = cur[j - 1];
      ins.cost += 1;
      ins.i += 1;
      if (ins.cost < best.cost) best = ins;
      cur[j] = best;
    }
    std::swap(prev, cur);
  }
  ErrorCounts out;
  out.substitutions = prev[m].s;
  out.insertions = prev[m].i;
  out.deletions = prev[m].d;
  out.reference_length = static_cast<int>(n);
  return out;
}

inline ErrorCounts Levenshtein(const SymbolSeq& ref, const SymbolSeq& hyp) {
  if (ref.alphabet && hyp.alphabet && *ref.alphabet != *hyp.alphabet) {
    throw DataError("levenshtein: reference and hypothesis alphabets differ");
  }
  return Levenshtein(ref.ids, hyp.ids);
}

// Micro-averaged: total edits over total reference length.
inline double CorpusErrorRate(
    const std::vector<std::pair<Labels, Labels>>& pairs) {
  if (pairs.empty()) throw DataError("corpus error rate of an empty corpus");
  ErrorCounts total;
  for (const auto& [ref, hyp] : pairs) total += Levenshtein(ref, hyp);
  return total.rate();
}

// Splits a grapheme sequence into words on `separator`, dropping empty words.
inline std::vector<Labels> SplitWords(const Labels& graphemes, int separator) {
  std::vector<Labels> words;
  Labels cur;
  for (int g : graphemes) {
    if (g == separator) {
      if (!cur.empty()) words.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(g);
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));
  return words;
}

// Word strings of a grapheme sequence; symbols are concatenated.
inline std::vector<std::string> WordStrings(const Labels& graphemes,
                                            const Alphabet& alphabet,
                                            int separator) {
  std::vector<std::string> out;
  for (const auto& w : SplitWords(graphemes, separator)) {
    std::string s;
    for (int g : w) s += alphabet.Symbol(g);
    out.push_back(std::move(s));
  }
  return out;
}

// Maps word strings to ids of a shared word alphabet so that WER can run on
// the integer Levenshtein. Unknown words get fresh ids.
class WordInterner {
 public:
  Labels Intern(const std::vector<std::string>& words) {
    Labels out;
    out.reserve(words.size());
    for (const auto& w : words) {
      auto [it, fresh] = ids_.emplace(w, static_cast<int>(ids_.size()) + 1);
      out.push_back(it->second);
    }
    return out;
  }

 private:
  std::unordered_map<std::string, int> ids_;
};

}  // namespace jsaspg

#endif  // JSASPG_SEQ_HPP_
