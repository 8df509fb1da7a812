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

#include <random>

#include "gtest/gtest.h"
#include "jsaspg/seq.hpp"

namespace jsaspg {
namespace {

TEST(CollapsePath, MergesRepeatsThenDropsBlanks) {
  EXPECT_EQ(CollapsePath({1, 1, 0, 1, 2}), (Labels{1, 1, 2}));
  EXPECT_EQ(CollapsePath({0, 0, 0}), Labels{});
  EXPECT_EQ(CollapsePath({2, 2, 2, 0, 0}), Labels{2});
  EXPECT_EQ(CollapsePath({}), Labels{});
}

TEST(CollapsePath, RandomPathsAreBlankFreeAndIdempotent) {
  Rng rng(7);
  for (int trial = 0; trial < 2000; ++trial) {
    const int A = UniformInt(rng, 1, 4);
    const int len = UniformInt(rng, 0, 10);
    std::vector<int> path(len);
    for (int& p : path) p = UniformInt(rng, 0, A);
    const Labels c = CollapsePath(path);
    for (int l : c) EXPECT_NE(l, kBlank);
    // Re-collapsing the output with blanks between symbols gives it back.
    std::vector<int> again;
    for (int l : c) {
      again.push_back(l);
      again.push_back(0);
    }
    EXPECT_EQ(CollapsePath(again), c);
    // Collapse does not see where blanks were: moving blanks inside runs of
    // blanks or duplicating symbols of a run leaves the result unchanged.
    std::vector<int> stretched;
    for (int p : path) {
      stretched.push_back(p);
      if (UniformInt(rng, 0, 1)) stretched.push_back(p);
    }
    EXPECT_EQ(CollapsePath(stretched), c);
  }
}

TEST(Alphabet, RejectsDuplicatesAndEmptySymbols) {
  EXPECT_THROW(Alphabet(AlphabetKind::kPhoneme, {"a", "a"}), ConfigError);
  EXPECT_THROW(Alphabet(AlphabetKind::kPhoneme, {"a", ""}), ConfigError);
  EXPECT_THROW(Alphabet(AlphabetKind::kPhoneme, {}), ConfigError);
  Alphabet a(AlphabetKind::kGrapheme, {"x", "y", "_"});
  EXPECT_EQ(a.size(), 3);
  EXPECT_EQ(a.Id("x"), 1);
  EXPECT_EQ(a.Symbol(3), "_");
  EXPECT_EQ(a.Render({1, 2, 3}, ""), "xy_");
  EXPECT_THROW(a.Symbol(0), DataError);
  EXPECT_THROW(a.Id("z"), DataError);
}

TEST(SymbolSeq, RejectsBlankAndOutOfRange) {
  auto a = std::make_shared<Alphabet>(AlphabetKind::kPhoneme, std::vector<std::string>{"p", "q"});
  EXPECT_NO_THROW(SymbolSeq({1, 2}, a));
  EXPECT_THROW(SymbolSeq({0}, a), DataError);
  EXPECT_THROW(SymbolSeq({3}, a), DataError);
}

TEST(Levenshtein, HandExamples) {
  EXPECT_EQ(Levenshtein({1, 2, 3}, {1, 2, 3}).distance(), 0);
  const ErrorCounts sub = Levenshtein({1, 2, 3}, {1, 4, 3});
  EXPECT_EQ(sub.substitutions, 1);
  EXPECT_EQ(sub.insertions, 0);
  EXPECT_EQ(sub.deletions, 0);
  const ErrorCounts del = Levenshtein({1, 2, 3}, {});
  EXPECT_EQ(del.deletions, 3);
  EXPECT_EQ(del.reference_length, 3);
  const ErrorCounts ins = Levenshtein({}, {4, 4});
  EXPECT_EQ(ins.insertions, 2);
  EXPECT_DOUBLE_EQ(ins.rate(), 2.0);  // max(1, 0) denominator
}

TEST(Levenshtein, AlphabetMismatchThrows) {
  auto a = std::make_shared<Alphabet>(AlphabetKind::kPhoneme, std::vector<std::string>{"p"});
  auto b = std::make_shared<Alphabet>(AlphabetKind::kGrapheme, std::vector<std::string>{"p"});
  EXPECT_THROW(Levenshtein(SymbolSeq({1}, a), SymbolSeq({1}, b)), DataError);
  EXPECT_EQ(Levenshtein(SymbolSeq({1}, a), SymbolSeq({}, a)).distance(), 1);
}

// Plain recursive edit distance, exponential but fine for short inputs.
int NaiveDistance(const Labels& a, size_t i, const Labels& b, size_t j) {
  if (i == a.size()) return static_cast<int>(b.size() - j);
  if (j == b.size()) return static_cast<int>(a.size() - i);
  const int match = NaiveDistance(a, i + 1, b, j + 1) + (a[i] != b[j]);
  return std::min({match, NaiveDistance(a, i + 1, b, j) + 1, NaiveDistance(a, i, b, j + 1) + 1});
}

TEST(Levenshtein, MatchesNaiveRecursionAndTriangleInequality) {
  Rng rng(11);
  auto rand_seq = [&] {
    Labels s(UniformInt(rng, 0, 6));
    for (int& v : s) v = UniformInt(rng, 1, 3);
    return s;
  };
  for (int trial = 0; trial < 500; ++trial) {
    const Labels a = rand_seq(), b = rand_seq(), c = rand_seq();
    const ErrorCounts ab = Levenshtein(a, b);
    EXPECT_EQ(ab.distance(), NaiveDistance(a, 0, b, 0));
    EXPECT_EQ(ab.reference_length, static_cast<int>(a.size()));
    EXPECT_EQ(ab.distance(), Levenshtein(b, a).distance());
    EXPECT_EQ(static_cast<int>(a.size()) - ab.deletions - ab.substitutions +
                  ab.insertions + ab.substitutions,
              static_cast<int>(b.size()));
    EXPECT_LE(Levenshtein(a, c).distance(), ab.distance() + Levenshtein(b, c).distance());
  }
}

TEST(CorpusErrorRate, MicroAverage) {
  EXPECT_DOUBLE_EQ(CorpusErrorRate({{{1}, {1}}, {{2}, {3}}}), 0.5);
  EXPECT_DOUBLE_EQ(CorpusErrorRate({{{1, 2}, {1, 2}}, {{3}, {3}}}), 0.0);
  EXPECT_DOUBLE_EQ(CorpusErrorRate({{{1, 2, 3}, {1, 2}}, {{4}, {5}}}), 0.5);
  EXPECT_THROW(CorpusErrorRate({}), DataError);
}

TEST(CtcLengthOk, LooseAndStrict) {
  EXPECT_TRUE(CtcLengthOk(5, 3));
  EXPECT_FALSE(CtcLengthOk(2, 3));
  EXPECT_TRUE(CtcLengthOk(2, Labels{1, 1}, false));
  EXPECT_FALSE(CtcLengthOk(2, Labels{1, 1}, true));
  EXPECT_TRUE(CtcLengthOk(3, Labels{1, 1}, true));
  EXPECT_EQ(CountRepeats({1, 1, 2, 2, 2, 1}), 3);
}

TEST(Words, SplitOnSeparatorAndIntern) {
  Alphabet g(AlphabetKind::kGrapheme, {"a", "b", "_"});
  const Labels y{1, 2, 3, 3, 2, 3};
  EXPECT_EQ(SplitWords(y, 3), (std::vector<Labels>{{1, 2}, {2}}));
  EXPECT_EQ(WordStrings(y, g, 3), (std::vector<std::string>{"ab", "b"}));
  WordInterner w;
  EXPECT_EQ(w.Intern({"ab", "b", "ab"}), (Labels{1, 2, 1}));
  EXPECT_EQ(w.Intern({"c"}), Labels{3});
}

}  // namespace
}  // namespace jsaspg
