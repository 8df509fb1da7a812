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

#ifndef JSASPG_SYNTH_HPP_
#define JSASPG_SYNTH_HPP_

#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "jsaspg/common.hpp"
#include "jsaspg/dataset.hpp"
#include "jsaspg/seq.hpp"

#include "json.hpp"

namespace jsaspg {

inline constexpr const char* kSilence = "sil";
inline constexpr const char* kWordSeparator = "_";

// Named acoustic prototypes shared across languages. Row i belongs to
// names[i]; the last row is the inter-word pause.
struct PhonemeBank {
  std::vector<std::string> names;
  Matrix prototypes;

  int Index(const std::string& name) const {
    for (size_t i = 0; i < names.size(); ++i) {
      if (names[i] == name) return static_cast<int>(i);
    }
    throw DataError("phoneme '" + name + "' not in bank");
  }
};

inline PhonemeBank MakePhonemeBank(int size, int dim, uint64_t seed,
                                   double scale = 1.0) {
  if (size < 1 || dim < 1) throw ConfigError("bank size and dim must be >= 1");
  PhonemeBank bank;
  Rng rng(DeriveSeed(seed, 0xba4c));
  bank.prototypes.resize(size + 1, dim);
  for (int i = 0; i < size; ++i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "p%02d", i);
    bank.names.emplace_back(buf);
    for (int d = 0; d < dim; ++d) {
      bank.prototypes(i, d) = RoundToFloat(scale * Gaussian(rng));
    }
  }
  bank.names.emplace_back(kSilence);
  bank.prototypes.row(size).setZero();
  return bank;
}

struct SynthSpec {
  uint64_t seed = 1;
  int num_phonemes = 12;       // A_p, excluding the pause
  int num_graphemes = 16;      // letters, excluding the separator
  int vocab_size = 120;
  int word_len_min = 2, word_len_max = 8;      // graphemes
  int phones_min = 2, phones_max = 4;          // phonemes per word
  int frames_min = 2, frames_max = 4;          // frames per phoneme
  int feature_dim = 8;
  double noise = 0.5;
  double homophone_rate = 0.05;
  double weak_label_error = 0.1;               // epsilon
  int sentence_min = 2, sentence_max = 5;
  int shifted_sentence_min = 3, shifted_sentence_max = 7;
  double unigram_temperature = 1.0;            // Zipf exponent is 1 / T
  int alternate_spellings = 5;                 // phonemes with two spellings
  double accent_fraction = 0.0;                // phonemes realized off-prototype
  double accent_strength = 0.0;
  double shifted_vocab_fraction = 0.35;        // words only the shifted domain uses
  double in_only_vocab_fraction = 0.25;        // words only the in domain uses
  bool pause_between_words = true;
  std::vector<int> bank_phonemes;              // bank rows used; empty = first A_p

  void Validate() const {
    if (frames_min < 1 || frames_max < frames_min) throw ConfigError("bad frame range");
    if (noise < 0) throw ConfigError("noise must be >= 0");
    if (weak_label_error < 0 || weak_label_error > 1) throw ConfigError("epsilon must lie in [0,1]");
    if (homophone_rate < 0 || homophone_rate > 1) throw ConfigError("homophone rate must lie in [0,1]");
    if (num_phonemes < 1 || num_graphemes < 1 || vocab_size < 1) throw ConfigError("inventories must be nonempty");
    if (phones_min < 1 || phones_max < phones_min) throw ConfigError("bad phonemes-per-word range");
    if (sentence_min < 1 || sentence_max < sentence_min) throw ConfigError("bad sentence range");
    if (shifted_sentence_min < 1 || shifted_sentence_max < shifted_sentence_min) throw ConfigError("bad shifted sentence range");
    if (!bank_phonemes.empty() && static_cast<int>(bank_phonemes.size()) != num_phonemes) {
      throw ConfigError("bank_phonemes must list num_phonemes entries");
    }
  }
};

struct LexiconEntry {
  std::string text;
  Labels graphemes;  // without separators
  Labels phonemes;
};

struct SynthLanguage {
  SynthSpec spec;
  std::shared_ptr<const Alphabet> phonemes;   // includes the pause if enabled
  std::shared_ptr<const Alphabet> graphemes;  // letters + separator
  int separator = 0;
  int silence = 0;                            // phoneme id of the pause, 0 if none
  PhonemeBank bank;                           // shared prototypes
  Matrix realization;                         // per phoneme id (row id - 1) mean frame
  std::vector<LexiconEntry> lexicon;
  std::vector<double> in_unigram;             // over lexicon indices
  std::vector<double> shifted_unigram;
};

namespace synth_detail {

inline std::vector<double> Zipf(const std::vector<int>& ranked, int vocab,
                                double temperature) {
  std::vector<double> p(vocab, 0.0);
  double z = 0.0;
  for (size_t r = 0; r < ranked.size(); ++r) {
    const double w = std::pow(static_cast<double>(r + 1), -1.0 / temperature);
    p[ranked[r]] = w;
    z += w;
  }
  for (double& v : p) v /= z;
  return p;
}

template <typename T>
void Shuffle(std::vector<T>& v, Rng& rng) {
  for (size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[static_cast<size_t>(UniformInt(rng, 0, int(i) - 1))]);
  }
}

}  // namespace synth_detail

// Builds a language: a phonemic orthography where each phoneme has a primary
// letter and some phonemes have a second spelling (a spare letter or the
// doubled primary letter) chosen per word, a lexicon, and two unigram word
// distributions (in-domain and shifted). Deterministic given the spec.
inline SynthLanguage GenLanguage(const SynthSpec& spec,
                                 const PhonemeBank* shared_bank = nullptr) {
  spec.Validate();
  using namespace synth_detail;
  SynthLanguage lang;
  lang.spec = spec;
  Rng rng(DeriveSeed(spec.seed, 0x1a49));
  lang.bank = shared_bank ? *shared_bank
                          : MakePhonemeBank(spec.num_phonemes, spec.feature_dim,
                                            spec.seed);
  if (lang.bank.prototypes.cols() != spec.feature_dim) {
    throw ConfigError("bank feature dimension differs from the spec");
  }
  std::vector<int> rows = spec.bank_phonemes;
  if (rows.empty()) {
    for (int i = 0; i < spec.num_phonemes; ++i) rows.push_back(i);
  }
  const int bank_real = static_cast<int>(lang.bank.names.size()) - 1;
  for (int r : rows) {
    if (r < 0 || r >= bank_real) throw ConfigError("bank phoneme index out of range");
  }
  std::vector<std::string> ph_names;
  for (int r : rows) ph_names.push_back(lang.bank.names[r]);
  if (spec.pause_between_words) ph_names.push_back(kSilence);
  lang.phonemes = std::make_shared<Alphabet>(AlphabetKind::kPhoneme, ph_names);
  if (spec.pause_between_words) lang.silence = lang.phonemes->Id(kSilence);

  if (spec.num_graphemes < spec.num_phonemes) {
    throw ConfigError("need at least one letter per phoneme");
  }
  if (spec.num_graphemes > 26) throw ConfigError("at most 26 letters");
  std::vector<std::string> letters;
  for (int i = 0; i < spec.num_graphemes; ++i) letters.emplace_back(1, char('a' + i));
  letters.emplace_back(kWordSeparator);
  lang.graphemes = std::make_shared<Alphabet>(AlphabetKind::kGrapheme, letters);
  lang.separator = lang.graphemes->Id(kWordSeparator);

  // Orthography.
  const int A = spec.num_phonemes;
  std::vector<int> letter_perm(spec.num_graphemes);
  for (int i = 0; i < spec.num_graphemes; ++i) letter_perm[i] = i + 1;
  Shuffle(letter_perm, rng);
  std::vector<Labels> primary(A + 1), alternate(A + 1);
  for (int p = 1; p <= A; ++p) primary[p] = {letter_perm[p - 1]};
  std::vector<int> ph_perm;
  for (int p = 1; p <= A; ++p) ph_perm.push_back(p);
  Shuffle(ph_perm, rng);
  int spare = A;
  for (int i = 0; i < std::min(spec.alternate_spellings, A); ++i) {
    const int p = ph_perm[i];
    if (spare < spec.num_graphemes) {
      alternate[p] = {letter_perm[spare++]};
    } else {
      alternate[p] = {primary[p][0], primary[p][0]};
    }
  }

  // Realizations: accented phonemes drift toward a partner prototype.
  const int n_ph = lang.phonemes->size();
  lang.realization.resize(n_ph, spec.feature_dim);
  for (int id = 1; id <= n_ph; ++id) {
    lang.realization.row(id - 1) =
        lang.bank.prototypes.row(lang.bank.Index(lang.phonemes->Symbol(id)));
  }
  {
    std::vector<int> order = ph_perm;
    Rng arng(DeriveSeed(spec.seed, 0xacc));
    Shuffle(order, arng);
    const int n_acc = static_cast<int>(std::lround(spec.accent_fraction * A));
    for (int i = 0; i < n_acc && A > 1; ++i) {
      const int p = order[i];
      int partner = UniformInt(arng, 1, A - 1);
      if (partner >= p) ++partner;
      const auto own = lang.bank.prototypes.row(lang.bank.Index(lang.phonemes->Symbol(p)));
      const auto other =
          lang.bank.prototypes.row(lang.bank.Index(lang.phonemes->Symbol(partner)));
      lang.realization.row(p - 1) =
          (1.0 - spec.accent_strength) * own + spec.accent_strength * other;
    }
    for (Eigen::Index i = 0; i < lang.realization.size(); ++i) {
      lang.realization.data()[i] = RoundToFloat(lang.realization.data()[i]);
    }
  }

  // Lexicon.
  std::set<Labels> used_phones;
  std::set<Labels> used_spellings;
  auto spell = [&](const Labels& phones, const std::vector<bool>& alt) {
    Labels g;
    for (size_t i = 0; i < phones.size(); ++i) {
      const Labels& part = alt[i] && !alternate[phones[i]].empty()
                               ? alternate[phones[i]]
                               : primary[phones[i]];
      g.insert(g.end(), part.begin(), part.end());
    }
    return g;
  };
  int guard = 0;
  while (static_cast<int>(lang.lexicon.size()) < spec.vocab_size) {
    if (++guard > 200000) {
      throw ConfigError("inventory too small for the requested vocabulary");
    }
    LexiconEntry e;
    const bool homophone = !lang.lexicon.empty() && Uniform01(rng) < spec.homophone_rate;
    std::vector<bool> alt;
    if (homophone) {
      const auto& src = lang.lexicon[UniformInt(rng, 0, int(lang.lexicon.size()) - 1)];
      e.phonemes = src.phonemes;
      for (int p : e.phonemes) alt.push_back(!alternate[p].empty() && Uniform01(rng) < 0.5);
    } else {
      const int len = UniformInt(rng, spec.phones_min, spec.phones_max);
      int prev = 0;
      for (int i = 0; i < len; ++i) {
        int p = UniformInt(rng, 1, A);
        if (A > 1) {
          while (p == prev) p = UniformInt(rng, 1, A);
        }
        e.phonemes.push_back(p);
        prev = p;
        alt.push_back(!alternate[p].empty() && Uniform01(rng) < 0.5);
      }
      if (used_phones.count(e.phonemes)) continue;
    }
    e.graphemes = spell(e.phonemes, alt);
    const int gl = static_cast<int>(e.graphemes.size());
    if (gl < spec.word_len_min || gl > spec.word_len_max) continue;
    if (used_spellings.count(e.graphemes)) continue;
    used_phones.insert(e.phonemes);
    used_spellings.insert(e.graphemes);
    for (int g : e.graphemes) e.text += lang.graphemes->Symbol(g);
    lang.lexicon.push_back(std::move(e));
  }

  // Domains: [core | in-only | shifted-only] over a random word order.
  const int V = spec.vocab_size;
  std::vector<int> order(V);
  for (int i = 0; i < V; ++i) order[i] = i;
  Shuffle(order, rng);
  const int n_shift = static_cast<int>(std::lround(spec.shifted_vocab_fraction * V));
  const int n_in_only = static_cast<int>(std::lround(spec.in_only_vocab_fraction * V));
  const int n_core = std::max(0, V - n_shift - n_in_only);
  std::vector<int> core(order.begin(), order.begin() + n_core);
  std::vector<int> in_only(order.begin() + n_core, order.begin() + n_core + n_in_only);
  std::vector<int> shift_only(order.begin() + n_core + n_in_only, order.end());
  std::vector<int> in_rank = core;
  in_rank.insert(in_rank.end(), in_only.begin(), in_only.end());
  std::vector<int> shift_rank = shift_only;
  shift_rank.insert(shift_rank.end(), core.begin(), core.end());
  if (in_rank.empty() || shift_rank.empty()) {
    throw ConfigError("vocabulary split leaves a domain without words");
  }
  lang.in_unigram = Zipf(in_rank, V, spec.unigram_temperature);
  lang.shifted_unigram = Zipf(shift_rank, V, spec.unigram_temperature);
  return lang;
}

enum class Domain { kIn, kShifted };

inline const char* DomainName(Domain d) { return d == Domain::kIn ? "in" : "shifted"; }

// Sentence as lexicon indices.
inline std::vector<int> SampleSentence(const SynthLanguage& lang, Domain domain,
                                       Rng& rng) {
  const auto& s = lang.spec;
  const bool in = domain == Domain::kIn;
  const int len = in ? UniformInt(rng, s.sentence_min, s.sentence_max)
                     : UniformInt(rng, s.shifted_sentence_min, s.shifted_sentence_max);
  const auto& dist = in ? lang.in_unigram : lang.shifted_unigram;
  std::vector<int> words(len);
  for (int& w : words) w = SampleIndex(rng, dist);
  return words;
}

inline Labels SpellSentence(const SynthLanguage& lang, const std::vector<int>& words) {
  Labels y;
  for (size_t i = 0; i < words.size(); ++i) {
    if (i) y.push_back(lang.separator);
    const auto& g = lang.lexicon[words[i]].graphemes;
    y.insert(y.end(), g.begin(), g.end());
  }
  return y;
}

inline Labels PronounceSentence(const SynthLanguage& lang, const std::vector<int>& words) {
  Labels h;
  for (size_t i = 0; i < words.size(); ++i) {
    if (i && lang.silence) h.push_back(lang.silence);
    const auto& p = lang.lexicon[words[i]].phonemes;
    h.insert(h.end(), p.begin(), p.end());
  }
  return h;
}

inline std::vector<std::string> SentenceWords(const SynthLanguage& lang,
                                              const std::vector<int>& words) {
  std::vector<std::string> out;
  for (int w : words) out.push_back(lang.lexicon[w].text);
  return out;
}

// Uniform substitution of non-pause phonemes at rate epsilon.
inline Labels CorruptPhonemes(const SynthLanguage& lang, const Labels& h,
                              double epsilon, Rng& rng) {
  Labels out = h;
  const int A = lang.spec.num_phonemes;
  for (int& p : out) {
    if (p == lang.silence || A < 2) continue;
    if (Uniform01(rng) < epsilon) {
      int q = UniformInt(rng, 1, A - 1);
      if (q >= p) ++q;
      p = q;
    }
  }
  return out;
}

inline Matrix RenderFrames(const SynthLanguage& lang, const Labels& h, Rng& rng) {
  const auto& s = lang.spec;
  std::vector<int> durations(h.size());
  int T = 0;
  for (size_t i = 0; i < h.size(); ++i) {
    durations[i] = UniformInt(rng, s.frames_min, s.frames_max);
    T += durations[i];
  }
  Matrix x(std::max(T, 1), s.feature_dim);
  x.setZero();
  int t = 0;
  for (size_t i = 0; i < h.size(); ++i) {
    for (int k = 0; k < durations[i]; ++k, ++t) {
      for (int d = 0; d < s.feature_dim; ++d) {
        x(t, d) = RoundToFloat(lang.realization(h[i] - 1, d) + s.noise * Gaussian(rng));
      }
    }
  }
  return x;
}

// Utterances: sentence, pronunciation, frames, spelling. The first
// `supervised` utterances carry a weak (corrupted) phoneme label.
inline Dataset GenCorpus(const SynthLanguage& lang, int n_utts, Domain domain,
                         int supervised, Rng& rng, const std::string& id_prefix = "utt") {
  if (n_utts < 1) throw ConfigError("corpus needs at least one utterance");
  Dataset out;
  out.reserve(n_utts);
  for (int i = 0; i < n_utts; ++i) {
    const auto words = SampleSentence(lang, domain, rng);
    UtteranceRecord r;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "-%05d", i);
    r.id = id_prefix + buf;
    r.h_true = PronounceSentence(lang, words);
    r.y = SpellSentence(lang, words);
    r.x = RenderFrames(lang, *r.h_true, rng);
    if (i < supervised) {
      Rng crng(DeriveSeed(lang.spec.seed, 0xc044, i));
      r.h_weak = CorruptPhonemes(lang, *r.h_true, lang.spec.weak_label_error, crng);
    }
    r.domain = DomainName(domain);
    out.push_back(std::move(r));
  }
  return out;
}

// Text-only sentences (word strings) for LM training and adaptation.
inline std::vector<std::vector<int>> GenSentences(const SynthLanguage& lang, int n,
                                                  Domain domain, Rng& rng) {
  std::vector<std::vector<int>> out(n);
  for (auto& s : out) s = SampleSentence(lang, domain, rng);
  return out;
}

inline nlohmann::json SpecToJson(const SynthSpec& s) {
  return {{"seed", s.seed},
          {"num_phonemes", s.num_phonemes},
          {"num_graphemes", s.num_graphemes},
          {"vocab_size", s.vocab_size},
          {"word_len", {s.word_len_min, s.word_len_max}},
          {"phones_per_word", {s.phones_min, s.phones_max}},
          {"frames_per_phoneme", {s.frames_min, s.frames_max}},
          {"feature_dim", s.feature_dim},
          {"noise", s.noise},
          {"homophone_rate", s.homophone_rate},
          {"weak_label_error", s.weak_label_error},
          {"sentence_len", {s.sentence_min, s.sentence_max}},
          {"shifted_sentence_len", {s.shifted_sentence_min, s.shifted_sentence_max}},
          {"unigram_temperature", s.unigram_temperature},
          {"alternate_spellings", s.alternate_spellings},
          {"accent_fraction", s.accent_fraction},
          {"accent_strength", s.accent_strength},
          {"shifted_vocab_fraction", s.shifted_vocab_fraction},
          {"in_only_vocab_fraction", s.in_only_vocab_fraction},
          {"pause_between_words", s.pause_between_words},
          {"bank_phonemes", s.bank_phonemes}};
}

inline SynthSpec SpecFromJson(const nlohmann::json& j, SynthSpec s = {}) {
  auto pair = [&](const char* key, int& lo, int& hi) {
    if (j.contains(key)) {
      lo = j[key].at(0).get<int>();
      hi = j[key].at(1).get<int>();
    }
  };
  s.seed = j.value("seed", s.seed);
  s.num_phonemes = j.value("num_phonemes", s.num_phonemes);
  s.num_graphemes = j.value("num_graphemes", s.num_graphemes);
  s.vocab_size = j.value("vocab_size", s.vocab_size);
  pair("word_len", s.word_len_min, s.word_len_max);
  pair("phones_per_word", s.phones_min, s.phones_max);
  pair("frames_per_phoneme", s.frames_min, s.frames_max);
  s.feature_dim = j.value("feature_dim", s.feature_dim);
  s.noise = j.value("noise", s.noise);
  s.homophone_rate = j.value("homophone_rate", s.homophone_rate);
  s.weak_label_error = j.value("weak_label_error", s.weak_label_error);
  pair("sentence_len", s.sentence_min, s.sentence_max);
  pair("shifted_sentence_len", s.shifted_sentence_min, s.shifted_sentence_max);
  s.unigram_temperature = j.value("unigram_temperature", s.unigram_temperature);
  s.alternate_spellings = j.value("alternate_spellings", s.alternate_spellings);
  s.accent_fraction = j.value("accent_fraction", s.accent_fraction);
  s.accent_strength = j.value("accent_strength", s.accent_strength);
  s.shifted_vocab_fraction = j.value("shifted_vocab_fraction", s.shifted_vocab_fraction);
  s.in_only_vocab_fraction = j.value("in_only_vocab_fraction", s.in_only_vocab_fraction);
  s.pause_between_words = j.value("pause_between_words", s.pause_between_words);
  if (j.contains("bank_phonemes")) s.bank_phonemes = j["bank_phonemes"].get<std::vector<int>>();
  s.Validate();
  return s;
}

inline nlohmann::json LanguageManifest(const SynthLanguage& lang) {
  nlohmann::json lex = nlohmann::json::array();
  for (const auto& e : lang.lexicon) {
    lex.push_back({{"word", e.text}, {"graphemes", e.graphemes}, {"phonemes", e.phonemes}});
  }
  auto mat = [](const Matrix& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      std::vector<double> r(m.cols());
      for (Eigen::Index d = 0; d < m.cols(); ++d) r[d] = m(i, d);
      rows.push_back(r);
    }
    return rows;
  };
  return {{"spec", SpecToJson(lang.spec)},
          {"phonemes", lang.phonemes->symbols()},
          {"graphemes", lang.graphemes->symbols()},
          {"separator", lang.separator},
          {"silence", lang.silence},
          {"bank_names", lang.bank.names},
          {"prototypes", mat(lang.bank.prototypes)},
          {"realization", mat(lang.realization)},
          {"lexicon", lex},
          {"in_unigram", lang.in_unigram},
          {"shifted_unigram", lang.shifted_unigram}};
}

// Out-of-vocabulary token rate of `test` against the word types of `ref`.
inline double OovRate(const std::vector<std::vector<int>>& ref,
                      const std::vector<std::vector<int>>& test) {
  std::set<int> seen;
  for (const auto& s : ref) seen.insert(s.begin(), s.end());
  int oov = 0, total = 0;
  for (const auto& s : test) {
    for (int w : s) {
      ++total;
      oov += seen.count(w) == 0;
    }
  }
  return total ? static_cast<double>(oov) / total : 0.0;
}


// Reference benchmark: a shared phoneme bank, pretraining languages that
// each miss a slice of it, and one target language.
struct BenchmarkPreset {
  std::string name;
  int bank_size = 20;
  int feature_dim = 8;
  uint64_t bank_seed = 7;
  double bank_scale = 1.0;
  std::vector<SynthSpec> pretrain_languages;
  int pretrain_utts = 2000;      // per pretraining language
  int pretrain_dev_utts = 100;   // per pretraining language
  SynthSpec target;
  int train_utts = 2000;
  int dev_utts = 200;
  int test_utts = 300;
  int shifted_test_utts = 300;
  int lm_sentences = 4000;       // in-domain text
  int shifted_sentences = 4000;  // cross-domain text

  int DefaultSupervised() const { return std::min(100, train_utts); }
  PhonemeBank Bank() const {
    return MakePhonemeBank(bank_size, feature_dim, bank_seed, bank_scale);
  }
};

namespace synth_detail {

inline std::vector<int> Range(int lo, int hi) {
  std::vector<int> v;
  for (int i = lo; i < hi; ++i) v.push_back(i);
  return v;
}

inline SynthSpec BaseSpec(uint64_t seed, int dim) {
  SynthSpec s;
  s.seed = seed;
  s.num_phonemes = 12;
  s.num_graphemes = 16;
  s.vocab_size = 150;
  s.feature_dim = dim;
  s.noise = 0.6;
  s.homophone_rate = 0.03;
  s.alternate_spellings = 4;
  return s;
}

// Pretraining language i drops bank rows {4i..4i+3} of the first 16.
inline std::vector<SynthSpec> PretrainLanguages(int n, int dim) {
  std::vector<SynthSpec> out;
  for (int i = 0; i < n; ++i) {
    SynthSpec s = BaseSpec(1000 + i, dim);
    s.accent_fraction = 0.0;
    for (int r = 0; r < 16; ++r) {
      if (r / 4 != i) s.bank_phonemes.push_back(r);
    }
    out.push_back(s);
  }
  return out;
}

}  // namespace synth_detail

inline std::vector<std::string> PresetNames() {
  return {"polish-like", "indonesian-like", "tiny"};
}

inline BenchmarkPreset ReferencePreset(const std::string& name) {
  using namespace synth_detail;
  BenchmarkPreset p;
  p.name = name;
  if (name == "polish-like" || name == "indonesian-like") {
    p.pretrain_languages = PretrainLanguages(4, p.feature_dim);
    SynthSpec t = BaseSpec(name == "polish-like" ? 2001 : 2002, p.feature_dim);
    t.accent_fraction = 0.35;
    t.accent_strength = 0.6;
    if (name == "polish-like") {
      // Eight phonemes seen in pretraining, four never seen.
      t.bank_phonemes = {0, 2, 5, 7, 8, 10, 13, 15, 16, 17, 18, 19};
      p.train_utts = 2000;
      p.dev_utts = 200;
      p.test_utts = 300;
    } else {
      t.bank_phonemes = {1, 3, 4, 6, 7, 9, 10, 11, 12, 13, 14, 15};
      p.train_utts = 400;
      p.dev_utts = 100;
      p.test_utts = 200;
    }
    p.target = t;
    return p;
  }
  if (name == "tiny") {
    p.bank_size = 6;
    p.feature_dim = 4;
    p.pretrain_utts = 150;
    p.pretrain_dev_utts = 20;
    for (int i = 0; i < 2; ++i) {
      SynthSpec s = BaseSpec(3000 + i, p.feature_dim);
      s.num_phonemes = 4;
      s.num_graphemes = 6;
      s.vocab_size = 20;
      s.alternate_spellings = 1;
      s.bank_phonemes = i == 0 ? std::vector<int>{0, 1, 2, 3} : std::vector<int>{1, 2, 3, 4};
      p.pretrain_languages.push_back(s);
    }
    SynthSpec t = BaseSpec(3100, p.feature_dim);
    t.num_phonemes = 4;
    t.num_graphemes = 6;
    t.vocab_size = 24;
    t.alternate_spellings = 1;
    t.sentence_max = 3;
    t.shifted_sentence_min = 2;
    t.shifted_sentence_max = 4;
    t.bank_phonemes = {0, 2, 4, 5};
    t.accent_fraction = 0.25;
    t.accent_strength = 0.5;
    p.target = t;
    p.train_utts = 60;
    p.dev_utts = 20;
    p.test_utts = 30;
    p.shifted_test_utts = 30;
    p.lm_sentences = 300;
    p.shifted_sentences = 300;
    return p;
  }
  throw ConfigError("unknown preset '" + name + "'");
}

inline SynthLanguage TargetLanguage(const BenchmarkPreset& p) {
  const PhonemeBank bank = p.Bank();
  return GenLanguage(p.target, &bank);
}

// Phoneme names of the pooled pretraining data: the union of the bank rows
// used by the pretraining languages, in bank order, then the pause.
inline std::vector<std::string> PretrainPhonemeNames(const BenchmarkPreset& p) {
  std::set<int> rows;
  for (const auto& s : p.pretrain_languages) rows.insert(s.bank_phonemes.begin(), s.bank_phonemes.end());
  const PhonemeBank bank = p.Bank();
  std::vector<std::string> out;
  for (int r : rows) out.push_back(bank.names.at(r));
  out.emplace_back(kSilence);
  return out;
}

// Pooled pretraining corpus with h_true and h_weak (clean) mapped into the
// union phoneme alphabet. y is left empty.
inline Dataset GenPretrainCorpus(const BenchmarkPreset& p, const Alphabet& union_phonemes,
                                 int utts_per_language, uint64_t stream) {
  const PhonemeBank bank = p.Bank();
  Dataset out;
  for (size_t li = 0; li < p.pretrain_languages.size(); ++li) {
    const SynthLanguage lang = GenLanguage(p.pretrain_languages[li], &bank);
    Rng rng(DeriveSeed(p.pretrain_languages[li].seed, stream));
    Dataset part = GenCorpus(lang, utts_per_language, Domain::kIn, 0, rng,
                             "pre" + std::to_string(li));
    for (auto& r : part) {
      Labels h;
      for (int id : *r.h_true) h.push_back(union_phonemes.Id(lang.phonemes->Symbol(id)));
      r.h_true = h;
      r.h_weak = h;
      r.y.clear();
      out.push_back(std::move(r));
    }
  }
  return out;
}

}  // namespace jsaspg

#endif  // JSASPG_SYNTH_HPP_
