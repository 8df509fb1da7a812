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

#ifndef JSASPG_EXPERIMENT_HPP_
#define JSASPG_EXPERIMENT_HPP_

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "jsaspg/common.hpp"
#include "jsaspg/dataset.hpp"
#include "jsaspg/decoder.hpp"
#include "jsaspg/jsa.hpp"
#include "jsaspg/ngram_lm.hpp"
#include "jsaspg/synth.hpp"
#include "jsaspg/system.hpp"
#include "jsaspg/trainer.hpp"

#include "json.hpp"

namespace jsaspg {

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(AdamConfig, learning_rate, beta1, beta2,
                                                epsilon, min_learning_rate, patience,
                                                decay_factor, clip_norm)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(FitConfig, epochs, batch_size, adam)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ModelHyper, s2p_radius, s2p_hidden,
                                                sym_embed, sym_radius, sym_hidden,
                                                p2g_upsample, g2p_upsample)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(JsaConfig, m, supervised_batch_ratio,
                                                mis_steps_per_sample, epochs, average_best,
                                                batch_size, persistent_chain, max_resample,
                                                update_s2p, update_p2g, update_g2p,
                                                val_samples, val_beam)

inline constexpr int kMetricsSchemaVersion = 1;

struct DecodeSettings {
  int beam = 16;
  int nbest = 16;
  int k = 10;
  double lm_weight = 0.3;
  double word_bonus = 1.0;
  double unk_penalty = -10.0;
  bool common_random_numbers = true;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(DecodeSettings, beam, nbest, k, lm_weight,
                                                word_bonus, unk_penalty, common_random_numbers)

struct InitSettings {
  std::string scheme = "jsa-spg";
  FitConfig finetune;
  FitConfig p2g;
  FitConfig g2p;
  FitConfig s2p;
  int pseudo_beam = 4;
  double unseen_std = 0.02;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(InitSettings, scheme, finetune, p2g, g2p, s2p,
                                                pseudo_beam, unseen_std)

struct CorpusSizes {
  int pretrain_utts = -1;  // -1: preset value
  int pretrain_dev_utts = -1;
  int train_utts = -1;
  int dev_utts = -1;
  int test_utts = -1;
  int shifted_test_utts = -1;
  int lm_sentences = -1;
  int shifted_sentences = -1;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(CorpusSizes, pretrain_utts, pretrain_dev_utts,
                                                train_utts, dev_utts, test_utts,
                                                shifted_test_utts, lm_sentences,
                                                shifted_sentences)

struct LmSettings {
  int order = 3;        // in-domain
  int cross_order = 4;  // cross-domain (shifted) text
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(LmSettings, order, cross_order)

struct AdaptSettings {
  int n = 8;
  int sentences = -1;  // -1: all cross-domain text
  FitConfig fit;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(AdaptSettings, n, sentences, fit)

struct PathSettings {
  std::string data = "data";
  std::string ckpt = "ckpt";
  std::string lm = "lm";
  std::string reports = "reports";
  std::string pretrained;  // reuse an existing pretrained S2P checkpoint
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(PathSettings, data, ckpt, lm, reports, pretrained)

struct ExperimentConfig {
  std::string preset = "tiny";
  nlohmann::json synth = nlohmann::json::object();  // target spec overrides
  CorpusSizes corpus;
  std::string work_dir = "work";
  uint64_t seed = 1;
  int supervised_sentences = -1;  // -1: preset default
  int workers = 1;
  ModelHyper model;
  FitConfig pretrain;
  InitSettings init;
  JsaConfig jsa;
  AdamConfig adam;
  DecodeSettings decode;
  LmSettings lm;
  AdaptSettings augment;
  AdaptSettings lda{8, 1500, {}};
  PathSettings paths;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ExperimentConfig, preset, synth, corpus,
                                                work_dir, seed, supervised_sentences, workers,
                                                model, pretrain, init, jsa, adam, decode, lm,
                                                augment, lda, paths)

namespace experiment_detail {

// Rejects keys that the defaults do not have, recursively. `synth` is
// checked against the spec fields.
inline void CheckKeys(const nlohmann::json& given, const nlohmann::json& known,
                      const std::string& where) {
  if (!given.is_object()) return;
  for (const auto& [k, v] : given.items()) {
    if (!known.contains(k)) throw ConfigError("unknown config key '" + where + k + "'");
    if (v.is_object() && known[k].is_object() && !known[k].empty()) {
      CheckKeys(v, known[k], where + k + ".");
    }
  }
}

inline std::filesystem::path Under(const std::string& root, const std::string& p) {
  std::filesystem::path q(p);
  return q.is_absolute() ? q : std::filesystem::path(root) / q;
}

}  // namespace experiment_detail

inline ExperimentConfig ParseConfig(const nlohmann::json& j) {
  using namespace experiment_detail;
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  ExperimentConfig defaults;
  nlohmann::json known = defaults;
  CheckKeys(j, known, "");
  if (j.contains("synth")) CheckKeys(j["synth"], SpecToJson(SynthSpec{}), "synth.");
  ExperimentConfig c;
  try {
    c = j.get<ExperimentConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
  ReferencePreset(c.preset);  // validates the name
  if (c.workers < 1) throw ConfigError("workers must be >= 1");
  if (c.supervised_sentences < -1) throw ConfigError("supervised_sentences must be >= 0");
  SchemeFromName(c.init.scheme);
  c.jsa.Validate();
  if (c.lm.order < 1 || c.lm.cross_order < 1) throw ConfigError("LM orders must be >= 1");
  if (c.augment.n < 1 || c.lda.n < 1) throw ConfigError("N-best sizes must be >= 1");
  if (c.decode.nbest < 1 || c.decode.nbest > c.decode.beam || c.decode.k < 1) {
    throw ConfigError("decode needs 1 <= nbest <= beam and k >= 1");
  }
  if (!c.paths.pretrained.empty() && !std::filesystem::exists(c.paths.pretrained)) {
    throw ConfigError("paths.pretrained does not exist: " + c.paths.pretrained);
  }
  return c;
}

inline ExperimentConfig LoadConfig(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config " + path);
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path + " is not valid JSON: " + e.what());
  }
  return ParseConfig(j);
}

// Hash over everything that determines results. Worker count and paths are
// left out: they do not change any output.
inline std::string ConfigHash(const ExperimentConfig& c) {
  nlohmann::json j = c;
  j.erase("workers");
  j.erase("work_dir");
  j.erase("paths");
  return HexDigest(Fnv1a64(j.dump()));
}

// Everything the pretrained S2P depends on; runs with different seeds share it.
inline std::string PretrainHash(const ExperimentConfig& c, const BenchmarkPreset& p) {
  nlohmann::json langs = nlohmann::json::array();
  for (const auto& s : p.pretrain_languages) langs.push_back(SpecToJson(s));
  const nlohmann::json j = {{"preset", p.name},
                            {"bank", {p.bank_size, p.feature_dim, p.bank_seed, p.bank_scale}},
                            {"languages", langs},
                            {"utts", {p.pretrain_utts, p.pretrain_dev_utts}},
                            {"fit", c.pretrain},
                            {"radius", c.model.s2p_radius},
                            {"hidden", c.model.s2p_hidden}};
  return HexDigest(Fnv1a64(j.dump()));
}

// Resolved preset with the config's overrides applied.
inline BenchmarkPreset ResolvePreset(const ExperimentConfig& c) {
  BenchmarkPreset p = ReferencePreset(c.preset);
  p.target = SpecFromJson(c.synth, p.target);
  auto set = [](int v, int& dst) {
    if (v >= 0) dst = v;
  };
  set(c.corpus.pretrain_utts, p.pretrain_utts);
  set(c.corpus.pretrain_dev_utts, p.pretrain_dev_utts);
  set(c.corpus.train_utts, p.train_utts);
  set(c.corpus.dev_utts, p.dev_utts);
  set(c.corpus.test_utts, p.test_utts);
  set(c.corpus.shifted_test_utts, p.shifted_test_utts);
  set(c.corpus.lm_sentences, p.lm_sentences);
  set(c.corpus.shifted_sentences, p.shifted_sentences);
  return p;
}

// Text files: one sentence of space-separated words per line; lines that
// start with '#' are headers.
inline void WriteText(const std::string& path, const std::vector<std::vector<std::string>>& s,
                      const std::string& header) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot write " + path);
  os << "# " << header << "\n";
  for (const auto& words : s) {
    for (size_t i = 0; i < words.size(); ++i) os << (i ? " " : "") << words[i];
    os << "\n";
  }
}

inline std::vector<std::vector<std::string>> ReadText(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("missing text file " + path);
  std::vector<std::vector<std::string>> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::vector<std::string> words;
    for (std::string w; ls >> w;) words.push_back(w);
    out.push_back(std::move(words));
  }
  return out;
}

// PER and WER of a set of hypotheses. PER ignores the pause phoneme.
struct EvalResult {
  int n = 0;
  double per = std::numeric_limits<double>::quiet_NaN();
  double wer = 0.0;
};

inline Labels StripSymbol(const Labels& s, int sym) {
  Labels out;
  for (int v : s) {
    if (v != sym) out.push_back(v);
  }
  return out;
}

inline EvalResult Evaluate(const Dataset& refs, const std::map<std::string, DecodeResult>& hyps,
                           const Alphabet& graphemes, int separator, int silence) {
  if (refs.empty()) throw DataError("no reference utterances");
  EvalResult r;
  std::vector<std::pair<Labels, Labels>> ph, gr;
  for (const auto& u : refs) {
    auto it = hyps.find(u.id);
    if (it == hyps.end()) throw DataError("no hypothesis for utterance " + u.id);
    gr.emplace_back(u.y, it->second.y);
    if (u.h_true) {
      ph.emplace_back(StripSymbol(*u.h_true, silence), StripSymbol(it->second.h_hat, silence));
    }
  }
  r.n = static_cast<int>(refs.size());
  r.wer = CorpusWer(gr, graphemes, separator);
  if (ph.size() == refs.size()) {
    bool any = false;
    for (const auto& p : ph) any = any || !p.first.empty();
    if (any) r.per = CorpusErrorRate(ph);
  }
  return r;
}

inline nlohmann::json NumOrNull(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json();
}

struct MetricsRow {
  std::string system;
  std::string set;
  std::string lm;
  double per = std::numeric_limits<double>::quiet_NaN();
  double wer_wo_lm = std::numeric_limits<double>::quiet_NaN();
  double wer_w_lm = std::numeric_limits<double>::quiet_NaN();
  double wer_mls = std::numeric_limits<double>::quiet_NaN();

  nlohmann::json ToJson() const {
    return {{"system", system}, {"set", set},           {"lm", lm},
            {"per", NumOrNull(per)}, {"wer_wo_lm", NumOrNull(wer_wo_lm)},
            {"wer_w_lm", NumOrNull(wer_w_lm)}, {"wer_mls", NumOrNull(wer_mls)}};
  }
};

// A stage is a directory with s2p/p2g/g2p checkpoints.
inline const std::vector<std::string>& StageNames() {
  static const std::vector<std::string> names{"init", "jsa", "aug", "lda"};
  return names;
}

inline const std::vector<std::string>& SetNames() {
  static const std::vector<std::string> names{"train", "dev", "test", "shifted_test"};
  return names;
}

// File-mediated pipeline. Every command reads its inputs from the work
// directory and writes its outputs there; nothing is kept in memory between
// commands.
class Experiment {
 public:
  explicit Experiment(ExperimentConfig cfg)
      : cfg_(std::move(cfg)), preset_(ResolvePreset(cfg_)), hash_(ConfigHash(cfg_)) {
    std::error_code ec;
    for (const auto& d : {Data(""), Ckpt(""), LmDir(""), Reports("")}) {
      std::filesystem::create_directories(d, ec);
      if (ec) throw ConfigError("cannot create directory " + d + ": " + ec.message());
    }
  }

  const ExperimentConfig& config() const { return cfg_; }
  const BenchmarkPreset& preset() const { return preset_; }
  const std::string& hash() const { return hash_; }

  nlohmann::json Meta(const std::string& artifact) const {
    return {{"artifact", artifact},
            {"config_hash", hash_},
            {"tool_version", kToolVersion},
            {"seed", cfg_.seed}};
  }

  std::string Data(const std::string& f) const { return Path(cfg_.paths.data, f); }
  std::string Ckpt(const std::string& f) const { return Path(cfg_.paths.ckpt, f); }
  std::string LmDir(const std::string& f) const { return Path(cfg_.paths.lm, f); }
  std::string Reports(const std::string& f) const { return Path(cfg_.paths.reports, f); }
  std::string PretrainedPath() const {
    return cfg_.paths.pretrained.empty() ? Ckpt("pretrain_s2p.ckpt") : cfg_.paths.pretrained;
  }

  int Supervised() const {
    const int n = cfg_.supervised_sentences < 0 ? preset_.DefaultSupervised()
                                                : cfg_.supervised_sentences;
    return std::min(n, preset_.train_utts);
  }

  // ------------------------------------------------------------ synth
  void Synth() const {
    const SynthLanguage lang = TargetLanguage(preset_);
    auto corpus = [&](int n, Domain d, int sup, int stream, const std::string& name) {
      Rng rng(DeriveSeed(cfg_.seed, 0x5e7, stream));
      const Dataset data = GenCorpus(lang, n, d, sup, rng, name);
      WriteDataset(Data(name + ".jsonl"), data, Meta("dataset:" + name));
    };
    corpus(preset_.train_utts, Domain::kIn, Supervised(), 1, "train");
    corpus(preset_.dev_utts, Domain::kIn, 0, 2, "dev");
    corpus(preset_.test_utts, Domain::kIn, 0, 3, "test");
    corpus(preset_.shifted_test_utts, Domain::kShifted, 0, 4, "shifted_test");
    auto text = [&](int n, Domain d, int stream, const std::string& name) {
      Rng rng(DeriveSeed(cfg_.seed, 0x7e7, stream));
      std::vector<std::vector<std::string>> s;
      for (const auto& w : GenSentences(lang, n, d, rng)) s.push_back(SentenceWords(lang, w));
      WriteText(Data(name), s, Meta("text").dump());
    };
    text(preset_.lm_sentences, Domain::kIn, 1, "text_in.txt");
    text(preset_.shifted_sentences, Domain::kShifted, 2, "text_shifted.txt");

    nlohmann::json manifest = LanguageManifest(lang);
    manifest["_meta"] = Meta("language");
    manifest["preset"] = preset_.name;
    manifest["pretrain_phonemes"] = PretrainPhonemeNames(preset_);
    manifest["pretrain_hash"] = PretrainHash(cfg_, preset_);
    WriteJson(Data("language.json"), manifest);

    if (cfg_.paths.pretrained.empty()) {
      const Alphabet pre(AlphabetKind::kPhoneme, PretrainPhonemeNames(preset_));
      WriteDataset(Data("pretrain.jsonl"),
                   GenPretrainCorpus(preset_, pre, preset_.pretrain_utts, 0x9e1),
                   Meta("dataset:pretrain"));
      WriteDataset(Data("pretrain_dev.jsonl"),
                   GenPretrainCorpus(preset_, pre, preset_.pretrain_dev_utts, 0x9e2),
                   Meta("dataset:pretrain_dev"));
    }
  }

  // --------------------------------------------------------- pretrain
  // Multilingual S2P on the pooled pretraining languages. Seeded from the
  // preset only, so runs that differ in seed can share it.
  FitLog Pretrain() const {
    const Dataset train = ReadDataset(Require(Data("pretrain.jsonl"), "synth"));
    const Dataset dev = ReadDataset(Require(Data("pretrain_dev.jsonl"), "synth"));
    const Alphabet pre(AlphabetKind::kPhoneme, PretrainPhonemeNames(preset_));
    CtcModel m = MakeS2P(pre, preset_.feature_dim, cfg_.model);
    Rng rng(DeriveSeed(preset_.bank_seed, 0x9e7));
    m.InitRandom(rng);
    FitConfig fit = cfg_.pretrain;
    fit.seed = DeriveSeed(preset_.bank_seed, 0x9e8);
    fit.workers = cfg_.workers;
    std::vector<CtcExample> ex, val;
    for (const auto& u : train) ex.push_back({u.x, {}, *u.h_weak});
    for (const auto& u : dev) val.push_back({u.x, {}, *u.h_weak});
    const FitLog log = SupervisedFit(m, ex, fit, val);
    nlohmann::json meta = Meta("checkpoint:pretrain_s2p");
    meta["pretrain_hash"] = PretrainHash(cfg_, preset_);
    m.Save(Ckpt("pretrain_s2p.ckpt"), meta.dump());
    return log;
  }

  CtcModel LoadPretrained() const {
    const std::string path = Require(PretrainedPath(), "pretrain");
    std::string meta;
    CtcModel m = CtcModel::Load(path, &meta);
    nlohmann::json j = nlohmann::json::parse(meta, nullptr, false);
    if (j.is_discarded() || j.value("pretrain_hash", "") != PretrainHash(cfg_, preset_)) {
      throw ConfigError("pretrained checkpoint " + path +
                        " was built for a different preset or pretraining config");
    }
    return m;
  }

  // -------------------------------------------------------------- init
  void Init(const std::string& scheme_name) const {
    const InitScheme scheme = SchemeFromName(scheme_name);
    const CtcModel pre = LoadPretrained();
    const Dataset train = ReadSet("train"), dev = ReadSet("dev");
    auto [phonemes, graphemes, sep] = TargetAlphabets();
    InitConfig ic;
    ic.scheme = scheme;
    ic.finetune = Fit(cfg_.init.finetune, 0x21);
    ic.p2g = Fit(cfg_.init.p2g, 0x22);
    ic.g2p = Fit(cfg_.init.g2p, 0x23);
    ic.s2p = Fit(cfg_.init.s2p, 0x24);
    ic.pseudo_beam = cfg_.init.pseudo_beam;
    ic.unseen_std = cfg_.init.unseen_std;
    const SpgSystem sys = InitPipeline(pre, phonemes, graphemes, sep, train, dev, cfg_.model,
                                       ic, DeriveSeed(cfg_.seed, 0x11));
    SaveStage(sys, "init", {{"scheme", SchemeName(scheme)}});
  }

  // ------------------------------------------------------------- train
  std::vector<EpochLog> TrainJsa() const {
    const SpgSystem init = LoadStage("init");
    const Dataset train = ReadSet("train"), dev = ReadSet("dev");
    JsaConfig jc = cfg_.jsa;
    jc.seed = DeriveSeed(cfg_.seed, 0x31);
    jc.workers = cfg_.workers;
    const std::string log_path = Reports("epoch_log.jsonl");
    std::ofstream log(log_path);
    if (!log) throw DataError("cannot write " + log_path);
    log << nlohmann::json{{"_meta", Meta("epoch_log")}}.dump() << "\n";
    TrainResult r = Train(init, train, dev, jc, cfg_.adam, [&](const EpochLog& e) {
      log << e.ToJson().dump() << "\n";
      log.flush();
    });
    SaveStage(r.system, "jsa", {});
    return r.log;
  }

  // ----------------------------------------------------------- augment
  FitLog Augment() const {
    SpgSystem sys = LoadStage("jsa");
    const Dataset train = ReadSet("train");
    const FitLog log = P2gAugment(sys, train, cfg_.augment.n, Fit(cfg_.augment.fit, 0x41));
    SaveStage(sys, "aug", {{"from", "jsa"}});
    return log;
  }

  // ---------------------------------------------------------------- lm
  // In-domain LM on the training transcripts plus in-domain text; the
  // cross-domain LM on the shifted text.
  void Lm() const {
    const Dataset train = ReadSet("train");
    auto [phonemes, graphemes, sep] = TargetAlphabets();
    auto in_text = ReadText(Require(Data("text_in.txt"), "synth"));
    for (const auto& u : train) in_text.push_back(WordStrings(u.y, *graphemes, sep));
    const std::string header = "# " + Meta("lm").dump() + "\n";
    NGramLM::Train(in_text, cfg_.lm.order).Save(LmDir("in.arpa"), header);
    NGramLM::Train(ReadText(Require(Data("text_shifted.txt"), "synth")), cfg_.lm.cross_order)
        .Save(LmDir("shifted.arpa"), header);
  }

  // -------------------------------------------------------------- adapt
  // Language domain adaptation of P2G on the cross-domain text.
  FitLog Adapt(const std::string& from = "aug") const {
    SpgSystem sys = LoadStage(from);
    auto [phonemes, graphemes, sep] = TargetAlphabets();
    const auto text = ReadText(Require(Data("text_shifted.txt"), "synth"));
    const size_t n = cfg_.lda.sentences < 0
                         ? text.size()
                         : std::min(text.size(), static_cast<size_t>(cfg_.lda.sentences));
    std::vector<Labels> spelled;
    for (size_t i = 0; i < n; ++i) spelled.push_back(SpellWords(text[i], *graphemes, sep));
    const FitLog log = LdaAdapt(sys, spelled, cfg_.lda.n, Fit(cfg_.lda.fit, 0x51));
    SaveStage(sys, "lda", {{"from", from}});
    return log;
  }

  // ------------------------------------------------------------- decode
  // lm_name: "in", "shifted", or empty for the set's default.
  std::map<std::string, DecodeResult> Decode(DecodeMode mode, const std::string& set,
                                             const std::string& stage,
                                             std::string lm_name = "") const {
    const SpgSystem sys = LoadStage(stage);
    const Dataset data = ReadSet(set);
    if (lm_name.empty()) lm_name = DefaultLm(set);
    DecodeConfig dc = MakeDecodeConfig(mode, lm_name);
    const int n = static_cast<int>(data.size());
    std::vector<DecodeResult> res(n);
    ParallelFor(n, cfg_.workers, [&](int i) {
      if (mode == DecodeMode::kMls) {
        Rng rng(DeriveSeed(cfg_.seed, 0xdec, i));
        res[i] = MlsDecode(sys, data[i].x, dc, rng);
      } else {
        res[i] = VanillaDecode(sys, data[i].x, dc, mode == DecodeMode::kWithLm);
      }
    });
    const std::string path = DecodePath(stage, set, mode);
    std::ofstream os(path);
    if (!os) throw DataError("cannot write " + path);
    nlohmann::json meta = Meta("decode");
    meta["stage"] = stage;
    meta["set"] = set;
    meta["mode"] = ModeName(mode);
    meta["lm"] = mode == DecodeMode::kWithoutLm ? "" : lm_name;
    os << nlohmann::json{{"_meta", meta}}.dump() << "\n";
    std::map<std::string, DecodeResult> out;
    for (int i = 0; i < n; ++i) {
      os << DecodeReportLine(data[i].id, mode, res[i], *sys.graphemes).dump() << "\n";
      out[data[i].id] = res[i];
    }
    return out;
  }

  std::string DecodePath(const std::string& stage, const std::string& set,
                         DecodeMode mode) const {
    return Reports("decode_" + stage + "_" + set + "_" + ModeName(mode) + ".jsonl");
  }

  // --------------------------------------------------------------- run
  // Full pipeline; writes reports/metrics.json and returns it.
  nlohmann::json Run(const std::function<void(const std::string&)>& progress = {}) const {
    auto step = [&](const std::string& s) {
      if (progress) progress(s);
    };
    step("synth");
    Synth();
    if (cfg_.paths.pretrained.empty()) {
      step("pretrain");
      Pretrain();
    }
    step("init");
    Init(cfg_.init.scheme);
    step("train");
    TrainJsa();
    step("augment");
    Augment();
    step("lm");
    Lm();
    step("adapt");
    Adapt("aug");
    step("decode");
    std::vector<MetricsRow> rows;
    for (const std::string stage : {"init", "jsa", "aug"}) rows.push_back(Row(stage, "test"));
    for (const std::string stage : {"aug", "lda"}) rows.push_back(Row(stage, "shifted_test"));
    nlohmann::json metrics = MetricsJson(rows);
    WriteJson(Reports("metrics.json"), metrics);
    return metrics;
  }

  MetricsRow Row(const std::string& stage, const std::string& set) const {
    const Dataset refs = ReadSet(set);
    auto [phonemes, graphemes, sep] = TargetAlphabets();
    const int sil = SilenceId(*phonemes);
    MetricsRow row;
    row.system = stage;
    row.set = set;
    row.lm = DefaultLm(set);
    const EvalResult wo =
        Evaluate(refs, Decode(DecodeMode::kWithoutLm, set, stage), *graphemes, sep, sil);
    row.per = wo.per;
    row.wer_wo_lm = wo.wer;
    row.wer_w_lm =
        Evaluate(refs, Decode(DecodeMode::kWithLm, set, stage), *graphemes, sep, sil).wer;
    row.wer_mls = Evaluate(refs, Decode(DecodeMode::kMls, set, stage), *graphemes, sep, sil).wer;
    return row;
  }

  nlohmann::json MetricsJson(const std::vector<MetricsRow>& rows) const {
    nlohmann::json j;
    j["schema_version"] = kMetricsSchemaVersion;
    j["config_hash"] = hash_;
    j["tool_version"] = kToolVersion;
    j["seed"] = cfg_.seed;
    j["preset"] = preset_.name;
    j["rows"] = nlohmann::json::array();
    for (const auto& r : rows) j["rows"].push_back(r.ToJson());
    return j;
  }

  // ----------------------------------------------------------- helpers
  Dataset ReadSet(const std::string& set) const {
    if (std::find(SetNames().begin(), SetNames().end(), set) == SetNames().end()) {
      throw ConfigError("unknown set '" + set + "'");
    }
    return ReadDataset(Require(Data(set + ".jsonl"), "synth"));
  }

  struct Alphabets {
    std::shared_ptr<const Alphabet> phonemes;
    std::shared_ptr<const Alphabet> graphemes;
    int separator;
  };

  Alphabets TargetAlphabets() const {
    const std::string path = Require(Data("language.json"), "synth");
    std::ifstream is(path);
    nlohmann::json j;
    try {
      is >> j;
    } catch (const nlohmann::json::exception& e) {
      throw DataError("corrupt " + path + ": " + e.what());
    }
    auto ph = std::make_shared<Alphabet>(AlphabetKind::kPhoneme,
                                         j.at("phonemes").get<std::vector<std::string>>());
    auto gr = std::make_shared<Alphabet>(AlphabetKind::kGrapheme,
                                         j.at("graphemes").get<std::vector<std::string>>());
    return {ph, gr, gr->Id(kWordSeparator)};
  }

  void SaveStage(const SpgSystem& sys, const std::string& stage,
                 const nlohmann::json& extra) const {
    const std::string dir = Ckpt(stage);
    std::filesystem::create_directories(dir);
    nlohmann::json meta = Meta("checkpoint:" + stage);
    for (const auto& [k, v] : extra.items()) meta[k] = v;
    sys.s2p.Save(dir + "/s2p.ckpt", meta.dump());
    sys.p2g.Save(dir + "/p2g.ckpt", meta.dump());
    sys.g2p.Save(dir + "/g2p.ckpt", meta.dump());
  }

  SpgSystem LoadStage(const std::string& stage) const {
    if (std::find(StageNames().begin(), StageNames().end(), stage) == StageNames().end()) {
      throw ConfigError("unknown stage '" + stage + "'");
    }
    const std::string dir = Ckpt(stage);
    static const std::map<std::string, std::string> producer{
        {"init", "init"}, {"jsa", "train"}, {"aug", "augment"}, {"lda", "adapt"}};
    SpgSystem sys;
    sys.s2p = CtcModel::Load(Require(dir + "/s2p.ckpt", producer.at(stage)));
    sys.p2g = CtcModel::Load(Require(dir + "/p2g.ckpt", producer.at(stage)));
    sys.g2p = CtcModel::Load(Require(dir + "/g2p.ckpt", producer.at(stage)));
    sys.phonemes = std::make_shared<Alphabet>(AlphabetKind::kPhoneme, sys.s2p.output_symbols());
    sys.graphemes = std::make_shared<Alphabet>(AlphabetKind::kGrapheme, sys.p2g.output_symbols());
    sys.separator = sys.graphemes->Id(kWordSeparator);
    sys.CheckInvariants();
    return sys;
  }

  DecodeConfig MakeDecodeConfig(DecodeMode mode, const std::string& lm_name) const {
    DecodeConfig dc;
    dc.beam = cfg_.decode.beam;
    dc.nbest = cfg_.decode.nbest;
    dc.k = cfg_.decode.k;
    dc.common_random_numbers = cfg_.decode.common_random_numbers;
    if (mode != DecodeMode::kWithoutLm) {
      if (lm_name != "in" && lm_name != "shifted") {
        throw ConfigError("unknown LM '" + lm_name + "' (in | shifted)");
      }
      dc.lm = std::make_shared<NGramLM>(
          NGramLM::Load(Require(LmDir(lm_name + ".arpa"), "lm")));
      dc.lm_weight = cfg_.decode.lm_weight;
      dc.word_bonus = cfg_.decode.word_bonus;
      dc.unk_penalty = cfg_.decode.unk_penalty;
    }
    return dc;
  }

  static std::string DefaultLm(const std::string& set) {
    return set == "shifted_test" ? "shifted" : "in";
  }

  static int SilenceId(const Alphabet& phonemes) {
    for (int i = 1; i <= phonemes.size(); ++i) {
      if (phonemes.Symbol(i) == kSilence) return i;
    }
    return 0;
  }

  static Labels SpellWords(const std::vector<std::string>& words, const Alphabet& graphemes,
                           int sep) {
    Labels y;
    for (size_t i = 0; i < words.size(); ++i) {
      if (i) y.push_back(sep);
      for (char c : words[i]) y.push_back(graphemes.Id(std::string(1, c)));
    }
    return y;
  }

  static void WriteJson(const std::string& path, const nlohmann::json& j) {
    std::ofstream os(path);
    if (!os) throw DataError("cannot write " + path);
    os << j.dump(2) << "\n";
  }

  static std::string Require(const std::string& path, const std::string& command) {
    if (!std::filesystem::exists(path)) {
      throw DataError("missing " + path + " (run the '" + command + "' command first)");
    }
    return path;
  }

 private:
  std::string Path(const std::string& sub, const std::string& f) const {
    const auto dir = experiment_detail::Under(cfg_.work_dir, sub);
    return (f.empty() ? dir : dir / f).string();
  }

  FitConfig Fit(FitConfig f, uint64_t stream) const {
    f.seed = DeriveSeed(cfg_.seed, stream);
    f.workers = cfg_.workers;
    return f;
  }

  ExperimentConfig cfg_;
  BenchmarkPreset preset_;
  std::string hash_;
};

// Reads a decode report or a dataset as hypotheses keyed by utterance id.
// Dataset lines supply y and h_true.
inline std::map<std::string, DecodeResult> ReadHypotheses(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("missing hypothesis file " + path);
  std::map<std::string, DecodeResult> out;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      throw DataError(path + ":" + std::to_string(lineno) + ": not a JSON object");
    }
    if (j.contains("_meta")) continue;
    DecodeResult r;
    std::string id;
    try {
      id = j.at("id").get<std::string>();
      if (j.contains("hyp_ids")) {
        r.y = j.at("hyp_ids").get<Labels>();
        r.h_hat = j.value("phoneme_ids", Labels{});
      } else {
        const UtteranceRecord u = FromJson(j);
        r.y = u.y;
        if (u.h_true) r.h_hat = *u.h_true;
      }
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    out[id] = std::move(r);
  }
  return out;
}

// Summary table over metrics files. Refuses files whose config hashes
// differ unless `force`.
inline std::string ReportTable(const std::vector<nlohmann::json>& metrics, bool force) {
  if (metrics.empty()) throw DataError("no metrics to report");
  std::set<std::string> hashes;
  for (const auto& m : metrics) hashes.insert(m.value("config_hash", ""));
  if (hashes.size() > 1 && !force) {
    throw DataError("metrics come from different configs (hashes differ); use --force");
  }
  auto cell = [](const nlohmann::json& v) {
    if (v.is_null()) return std::string("-");
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", 100.0 * v.get<double>());
    return std::string(buf);
  };
  std::ostringstream os;
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%-18s %-6s %-14s %-8s %7s %10s %9s %8s\n", "preset", "seed",
                "set", "system", "PER", "WER w/oLM", "WER wLM", "WER MLS");
  os << buf;
  for (const auto& m : metrics) {
    for (const auto& r : m.at("rows")) {
      std::snprintf(buf, sizeof(buf), "%-18s %-6s %-14s %-8s %7s %10s %9s %8s\n",
                    m.value("preset", "?").c_str(), m.at("seed").dump().c_str(),
                    r.at("set").get<std::string>().c_str(),
                    r.at("system").get<std::string>().c_str(), cell(r.at("per")).c_str(),
                    cell(r.at("wer_wo_lm")).c_str(), cell(r.at("wer_w_lm")).c_str(),
                    cell(r.at("wer_mls")).c_str());
      os << buf;
    }
  }
  return os.str();
}

}  // namespace jsaspg

#endif  // JSASPG_EXPERIMENT_HPP_
