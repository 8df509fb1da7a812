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

#ifndef JSASPG_TRAINER_HPP_
#define JSASPG_TRAINER_HPP_

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "jsaspg/decoder.hpp"
#include "jsaspg/jsa.hpp"

#include "json.hpp"

namespace jsaspg {

// ---------------------------------------------------------------- metrics

inline double CorpusWer(const std::vector<std::pair<Labels, Labels>>& ref_hyp,
                        const Alphabet& graphemes, int separator) {
  WordInterner words;
  std::vector<std::pair<Labels, Labels>> pairs;
  pairs.reserve(ref_hyp.size());
  for (const auto& [ref, hyp] : ref_hyp) {
    pairs.emplace_back(words.Intern(WordStrings(ref, graphemes, separator)),
                       words.Intern(WordStrings(hyp, graphemes, separator)));
  }
  return CorpusErrorRate(pairs);
}

// ------------------------------------------------------ plain CTC fitting

struct CtcExample {
  Matrix frames;   // frames-mode input
  Labels symbols;  // symbols-mode input
  Labels target;
};

struct FitConfig {
  int epochs = 10;
  int batch_size = 16;
  AdamConfig adam;
  uint64_t seed = 1;
  int workers = 1;

  void Validate() const {
    if (epochs < 0) throw ConfigError("epochs must be >= 0");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  }
};

struct FitLog {
  std::vector<double> train_loss;  // per epoch, mean over examples
  std::vector<double> val_loss;
  int used = 0;
  int dropped = 0;  // length-infeasible examples
};

inline int ExampleInputLength(const CtcModel& model, const CtcExample& e) {
  return model.shape().mode == InputMode::kFrames ? static_cast<int>(e.frames.rows())
                                                  : static_cast<int>(e.symbols.size());
}

inline bool ExampleFeasible(const CtcModel& model, const CtcExample& e) {
  const int len = ExampleInputLength(model, e);
  if (len < 1) return false;
  return CtcLengthOk(model.OutputFrames(len), e.target, /*strict=*/true);
}

// Negative log-likelihood of one example; gradients are added when asked.
inline double ExampleLoss(const CtcModel& model, const CtcExample& e,
                          CtcParams* grads) {
  ForwardCache cache;
  const LogitLattice lat = model.shape().mode == InputMode::kFrames
                               ? model.Forward(e.frames, grads ? &cache : nullptr)
                               : model.Forward(e.symbols, grads ? &cache : nullptr);
  if (!grads) return -CtcLogProb(lat, e.target);
  return AccumulateCtcLoss(model, lat, cache, e.target, 1.0, *grads);
}

inline double MeanLoss(const CtcModel& model, const std::vector<CtcExample>& data,
                       int workers) {
  if (data.empty()) return 0.0;
  std::vector<double> loss(data.size());
  ParallelFor(static_cast<int>(data.size()), workers,
              [&](int i) { loss[i] = ExampleLoss(model, data[i], nullptr); });
  double s = 0.0;
  for (double l : loss) s += l;
  return s / static_cast<double>(data.size());
}

// Minibatch CTC training of a single model. Infeasible pairs are dropped up
// front. With a validation set the plateau schedule runs on its loss and the
// best epoch's parameters are kept.
inline FitLog SupervisedFit(CtcModel& model, std::vector<CtcExample> data,
                            const FitConfig& cfg,
                            std::vector<CtcExample> val = {}) {
  cfg.Validate();
  FitLog log;
  const size_t before = data.size();
  auto infeasible = [&](const CtcExample& e) { return !ExampleFeasible(model, e); };
  data.erase(std::remove_if(data.begin(), data.end(), infeasible), data.end());
  val.erase(std::remove_if(val.begin(), val.end(), infeasible), val.end());
  log.dropped = static_cast<int>(before - data.size());
  log.used = static_cast<int>(data.size());
  if (data.empty()) return log;

  AdamOptimizer opt(model.shape(), cfg.adam);
  std::optional<CtcParams> best;
  double best_val = std::numeric_limits<double>::infinity();
  std::vector<int> order(data.size());
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    Rng rng(DeriveSeed(cfg.seed, 0xf17, epoch));
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const int n = static_cast<int>(std::min<size_t>(cfg.batch_size, order.size() - start));
      std::vector<CtcParams> g(n);
      std::vector<double> loss(n);
      ParallelFor(n, cfg.workers, [&](int i) {
        g[i] = CtcParams::Zeros(model.shape());
        loss[i] = ExampleLoss(model, data[order[start + i]], &g[i]);
      });
      for (int i = 1; i < n; ++i) g[0] += g[i];
      g[0] *= 1.0 / n;
      for (double l : loss) total += l;
      opt.Step(model.params(), g[0]);
    }
    log.train_loss.push_back(total / static_cast<double>(data.size()));
    if (!val.empty()) {
      const double v = MeanLoss(model, val, cfg.workers);
      log.val_loss.push_back(v);
      if (v < best_val) {
        best_val = v;
        best = model.params();
      }
      opt.ReportValidation(v);
      if (opt.exhausted()) break;
    }
  }
  if (best) model.params() = *best;
  return log;
}

// ------------------------------------------------------------ validation

struct ValidationResult {
  double per = std::numeric_limits<double>::quiet_NaN();  // NaN without h_true
  double wer = 0.0;
  double loss = 0.0;  // mean IS estimate of -log p(y|x)
};

// Cap for utterances whose marginal estimate is -inf.
inline constexpr double kValLossCap = 1e3;

inline ValidationResult EvaluateSystem(const SpgSystem& sys, const Dataset& dev,
                                       int beam, int k, uint64_t seed, int workers) {
  if (dev.empty()) throw DataError("validation split is empty");
  const int n = static_cast<int>(dev.size());
  std::vector<Labels> h_hat(n), y_hat(n);
  std::vector<double> loss(n);
  DecodeConfig dc;
  dc.beam = beam;
  dc.nbest = 1;
  dc.k = k;
  dc.normalized_mean = true;
  ParallelFor(n, workers, [&](int i) {
    const DecodeResult r = VanillaDecode(sys, dev[i].x, dc, false);
    h_hat[i] = r.h_hat;
    y_hat[i] = r.y;
    Rng rng(DeriveSeed(seed, 0xde7, i));
    const LogitLattice s2p = sys.s2p.Forward(dev[i].x);
    double m = kNegInf;
    try {
      m = MarginalScore(sys, s2p, dev[i].y, dc, rng);
    } catch (const NumericError&) {
      m = kNegInf;
    }
    loss[i] = m == kNegInf ? kValLossCap : std::min(kValLossCap, -m);
  });
  ValidationResult out;
  std::vector<std::pair<Labels, Labels>> ph, gr;
  for (int i = 0; i < n; ++i) {
    if (dev[i].h_true) ph.emplace_back(*dev[i].h_true, h_hat[i]);
    gr.emplace_back(dev[i].y, y_hat[i]);
    out.loss += loss[i];
  }
  out.loss /= n;
  if (!ph.empty()) out.per = CorpusErrorRate(ph);
  out.wer = CorpusWer(gr, *sys.graphemes, sys.separator);
  return out;
}

// ------------------------------------------------------------ JSA training

struct EpochLog {
  int epoch = 0;
  double loss_s2p = 0.0, loss_p2g = 0.0, loss_g2p = 0.0;
  double val_per = std::numeric_limits<double>::quiet_NaN();
  double val_wer = 0.0;
  double val_loss = 0.0;
  double mis_accept_rate = 0.0;
  double lr = 0.0;
  int skipped = 0;

  nlohmann::json ToJson() const {
    auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); };
    return {{"epoch", epoch},
            {"loss_s2p", num(loss_s2p)},
            {"loss_p2g", num(loss_p2g)},
            {"loss_g2p", num(loss_g2p)},
            {"val_per", num(val_per)},
            {"val_wer", num(val_wer)},
            {"mis_accept_rate", num(mis_accept_rate)},
            {"lr", lr},
            {"val_loss", num(val_loss)},
            {"skipped", skipped}};
  }
};

struct TrainResult {
  SpgSystem system;  // average of the best checkpoints
  std::vector<EpochLog> log;
};

// Supervised visits per epoch for `unsup` JSA visits so that supervised
// items make up `ratio` of all visits.
inline int SupervisedVisits(double ratio, int unsup, int n_supervised) {
  if (n_supervised == 0 || ratio <= 0.0) return 0;
  if (ratio >= 1.0) return n_supervised;
  return static_cast<int>(std::lround(ratio * unsup / (1.0 - ratio)));
}

// Semi-supervised JSA training. Each epoch shuffles JSA visits of every
// training utterance together with supervised visits, processes them in
// minibatches (per-item gradients in parallel, one step per model), then
// validates. Returns the average of the best `average_best` epochs by
// validation loss.
inline TrainResult Train(SpgSystem sys, const Dataset& train, const Dataset& dev,
                         const JsaConfig& cfg, const AdamConfig& adam,
                         const std::function<void(const EpochLog&)>& on_epoch = {}) {
  cfg.Validate();
  sys.CheckInvariants();
  if (train.empty()) throw DataError("training split is empty");
  if (dev.empty()) throw DataError("validation split is empty");
  std::vector<int> supervised;
  for (int i = 0; i < static_cast<int>(train.size()); ++i) {
    if (train[i].h_weak) supervised.push_back(i);
  }
  if (cfg.supervised_batch_ratio >= 1.0 && supervised.empty()) {
    throw DataError("fully supervised training without labeled utterances");
  }
  const int n_unsup = cfg.supervised_batch_ratio >= 1.0 ? 0 : static_cast<int>(train.size());
  const int n_sup = SupervisedVisits(cfg.supervised_batch_ratio, n_unsup,
                                     static_cast<int>(supervised.size()));

  SystemOptimizers opt = SystemOptimizers::For(sys, adam);
  std::vector<std::optional<Labels>> chains(train.size());
  std::vector<std::pair<double, SpgSystem>> best;
  TrainResult out;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Rng erng(DeriveSeed(cfg.seed, 0x7a1, epoch));
    // Visit list: index >= 0 is a JSA visit, -1 - j a supervised visit.
    std::vector<int> visits;
    for (int i = 0; i < n_unsup; ++i) visits.push_back(i);
    std::vector<int> sup_order = supervised;
    for (int v = 0; v < n_sup; ++v) {
      if (v % supervised.size() == 0) std::shuffle(sup_order.begin(), sup_order.end(), erng);
      visits.push_back(-1 - sup_order[v % supervised.size()]);
    }
    std::shuffle(visits.begin(), visits.end(), erng);

    UpdateStats totals;
    int skipped = 0;
    for (size_t start = 0; start < visits.size(); start += cfg.batch_size) {
      const int n = static_cast<int>(std::min<size_t>(cfg.batch_size, visits.size() - start));
      std::vector<SystemGrads> g(n);
      std::vector<UpdateStats> st(n);
      std::vector<std::optional<Labels>> final_state(n);
      ParallelFor(n, cfg.workers, [&](int i) {
        const int v = visits[start + i];
        g[i] = SystemGrads::Zeros(sys);
        if (v < 0) {
          const auto& utt = train[-1 - v];
          st[i] = SupervisedGradient(sys, utt, *utt.h_weak, g[i]);
          return;
        }
        Rng rng(DeriveSeed(cfg.seed, epoch, start + i, v));
        UtteranceScorer scorer(sys, train[v].x, train[v].y);
        const auto init = cfg.persistent_chain ? chains[v] : std::nullopt;
        JsaSamples s = DrawJsaSamples(scorer, cfg, rng, init);
        st[i] = JsaGradient(scorer, s.h, g[i]);
        st[i].accepted = s.accepted;
        st[i].proposed = s.proposed;
        final_state[i] = s.final_state;
      });
      SystemGrads sum = SystemGrads::Zeros(sys);
      int used = 0;
      for (int i = 0; i < n; ++i) {
        const int v = visits[start + i];
        if (v >= 0 && cfg.persistent_chain) chains[v] = final_state[i];
        if (st[i].skipped) {
          ++skipped;
          totals.accepted += st[i].accepted;
          totals.proposed += st[i].proposed;
          continue;
        }
        sum += g[i];
        totals += st[i];
        ++used;
      }
      if (used == 0) continue;
      sum *= 1.0 / used;
      ApplyGradients(sys, opt, sum, cfg);
    }

    const ValidationResult val =
        EvaluateSystem(sys, dev, cfg.val_beam, cfg.val_samples, cfg.seed, cfg.workers);
    EpochLog e;
    e.epoch = epoch;
    auto mean = [](double s, int n) {
      return n ? s / n : std::numeric_limits<double>::quiet_NaN();
    };
    e.loss_s2p = mean(totals.loss_s2p, totals.terms_s2p);
    e.loss_p2g = mean(totals.loss_p2g, totals.terms_p2g);
    e.loss_g2p = mean(totals.loss_g2p, totals.terms_g2p);
    e.val_per = val.per;
    e.val_wer = val.wer;
    e.val_loss = val.loss;
    e.mis_accept_rate = mean(totals.accepted, totals.proposed);
    e.skipped = skipped;
    for (AdamOptimizer* o : {&opt.s2p, &opt.p2g, &opt.g2p}) o->ReportValidation(val.loss);
    e.lr = cfg.update_s2p ? opt.s2p.learning_rate()
                          : cfg.update_p2g ? opt.p2g.learning_rate() : opt.g2p.learning_rate();
    out.log.push_back(e);
    if (on_epoch) on_epoch(e);

    best.emplace_back(val.loss, sys);
    std::stable_sort(best.begin(), best.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    if (static_cast<int>(best.size()) > cfg.average_best) best.resize(cfg.average_best);
  }

  if (best.empty()) {
    out.system = std::move(sys);
    return out;
  }
  std::vector<CtcModel> s2p, p2g, g2p;
  for (const auto& [loss, snap] : best) {
    s2p.push_back(snap.s2p);
    p2g.push_back(snap.p2g);
    g2p.push_back(snap.g2p);
  }
  out.system = best.front().second;
  out.system.s2p = AverageModels(s2p);
  out.system.p2g = AverageModels(p2g);
  out.system.g2p = AverageModels(g2p);
  return out;
}

// --------------------------------------------------------- initialization

enum class InitScheme { kJsaSpg, kSpgFromG2P };

inline const char* SchemeName(InitScheme s) {
  return s == InitScheme::kJsaSpg ? "jsa-spg" : "spg-from-g2p";
}

inline InitScheme SchemeFromName(const std::string& s) {
  if (s == "jsa-spg") return InitScheme::kJsaSpg;
  if (s == "spg-from-g2p") return InitScheme::kSpgFromG2P;
  throw ConfigError("unknown init scheme '" + s + "'");
}

// S2P for a new phoneme alphabet from a pretrained one: hidden layers are
// copied, output rows of phonemes known to the pretrained model are copied
// by name, new phonemes get small random weights and the mean known bias.
inline CtcModel TransferS2P(const CtcModel& pretrained, const Alphabet& phonemes,
                            Rng& rng, double unseen_std = 0.02) {
  if (pretrained.role() != ModelRole::kS2P) throw ConfigError("pretrained model is not an S2P");
  ModelShape shape = pretrained.shape();
  shape.output_symbols = phonemes.size();
  CtcModel m(ModelRole::kS2P, shape, {}, phonemes.symbols());
  const CtcParams& src = pretrained.params();
  CtcParams& dst = m.params();
  dst.w1 = src.w1;
  dst.b1 = src.b1;
  dst.w2.row(0) = src.w2.row(0);
  dst.b2(0) = src.b2(0);
  std::map<std::string, int> known;
  for (size_t i = 0; i < pretrained.output_symbols().size(); ++i) {
    known[pretrained.output_symbols()[i]] = static_cast<int>(i) + 1;
  }
  double bias_sum = 0.0;
  int n_known = 0;
  std::vector<int> unseen;
  for (int id = 1; id <= phonemes.size(); ++id) {
    auto it = known.find(phonemes.Symbol(id));
    if (it == known.end()) {
      unseen.push_back(id);
      continue;
    }
    dst.w2.row(id) = src.w2.row(it->second);
    dst.b2(id) = src.b2(it->second);
    bias_sum += src.b2(it->second);
    ++n_known;
  }
  const double bias = n_known ? RoundToFloat(bias_sum / n_known) : 0.0;
  for (int id : unseen) {
    for (Eigen::Index j = 0; j < dst.w2.cols(); ++j) {
      dst.w2(id, j) = RoundToFloat(unseen_std * Gaussian(rng));
    }
    dst.b2(id) = bias;
  }
  return m;
}

struct InitConfig {
  InitScheme scheme = InitScheme::kJsaSpg;
  FitConfig finetune;  // the model fine-tuned on weak labels
  FitConfig p2g;
  FitConfig g2p;
  FitConfig s2p;       // spg-from-g2p: S2P on G2P pseudo-labels
  int pseudo_beam = 4;
  double unseen_std = 0.02;
};

inline std::vector<Labels> DecodeBest(const CtcModel& model, const Dataset& data,
                                      bool from_text, int beam, int workers) {
  std::vector<Labels> out(data.size());
  ParallelFor(static_cast<int>(data.size()), workers, [&](int i) {
    const LogitLattice lat =
        from_text ? model.Forward(data[i].y) : model.Forward(data[i].x);
    auto hyps = BeamNbest(lat, beam, 1);
    if (!hyps.empty()) out[i] = hyps.front().seq;
  });
  return out;
}

// Builds an initial SPG system. jsa-spg: fine-tune the transferred S2P on
// the weak labels, decode pseudo phoneme labels for all training
// utterances, train P2G and G2P on them. spg-from-g2p: train G2P on the weak
// labels first and take pseudo labels from it. Without weak labels jsa-spg
// decodes with the transferred S2P directly.
inline SpgSystem InitPipeline(const CtcModel& pretrained,
                              std::shared_ptr<const Alphabet> phonemes,
                              std::shared_ptr<const Alphabet> graphemes, int separator,
                              const Dataset& train, const Dataset& dev,
                              const ModelHyper& hp, const InitConfig& cfg, uint64_t seed) {
  if (train.empty()) throw DataError("training split is empty");
  Rng rng(DeriveSeed(seed, 0x1417));
  SpgSystem sys = MakeSystem(phonemes, graphemes, separator,
                             pretrained.shape().input_dim, hp, rng);
  sys.s2p = TransferS2P(pretrained, *phonemes, rng, cfg.unseen_std);
  sys.CheckInvariants();

  std::vector<CtcExample> weak_s2p, weak_g2p, dev_s2p, dev_g2p;
  for (const auto& u : train) {
    if (!u.h_weak) continue;
    weak_s2p.push_back({u.x, {}, *u.h_weak});
    weak_g2p.push_back({{}, u.y, *u.h_weak});
  }
  for (const auto& u : dev) {
    if (!u.h_weak) continue;
    dev_s2p.push_back({u.x, {}, *u.h_weak});
    dev_g2p.push_back({{}, u.y, *u.h_weak});
  }

  std::vector<Labels> pseudo;
  const int workers = cfg.p2g.workers;
  if (cfg.scheme == InitScheme::kJsaSpg) {
    if (!weak_s2p.empty()) SupervisedFit(sys.s2p, weak_s2p, cfg.finetune, dev_s2p);
    pseudo = DecodeBest(sys.s2p, train, false, cfg.pseudo_beam, workers);
  } else {
    if (weak_g2p.empty()) {
      throw ConfigError("spg-from-g2p needs phoneme-labeled sentences");
    }
    SupervisedFit(sys.g2p, weak_g2p, cfg.finetune, dev_g2p);
    pseudo = DecodeBest(sys.g2p, train, true, cfg.pseudo_beam, workers);
  }

  std::vector<CtcExample> p2g_data, g2p_data, s2p_data;
  for (size_t i = 0; i < train.size(); ++i) {
    if (pseudo[i].empty()) continue;
    p2g_data.push_back({{}, pseudo[i], train[i].y});
    if (cfg.scheme == InitScheme::kJsaSpg) {
      g2p_data.push_back({{}, train[i].y, pseudo[i]});
    } else {
      s2p_data.push_back({train[i].x, {}, pseudo[i]});
    }
  }
  SupervisedFit(sys.p2g, std::move(p2g_data), cfg.p2g);
  if (cfg.scheme == InitScheme::kJsaSpg) {
    SupervisedFit(sys.g2p, std::move(g2p_data), cfg.g2p);
  } else {
    SupervisedFit(sys.s2p, std::move(s2p_data), cfg.s2p, dev_s2p);
  }
  sys.CheckInvariants();
  return sys;
}

// ------------------------------------------------- P2G-only fine-tuning

// Pairs each utterance's S2P N-best with its text and fine-tunes P2G.
inline FitLog P2gAugment(SpgSystem& sys, const Dataset& data, int n,
                         const FitConfig& fit) {
  if (n < 1) throw ConfigError("augmentation N must be >= 1");
  std::vector<std::vector<Hypothesis>> nbest(data.size());
  ParallelFor(static_cast<int>(data.size()), fit.workers, [&](int i) {
    nbest[i] = BeamNbest(sys.s2p.Forward(data[i].x), n, n);
  });
  std::vector<CtcExample> ex;
  for (size_t i = 0; i < data.size(); ++i) {
    for (const auto& h : nbest[i]) {
      if (!h.seq.empty()) ex.push_back({{}, h.seq, data[i].y});
    }
  }
  return SupervisedFit(sys.p2g, std::move(ex), fit);
}

// Language domain adaptation: G2P N-best phoneme labels for text-only
// sentences, paired with the text, fine-tune P2G. S2P and G2P are untouched.
inline FitLog LdaAdapt(SpgSystem& sys, const std::vector<Labels>& text, int n,
                       const FitConfig& fit) {
  if (n < 1) throw ConfigError("adaptation N must be >= 1");
  std::vector<std::vector<Hypothesis>> nbest(text.size());
  ParallelFor(static_cast<int>(text.size()), fit.workers, [&](int i) {
    nbest[i] = BeamNbest(sys.g2p.Forward(text[i]), n, n);
  });
  std::vector<CtcExample> ex;
  for (size_t i = 0; i < text.size(); ++i) {
    for (const auto& h : nbest[i]) {
      if (!h.seq.empty()) ex.push_back({{}, h.seq, text[i]});
    }
  }
  return SupervisedFit(sys.p2g, std::move(ex), fit);
}

}  // namespace jsaspg

#endif  // JSASPG_TRAINER_HPP_
