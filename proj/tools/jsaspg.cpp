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

// jsaspg: command-line driver for the synthetic SPG experiments.

#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "jsaspg.hpp"

using namespace jsaspg;

namespace {

struct Globals {
  std::string config;
  std::string work_dir;
  int64_t seed = -1;
  int supervised = -1;
  int workers = 0;
};

ExperimentConfig Resolve(const Globals& g) {
  nlohmann::json j = nlohmann::json::object();
  if (!g.config.empty()) {
    std::ifstream is(g.config);
    if (!is) throw ConfigError("cannot read config " + g.config);
    try {
      is >> j;
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("config " + g.config + " is not valid JSON: " + e.what());
    }
  }
  if (!g.work_dir.empty()) j["work_dir"] = g.work_dir;
  if (g.seed >= 0) j["seed"] = static_cast<uint64_t>(g.seed);
  if (g.supervised >= 0) j["supervised_sentences"] = g.supervised;
  if (g.workers > 0) j["workers"] = g.workers;
  return ParseConfig(j);
}

void PrintJson(const nlohmann::json& j, const std::string& out) {
  if (out.empty()) {
    std::cout << j.dump(2) << "\n";
    return;
  }
  std::ofstream os(out);
  if (!os) throw DataError("cannot write " + out);
  os << j.dump(2) << "\n";
}

int Fail(int code, const std::string& kind, const std::string& what) {
  std::cerr << "jsaspg: " << kind << ": " << what << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"JSA-trained speech-phoneme-grapheme models on synthetic benchmarks"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", kToolVersion);
  Globals g;
  app.add_option("--config", g.config, "experiment config (JSON)");
  app.add_option("--work-dir", g.work_dir, "override the config's work_dir");
  app.add_option("--seed", g.seed, "override the config's seed");
  app.add_option("--supervised-sentences", g.supervised,
                 "number of phoneme-labeled training sentences (e.g. 0, 20, 100)");
  app.add_option("--workers", g.workers, "utterance-level worker threads");

  auto* synth = app.add_subcommand("synth", "generate datasets, texts and the language manifest");
  auto* pretrain = app.add_subcommand("pretrain", "train the multilingual S2P");
  std::string scheme;
  auto* init = app.add_subcommand("init", "build the initial S2P/P2G/G2P system");
  init->add_option("--scheme", scheme, "jsa-spg | spg-from-g2p")
      ->check(CLI::IsMember({"jsa-spg", "spg-from-g2p"}));
  auto* train = app.add_subcommand("train", "semi-supervised JSA training");
  auto* augment = app.add_subcommand("augment", "P2G augmentation with S2P n-best labels");
  auto* lm = app.add_subcommand("lm", "train the in-domain and cross-domain word LMs");
  std::string adapt_from = "aug";
  auto* adapt = app.add_subcommand("adapt", "language domain adaptation of P2G");
  adapt->add_option("--from", adapt_from, "stage to adapt")
      ->check(CLI::IsMember({"init", "jsa", "aug"}));

  std::string mode = "mls", set = "test", stage = "jsa", lm_name;
  auto* decode = app.add_subcommand("decode", "decode a dataset and write a report");
  decode->add_option("--mode", mode, "wo_lm | w_lm | mls")
      ->check(CLI::IsMember({"wo_lm", "w_lm", "mls"}));
  decode->add_option("--set", set, "train | dev | test | shifted_test");
  decode->add_option("--stage", stage, "init | jsa | aug | lda");
  decode->add_option("--lm", lm_name, "in | shifted (default depends on the set)");

  std::string refs, hyps, out;
  int separator_id = -1;
  auto* eval = app.add_subcommand("eval", "PER/WER of hypotheses against references");
  eval->add_option("--refs", refs, "reference dataset (JSON lines)")->required();
  eval->add_option("--hyps", hyps, "decode report or dataset (JSON lines)")->required();
  eval->add_option("--separator-id", separator_id, "word separator id when no --config");
  eval->add_option("--out", out, "write metrics JSON here instead of stdout");

  std::vector<std::string> metrics_files;
  bool force = false;
  auto* report = app.add_subcommand("report", "summary table over metrics files");
  report->add_option("metrics", metrics_files, "metrics JSON files")->required();
  report->add_flag("--force", force, "aggregate even if config hashes differ");

  auto* run = app.add_subcommand("run", "full pipeline: synth through metrics");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*report) {
      std::vector<nlohmann::json> ms;
      for (const auto& f : metrics_files) {
        std::ifstream is(f);
        if (!is) throw DataError("missing metrics file " + f);
        nlohmann::json j = nlohmann::json::parse(is, nullptr, false);
        if (j.is_discarded() || !j.contains("rows")) throw DataError(f + " is not a metrics file");
        if (j.value("schema_version", 0) != kMetricsSchemaVersion) {
          throw DataError(f + " has an unsupported metrics schema version");
        }
        ms.push_back(std::move(j));
      }
      std::cout << ReportTable(ms, force);
      return 0;
    }
    if (*eval) {
      const Dataset ref = ReadDataset(refs);
      const auto hyp = ReadHypotheses(hyps);
      nlohmann::json result;
      EvalResult r;
      if (!g.config.empty()) {
        const Experiment ex(Resolve(g));
        auto [ph, gr, sep] = ex.TargetAlphabets();
        r = Evaluate(ref, hyp, *gr, sep, Experiment::SilenceId(*ph));
      } else {
        if (separator_id < 1) throw ConfigError("eval needs --config or --separator-id");
        int max_id = separator_id;
        for (const auto& u : ref) {
          for (int v : u.y) max_id = std::max(max_id, v);
        }
        for (const auto& [id, h] : hyp) {
          for (int v : h.y) max_id = std::max(max_id, v);
        }
        std::vector<std::string> names;
        for (int i = 1; i <= max_id; ++i) names.push_back("<" + std::to_string(i) + ">");
        const Alphabet gr(AlphabetKind::kGrapheme, names);
        r = Evaluate(ref, hyp, gr, separator_id, 0);
      }
      const nlohmann::json meta = ReadDatasetMeta(refs);
      result["schema_version"] = kMetricsSchemaVersion;
      result["tool_version"] = kToolVersion;
      result["config_hash"] = meta.is_object() ? meta.value("config_hash", "") : "";
      result["refs"] = refs;
      result["hyps"] = hyps;
      result["n"] = r.n;
      result["per"] = NumOrNull(r.per);
      result["wer"] = r.wer;
      PrintJson(result, out);
      return 0;
    }

    const Experiment ex(Resolve(g));
    if (*synth) {
      ex.Synth();
    } else if (*pretrain) {
      const FitLog log = ex.Pretrain();
      std::cerr << "pretrain: " << log.used << " utterances, final train loss "
                << (log.train_loss.empty() ? 0.0 : log.train_loss.back()) << "\n";
    } else if (*init) {
      ex.Init(scheme.empty() ? ex.config().init.scheme : scheme);
    } else if (*train) {
      for (const auto& e : ex.TrainJsa()) std::cerr << e.ToJson().dump() << "\n";
    } else if (*augment) {
      ex.Augment();
    } else if (*lm) {
      ex.Lm();
    } else if (*adapt) {
      ex.Adapt(adapt_from);
    } else if (*decode) {
      const DecodeMode m = ModeFromName(mode);
      ex.Decode(m, set, stage, lm_name);
      std::cout << ex.DecodePath(stage, set, m) << "\n";
    } else if (*run) {
      const nlohmann::json metrics =
          ex.Run([](const std::string& s) { std::cerr << "[run] " << s << "\n"; });
      std::cout << ReportTable({metrics}, false);
    }
    return 0;
  } catch (const ConfigError& e) {
    return Fail(2, "config error", e.what());
  } catch (const DataError& e) {
    return Fail(3, "data error", e.what());
  } catch (const NumericError& e) {
    return Fail(4, "numeric error", e.what());
  } catch (const std::exception& e) {
    return Fail(1, "error", e.what());
  }
}
