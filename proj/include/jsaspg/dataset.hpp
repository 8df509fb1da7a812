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

#ifndef JSASPG_DATASET_HPP_
#define JSASPG_DATASET_HPP_

#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "jsaspg/ctc.hpp"
#include "jsaspg/seq.hpp"

#include "json.hpp"

namespace jsaspg {

struct UtteranceRecord {
  std::string id;
  Matrix x;                      // T x D frames
  Labels y;                      // graphemes, with word separators
  std::optional<Labels> h_weak;  // weak phoneme supervision
  std::optional<Labels> h_true;  // generator ground truth, evaluation only
  std::string domain;

  int frames() const { return static_cast<int>(x.rows()); }
};

using Dataset = std::vector<UtteranceRecord>;

inline nlohmann::json ToJson(const UtteranceRecord& r) {
  nlohmann::json j;
  j["id"] = r.id;
  nlohmann::json frames = nlohmann::json::array();
  for (Eigen::Index t = 0; t < r.x.rows(); ++t) {
    std::vector<float> row(r.x.cols());
    for (Eigen::Index d = 0; d < r.x.cols(); ++d) {
      row[d] = static_cast<float>(r.x(t, d));
    }
    frames.push_back(row);
  }
  j["frames"] = std::move(frames);
  j["text_ids"] = r.y;
  j["weak_phoneme_ids"] = r.h_weak ? nlohmann::json(*r.h_weak) : nlohmann::json();
  j["true_phoneme_ids"] = r.h_true ? nlohmann::json(*r.h_true) : nlohmann::json();
  j["domain"] = r.domain;
  return j;
}

inline UtteranceRecord FromJson(const nlohmann::json& j) {
  UtteranceRecord r;
  try {
    r.id = j.at("id").get<std::string>();
    const auto& frames = j.at("frames");
    const Eigen::Index T = static_cast<Eigen::Index>(frames.size());
    const Eigen::Index D = T ? static_cast<Eigen::Index>(frames[0].size()) : 0;
    r.x.resize(T, D);
    for (Eigen::Index t = 0; t < T; ++t) {
      if (static_cast<Eigen::Index>(frames[t].size()) != D) {
        throw DataError("ragged frame matrix in utterance " + r.id);
      }
      for (Eigen::Index d = 0; d < D; ++d) {
        r.x(t, d) = static_cast<double>(frames[t][d].get<float>());
      }
    }
    r.y = j.at("text_ids").get<Labels>();
    if (j.contains("weak_phoneme_ids") && !j["weak_phoneme_ids"].is_null()) {
      r.h_weak = j["weak_phoneme_ids"].get<Labels>();
    }
    if (j.contains("true_phoneme_ids") && !j["true_phoneme_ids"].is_null()) {
      r.h_true = j["true_phoneme_ids"].get<Labels>();
    }
    r.domain = j.value("domain", "");
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed utterance record: ") + e.what());
  }
  if (r.frames() < 1) throw DataError("utterance " + r.id + " has no frames");
  return r;
}

// An optional leading {"_meta": ...} line carries provenance; readers skip it.
inline void WriteDataset(const std::string& path, const Dataset& data,
                         const nlohmann::json& meta = nullptr) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot write dataset " + path);
  if (!meta.is_null()) os << nlohmann::json{{"_meta", meta}}.dump() << "\n";
  for (const auto& r : data) os << ToJson(r).dump() << "\n";
}

inline Dataset ReadDataset(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("missing dataset file " + path);
  Dataset out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError("bad JSON line in " + path + ": " + e.what());
    }
    if (j.contains("_meta")) continue;
    out.push_back(FromJson(j));
  }
  return out;
}

inline nlohmann::json ReadDatasetMeta(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("missing dataset file " + path);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_object() && j.contains("_meta")) return j["_meta"];
    break;
  }
  return nullptr;
}

// Output frames each model produces per input unit; needed to check the CTC
// length constraint before a pair is used for training.
struct LengthRules {
  int p2g_upsample = 1;
  int g2p_upsample = 1;

  bool S2POk(const UtteranceRecord& r, const Labels& h) const {
    return CtcLengthOk(r.frames(), h, /*strict=*/true);
  }
  bool P2GOk(const Labels& h, const Labels& y) const {
    return CtcLengthOk(static_cast<int>(h.size()) * p2g_upsample, y, true);
  }
  bool G2POk(const Labels& y, const Labels& h) const {
    return CtcLengthOk(static_cast<int>(y.size()) * g2p_upsample, h, true);
  }
  bool AllOk(const UtteranceRecord& r, const Labels& h) const {
    return S2POk(r, h) && P2GOk(h, r.y) && G2POk(r.y, h);
  }
};

// Drops utterances whose weak label violates a CTC length constraint.
// Returns the number dropped.
inline int DropInfeasible(Dataset& data, const LengthRules& rules) {
  const size_t before = data.size();
  data.erase(std::remove_if(data.begin(), data.end(),
                            [&](const UtteranceRecord& r) {
                              return r.h_weak && !rules.AllOk(r, *r.h_weak);
                            }),
             data.end());
  return static_cast<int>(before - data.size());
}

}  // namespace jsaspg

#endif  // JSASPG_DATASET_HPP_
