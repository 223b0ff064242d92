// emofuse/fusion/scores.hpp

// Copyright 2026  Emofuse Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef EMOFUSE_FUSION_SCORES_HPP_
#define EMOFUSE_FUSION_SCORES_HPP_

#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "emofuse/common.hpp"

namespace emofuse::fusion {

enum class Modality { kSpeech, kText, kFused };

inline std::string modality_name(Modality m) {
  switch (m) {
    case Modality::kSpeech: return "speech";
    case Modality::kText: return "text";
    case Modality::kFused: return "fused";
  }
  throw std::invalid_argument("modality_name: unknown modality");
}

inline Modality modality_from_name(const std::string& name) {
  if (name == "speech") return Modality::kSpeech;
  if (name == "text") return Modality::kText;
  if (name == "fused") return Modality::kFused;
  throw std::invalid_argument("unknown modality name \"" + name + "\"");
}

// Per-segment class log-posteriors for one modality. The map keeps segment
// ids sorted so serialization is deterministic.
struct ScoreSet {
  Modality modality = Modality::kSpeech;
  int n_classes = 0;
  std::map<std::string, std::vector<double>> entries;

  void add(const std::string& id, std::vector<double> scores) {
    if (n_classes == 0) n_classes = static_cast<int>(scores.size());
    if (static_cast<int>(scores.size()) != n_classes)
      throw std::invalid_argument("score set: segment \"" + id + "\" has " +
                                  std::to_string(scores.size()) + " scores, expected " +
                                  std::to_string(n_classes));
    if (!entries.emplace(id, std::move(scores)).second)
      throw std::invalid_argument("score set: duplicate segment id \"" + id + "\"");
  }

  const std::vector<double>& at(const std::string& id) const {
    auto it = entries.find(id);
    if (it == entries.end())
      throw std::invalid_argument("score set: no scores for segment \"" + id + "\"");
    return it->second;
  }
};

// One JSON object per line: {"id": ..., "modality": ..., "log_post": [...]}.
inline void write_scores(const std::string& path, const ScoreSet& scores) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open score file for writing: " + path);
  for (const auto& [id, post] : scores.entries) {
    nlohmann::ordered_json j;
    j["id"] = id;
    j["modality"] = modality_name(scores.modality);
    j["log_post"] = post;
    out << j.dump() << "\n";
  }
  if (!out) throw std::runtime_error("failed writing score file: " + path);
}

inline ScoreSet read_scores(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open score file: " + path);
  ScoreSet scores;
  bool modality_set = false;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": malformed score record: " + e.what());
    }
    if (!j.contains("id") || !j.contains("modality") || !j.contains("log_post"))
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": score record missing id/modality/log_post");
    const Modality m = modality_from_name(j["modality"].get<std::string>());
    if (!modality_set) {
      scores.modality = m;
      modality_set = true;
    } else if (m != scores.modality) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": mixed modalities in one score file");
    }
    std::vector<double> post = j["log_post"].get<std::vector<double>>();
    try {
      scores.add(j["id"].get<std::string>(), std::move(post));
    } catch (const std::invalid_argument& e) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (scores.entries.empty()) throw std::runtime_error("score file is empty: " + path);
  return scores;
}

// Ingests scores produced outside this toolkit (the text scores may come from
// a separate system). Identical format; the modality is checked against what
// the caller expects.
inline ScoreSet import_external_scores(const std::string& path, Modality expected) {
  ScoreSet s = read_scores(path);
  if (s.modality != expected)
    throw std::runtime_error("external score file " + path + " holds \"" +
                             modality_name(s.modality) + "\" scores, expected \"" +
                             modality_name(expected) + "\"");
  return s;
}

}  // namespace emofuse::fusion

#endif  // EMOFUSE_FUSION_SCORES_HPP_
